//! JSON serialization of weighted magnetic graphs.
//!
//! ```json
//! {
//!   "vertices": [{"id": "a", "m": 1.0}, ...],
//!   "edges": [{"u": "a", "v": "b", "weight": 1.0,
//!              "theta": 0.5, "theta_rat": [1, 3]}, ...]
//! }
//! ```
//!
//! `theta` is radians; `theta_rat = [p, q]` means 2π·p/q and takes
//! precedence when both are present. Phases are oriented from `u` to `v`.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::magnetic::MagneticPotential;
use crate::phase::Phase;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: String,
    pub m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub u: String,
    pub v: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rat: Option<[i64; 2]>,
}

impl GraphDoc {
    pub fn to_graph(&self) -> Result<(WeightedGraph, MagneticPotential)> {
        let vertices: Vec<(String, f64)> =
            self.vertices.iter().map(|v| (v.id.clone(), v.m)).collect();
        let edges: Vec<(String, String, f64)> = self
            .edges
            .iter()
            .map(|e| (e.u.clone(), e.v.clone(), e.weight))
            .collect();
        let g = WeightedGraph::build(&vertices, &edges)?;
        let mut phases = vec![Phase::zero(); g.edge_count()];
        for e in &self.edges {
            let (iu, iv) = (g.vertex(&e.u)?, g.vertex(&e.v)?);
            if e.weight == 0.0 {
                continue; // dropped by the builder
            }
            let k = g
                .edge_index(iu, iv)
                .ok_or_else(|| Error::NotAnEdge(e.u.clone(), e.v.clone()))?;
            let p = match (e.theta_rat, e.theta) {
                (Some([p, q]), _) => {
                    if q == 0 {
                        return Err(Error::BadParameters(format!(
                            "edge {}-{}: zero denominator in theta_rat",
                            e.u, e.v
                        )));
                    }
                    Phase::two_pi_rational(p, q)
                }
                (None, Some(rad)) => {
                    if !rad.is_finite() {
                        return Err(Error::BadParameters(format!(
                            "edge {}-{}: non-finite theta",
                            e.u, e.v
                        )));
                    }
                    Phase::Rad(rad).normalized()
                }
                (None, None) => Phase::zero(),
            };
            // documents orient u→v; storage orients low→high index
            phases[k] = if iu < iv { p } else { p.neg() };
        }
        let theta = MagneticPotential::from_phases(&g, phases)?;
        Ok((g, theta))
    }

    pub fn from_graph(g: &WeightedGraph, theta: &MagneticPotential) -> Result<GraphDoc> {
        theta.check(g)?;
        let vertices = (0..g.vertex_count())
            .map(|x| VertexDoc { id: g.id(x).to_owned(), m: g.measure(x) })
            .collect();
        let edges = g
            .edges()
            .iter()
            .zip(theta.phases())
            .map(|(e, p)| {
                let (theta_rat, theta) = match p.rational() {
                    Some(r) if !p.is_exactly_zero() => (Some([*r.numer(), *r.denom()]), None),
                    Some(_) => (None, None),
                    None => (None, Some(p.radians_value())),
                };
                EdgeDoc {
                    u: g.id(e.u).to_owned(),
                    v: g.id(e.v).to_owned(),
                    weight: e.weight,
                    theta,
                    theta_rat,
                }
            })
            .collect();
        Ok(GraphDoc { vertices, edges })
    }
}

pub fn load_graph(path: &Path) -> Result<(WeightedGraph, MagneticPotential)> {
    let text = std::fs::read_to_string(path)?;
    let doc: GraphDoc = serde_json::from_str(&text)?;
    doc.to_graph()
}

pub fn save_graph(path: &Path, g: &WeightedGraph, theta: &MagneticPotential) -> Result<()> {
    let doc = GraphDoc::from_graph(g, theta)?;
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text)?;
    Ok(())
}
