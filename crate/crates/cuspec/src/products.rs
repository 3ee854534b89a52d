//! Products of weighted magnetic graphs. Both flavours share the product
//! measure m(x,y) = m1(x)·m2(y) and the additive potential (θ1 on
//! horizontal edges, θ2 on vertical ones); they differ in the edge
//! weights:
//!
//! - Cartesian: E((x,y),(x',y)) = E1(x,x')·m2(y) and
//!   E((x,y),(x,y')) = m1(x)·E2(y,y'); then Δ = Δ1⊗1 + 1⊗Δ2.
//! - Through an index set I ⊆ V2: E((x,y),(x',y)) = E1(x,x')·1_I(y) and
//!   E((x,y),(x,y')) = E2(y,y'); then Δ = Δ1⊗(1_I/m2) + (1/m1)⊗Δ2.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::magnetic::MagneticPotential;
use crate::phase::Phase;
use num_rational::Rational64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductKind {
    Cartesian,
    ThroughIndex,
}

/// A product graph together with both factors, so downstream consumers
/// can exploit the tensor structure. Vertex (x, y) sits at index
/// x·|V2| + y and has id "x|y".
#[derive(Debug, Clone)]
pub struct ProductGraph {
    pub graph: WeightedGraph,
    pub theta: MagneticPotential,
    pub g1: WeightedGraph,
    pub theta1: MagneticPotential,
    pub g2: WeightedGraph,
    pub theta2: MagneticPotential,
    /// Sorted vertex indices of G2 where horizontal edges attach
    /// (all of V2 for the Cartesian product).
    pub index_set: Vec<usize>,
    pub kind: ProductKind,
}

impl ProductGraph {
    pub fn vertex_index(&self, x: usize, y: usize) -> usize {
        x * self.g2.vertex_count() + y
    }

    pub fn factor_indices(&self, v: usize) -> (usize, usize) {
        let n2 = self.g2.vertex_count();
        (v / n2, v % n2)
    }

    pub fn in_index_set(&self, y: usize) -> bool {
        self.index_set.binary_search(&y).is_ok()
    }
}

fn assemble(
    g1: &WeightedGraph,
    theta1: &MagneticPotential,
    g2: &WeightedGraph,
    theta2: &MagneticPotential,
    index_set: Vec<usize>,
    kind: ProductKind,
) -> Result<ProductGraph> {
    theta1.check(g1)?;
    theta2.check(g2)?;
    let (n1, n2) = (g1.vertex_count(), g2.vertex_count());
    let mut vertices = Vec::with_capacity(n1 * n2);
    for x in 0..n1 {
        for y in 0..n2 {
            vertices.push((
                format!("{}|{}", g1.id(x), g2.id(y)),
                g1.measure(x) * g2.measure(y),
            ));
        }
    }
    let in_set = |y: usize| index_set.binary_search(&y).is_ok();
    let mut edges = Vec::new();
    let mut phases = Vec::new();
    // horizontal copies of G1 edges; stored orientation u<v is preserved
    // by x-major indexing, so the factor phase carries over unchanged
    for (k, e) in g1.edges().iter().enumerate() {
        for y in 0..n2 {
            let w = match kind {
                ProductKind::Cartesian => e.weight * g2.measure(y),
                ProductKind::ThroughIndex => {
                    if !in_set(y) {
                        continue;
                    }
                    e.weight
                }
            };
            edges.push((
                vertices[e.u * n2 + y].0.clone(),
                vertices[e.v * n2 + y].0.clone(),
                w,
            ));
            phases.push(theta1.phases()[k]);
        }
    }
    // vertical copies of G2 edges
    for x in 0..n1 {
        for (k, e) in g2.edges().iter().enumerate() {
            let w = match kind {
                ProductKind::Cartesian => g1.measure(x) * e.weight,
                ProductKind::ThroughIndex => e.weight,
            };
            edges.push((
                vertices[x * n2 + e.u].0.clone(),
                vertices[x * n2 + e.v].0.clone(),
                w,
            ));
            phases.push(theta2.phases()[k]);
        }
    }
    let graph = WeightedGraph::build(&vertices, &edges)?;
    let theta = MagneticPotential::from_phases(&graph, phases)?;
    Ok(ProductGraph {
        graph,
        theta,
        g1: g1.clone(),
        theta1: theta1.clone(),
        g2: g2.clone(),
        theta2: theta2.clone(),
        index_set,
        kind,
    })
}

pub fn cartesian_product(
    g1: &WeightedGraph,
    theta1: &MagneticPotential,
    g2: &WeightedGraph,
    theta2: &MagneticPotential,
) -> Result<ProductGraph> {
    let all: Vec<usize> = (0..g2.vertex_count()).collect();
    assemble(g1, theta1, g2, theta2, all, ProductKind::Cartesian)
}

pub fn product_through(
    g1: &WeightedGraph,
    theta1: &MagneticPotential,
    g2: &WeightedGraph,
    theta2: &MagneticPotential,
    index_set: &[usize],
) -> Result<ProductGraph> {
    if index_set.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let mut set: Vec<usize> = index_set.to_vec();
    set.sort_unstable();
    set.dedup();
    if *set.last().unwrap() >= g2.vertex_count() {
        return Err(Error::BadParameters(format!(
            "index set entry {} out of range for a fiber with {} vertices",
            set.last().unwrap(),
            g2.vertex_count()
        )));
    }
    assemble(g1, theta1, g2, theta2, set, ProductKind::ThroughIndex)
}

/// The discrete-cusp family: a rapidly-decaying half-line of depth N
/// (m1(j) = e^{-j}, nearest-neighbour weights e^{-(2j+1)/2}) producted
/// through the whole fiber with a unit n-cycle carrying flux κ·2π/3,
/// spread as κ·2π/(3n) per edge.
pub fn build_cusp_example(depth: usize, fiber_n: usize, kappa: Rational64) -> Result<ProductGraph> {
    if depth < 1 {
        return Err(Error::BadParameters(
            "cusp depth must be at least 1".to_owned(),
        ));
    }
    if fiber_n < 3 {
        return Err(Error::BadParameters(
            "cusp fiber needs at least 3 vertices".to_owned(),
        ));
    }
    if depth > 700 {
        return Err(Error::BadParameters(
            "cusp depth above 700 underflows the e^-j measures; use the \
             unit-measure Jacobi picture of the low-energy block for deeper \
             truncations"
                .to_owned(),
        ));
    }
    let g1 = crate::graph::cusp_half_line(depth);
    let theta1 = MagneticPotential::zero(&g1);
    let g2 = crate::graph::unit_cycle(fiber_n);
    let per_edge = kappa / Rational64::from_integer(3 * fiber_n as i64);
    let mut phases = vec![Phase::zero(); g2.edge_count()];
    for (k, e) in g2.edges().iter().enumerate() {
        // orient each edge along the cycle 0→1→…→n-1→0
        let along = (e.u + 1) % fiber_n == e.v;
        let p = Phase::TwoPi(per_edge).normalized();
        phases[k] = if along { p } else { p.neg() };
    }
    let theta2 = MagneticPotential::from_phases(&g2, phases)?;
    let all: Vec<usize> = (0..fiber_n).collect();
    product_through(&g1, &theta1, &g2, &theta2, &all)
}
