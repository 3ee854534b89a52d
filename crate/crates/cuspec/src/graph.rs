//! Finite weighted graphs: positive vertex measure `m`, symmetric
//! nonnegative edge weights `E`, no loops, connected. Vertex order is the
//! insertion order and fixes all matrix indexing.

use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct WeightedGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    measure: Vec<f64>,
    edges: Vec<Edge>,
    /// vertex -> (neighbor, edge index)
    adj: Vec<Vec<(usize, usize)>>,
}

/// An extended real; `Infinite` stands for +∞ (acyclic girth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    pub fn half(self) -> ExtReal {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x / 2.0),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }

    fn min(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a.min(b)),
            (ExtReal::Finite(a), ExtReal::Infinite) => ExtReal::Finite(a),
            (ExtReal::Infinite, b) => b,
        }
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}

/// Girth / radius-of-injectivity report in the weighted-length metric.
#[derive(Debug, Clone)]
pub struct WeightedMetricReport {
    /// Weighted length per edge, aligned with `WeightedGraph::edges`.
    pub edge_lengths: Vec<f64>,
    /// Girth at each vertex.
    pub vertex_girth: Vec<ExtReal>,
    /// Radius of injectivity at each vertex (half the girth).
    pub vertex_rad: Vec<ExtReal>,
    pub girth: ExtReal,
    pub rad: ExtReal,
    /// A simple cycle (vertex sequence, closed implicitly) achieving the
    /// global girth, when finite.
    pub witness_cycle: Option<Vec<usize>>,
}

impl WeightedGraph {
    /// `vertices`: (id, measure); `edges`: (id, id, weight). Zero-weight
    /// entries are dropped (E(x,y)=0 means "not an edge").
    pub fn build<S: AsRef<str>>(
        vertices: &[(S, f64)],
        edges: &[(S, S, f64)],
    ) -> Result<WeightedGraph> {
        let mut ids = Vec::with_capacity(vertices.len());
        let mut index = HashMap::with_capacity(vertices.len());
        let mut measure = Vec::with_capacity(vertices.len());
        for (id, m) in vertices {
            let id = id.as_ref().to_owned();
            if *m <= 0.0 || !m.is_finite() {
                return Err(Error::NonpositiveMeasure(id, *m));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::BadParameters(format!("duplicate vertex id {id:?}")));
            }
            ids.push(id);
            measure.push(*m);
        }
        let lookup = |id: &S| -> Result<usize> {
            index
                .get(id.as_ref())
                .copied()
                .ok_or_else(|| Error::UnknownVertex(id.as_ref().to_owned()))
        };
        let mut es: Vec<Edge> = Vec::new();
        let mut seen = HashMap::new();
        for (a, b, w) in edges {
            let (i, j) = (lookup(a)?, lookup(b)?);
            if i == j {
                return Err(Error::SelfLoop(a.as_ref().to_owned()));
            }
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::NegativeWeight(
                    a.as_ref().to_owned(),
                    b.as_ref().to_owned(),
                    *w,
                ));
            }
            let key = (i.min(j), i.max(j));
            if seen.insert(key, ()).is_some() {
                return Err(Error::DuplicateEdge(
                    a.as_ref().to_owned(),
                    b.as_ref().to_owned(),
                ));
            }
            if *w > 0.0 {
                es.push(Edge { u: key.0, v: key.1, weight: *w });
            }
        }
        let mut adj = vec![Vec::new(); ids.len()];
        for (k, e) in es.iter().enumerate() {
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        let g = WeightedGraph { ids, index, measure, edges: es, adj };
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(g)
    }

    fn is_connected(&self) -> bool {
        let n = self.ids.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == n
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, x: usize) -> &str {
        &self.ids[x]
    }

    pub fn vertex(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_owned()))
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[x]
    }

    pub fn edge_index(&self, x: usize, y: usize) -> Option<usize> {
        self.adj[x].iter().find(|&&(n, _)| n == y).map(|&(_, k)| k)
    }

    /// E(x,y); zero when not an edge.
    pub fn weight_between(&self, x: usize, y: usize) -> f64 {
        self.edge_index(x, y).map_or(0.0, |k| self.edges[k].weight)
    }

    /// deg_G(x) = (1/m(x)) Σ_y E(x,y).
    pub fn degree(&self, x: usize) -> f64 {
        let s: f64 = self.adj[x].iter().map(|&(_, k)| self.edges[k].weight).sum();
        s / self.measure[x]
    }

    pub fn max_degree(&self) -> f64 {
        (0..self.vertex_count()).map(|x| self.degree(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Hop metric ρ_G (BFS).
    pub fn hop_distance(&self, x: usize, y: usize) -> usize {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut queue = std::collections::VecDeque::new();
        dist[x] = 0;
        queue.push_back(x);
        while let Some(a) = queue.pop_front() {
            if a == y {
                return dist[a];
            }
            for &(b, _) in &self.adj[a] {
                if dist[b] == usize::MAX {
                    dist[b] = dist[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        unreachable!("graph is connected");
    }

    /// L_G((x,y)) = sqrt(min(m(x), m(y)) / E(x,y)).
    pub fn weighted_length(&self, x: usize, y: usize) -> Result<f64> {
        let k = self
            .edge_index(x, y)
            .ok_or_else(|| Error::NotAnEdge(self.ids[x].clone(), self.ids[y].clone()))?;
        Ok(self.edge_length(k))
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        let e = &self.edges[k];
        (self.measure[e.u].min(self.measure[e.v]) / e.weight).sqrt()
    }

    /// Dijkstra over the weighted edge lengths; `skip_edge` removes one edge.
    fn dijkstra_lengths(&self, src: usize, skip_edge: Option<usize>) -> (Vec<f64>, Vec<usize>) {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let n = self.vertex_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push((Reverse(ordered_float(0.0)), src));
        while let Some((Reverse(d), x)) = heap.pop() {
            let d = d.0;
            if d > dist[x] {
                continue;
            }
            for &(y, k) in &self.adj[x] {
                if Some(k) == skip_edge {
                    continue;
                }
                let nd = d + self.edge_length(k);
                if nd < dist[y] {
                    dist[y] = nd;
                    prev[y] = x;
                    heap.push((Reverse(ordered_float(nd)), y));
                }
            }
        }
        (dist, prev)
    }

    /// ρ_{L_G}(x, y).
    pub fn weighted_distance(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        self.dijkstra_lengths(x, None).0[y]
    }

    /// Girth and radius of injectivity, per vertex and global, with a
    /// witness cycle for the global value. For each edge e = (u,v) the
    /// candidate is L(e) + ρ_{L_{G−e}}(u, v); per-vertex values restrict to
    /// edges incident to the vertex.
    pub fn girth_and_radius(&self) -> WeightedMetricReport {
        let n = self.vertex_count();
        let edge_lengths: Vec<f64> = (0..self.edge_count()).map(|k| self.edge_length(k)).collect();
        let mut vertex_girth = vec![ExtReal::Infinite; n];
        let mut global = ExtReal::Infinite;
        let mut witness: Option<Vec<usize>> = None;
        for x in 0..n {
            for &(y, k) in &self.adj[x] {
                // every simple cycle through x decomposes as the edge (x,y)
                // plus a simple path from x to y avoiding it
                let (dist, prev) = self.dijkstra_lengths(x, Some(k));
                if dist[y].is_finite() {
                    let total = dist[y] + edge_lengths[k];
                    vertex_girth[x] = vertex_girth[x].min(ExtReal::Finite(total));
                    let better = match global {
                        ExtReal::Infinite => true,
                        ExtReal::Finite(g) => total < g,
                    };
                    if better {
                        global = ExtReal::Finite(total);
                        let mut path = vec![y];
                        let mut cur = y;
                        while cur != x {
                            cur = prev[cur];
                            path.push(cur);
                        }
                        path.reverse(); // x ... y, closed by edge (y,x)
                        witness = Some(path);
                    }
                }
            }
        }
        let vertex_rad: Vec<ExtReal> = vertex_girth.iter().map(|g| g.half()).collect();
        WeightedMetricReport {
            edge_lengths,
            vertex_girth,
            vertex_rad,
            girth: global,
            rad: global.half(),
            witness_cycle: witness,
        }
    }
}

/// Total order on non-NaN floats for the Dijkstra heap.
fn ordered_float(x: f64) -> OrdF64 {
    OrdF64(x)
}

#[derive(PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).expect("NaN in edge length")
    }
}

/// The half-line factor of the cusp example: vertices `0..=depth`,
/// m1(j) = e^{-j}, E1(j, j+1) = e^{-(2j+1)/2}.
pub fn cusp_half_line(depth: usize) -> WeightedGraph {
    let vertices: Vec<(String, f64)> =
        (0..=depth).map(|j| (j.to_string(), (-(j as f64)).exp())).collect();
    let edges: Vec<(String, String, f64)> = (0..depth)
        .map(|j| {
            (j.to_string(), (j + 1).to_string(), (-(2.0 * j as f64 + 1.0) / 2.0).exp())
        })
        .collect();
    WeightedGraph::build(&vertices, &edges).expect("half-line is a valid graph")
}

/// Unit-weight cycle graph on `n` vertices (a triangle for n = 3).
pub fn unit_cycle(n: usize) -> WeightedGraph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    let vertices: Vec<(String, f64)> = (0..n).map(|j| (j.to_string(), 1.0)).collect();
    let edges: Vec<(String, String, f64)> =
        (0..n).map(|j| (j.to_string(), ((j + 1) % n).to_string(), 1.0)).collect();
    WeightedGraph::build(&vertices, &edges).expect("cycle is a valid graph")
}

/// Unit path graph on `n` vertices.
pub fn unit_path(n: usize) -> WeightedGraph {
    assert!(n >= 1);
    let vertices: Vec<(String, f64)> = (0..n).map(|j| (j.to_string(), 1.0)).collect();
    let edges: Vec<(String, String, f64)> =
        (0..n.saturating_sub(1)).map(|j| (j.to_string(), (j + 1).to_string(), 1.0)).collect();
    WeightedGraph::build(&vertices, &edges).expect("path is a valid graph")
}
