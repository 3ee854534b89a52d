//! Magnetic potentials on the edge set, the cycle space of the graph,
//! holonomy, gauge transforms, and the coupling period ν.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::phase::{rational_lcm, Phase};
use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

/// Antisymmetric edge phase θ. Stored per stored edge, oriented from the
/// lower to the higher vertex index; θ(v,u) = -θ(u,v).
#[derive(Debug, Clone)]
pub struct MagneticPotential {
    phases: Vec<Phase>,
    vertex_count: usize,
}

impl MagneticPotential {
    pub fn zero(g: &WeightedGraph) -> Self {
        MagneticPotential {
            phases: vec![Phase::zero(); g.edge_count()],
            vertex_count: g.vertex_count(),
        }
    }

    /// Phases aligned with `g.edges()`, oriented low-index -> high-index.
    pub fn from_phases(g: &WeightedGraph, phases: Vec<Phase>) -> Result<Self> {
        if phases.len() != g.edge_count() {
            return Err(Error::PotentialGraphMismatch);
        }
        Ok(MagneticPotential {
            phases: phases.into_iter().map(Phase::normalized).collect(),
            vertex_count: g.vertex_count(),
        })
    }

    pub fn matches(&self, g: &WeightedGraph) -> bool {
        self.phases.len() == g.edge_count() && self.vertex_count == g.vertex_count()
    }

    pub fn check(&self, g: &WeightedGraph) -> Result<()> {
        if self.matches(g) {
            Ok(())
        } else {
            Err(Error::PotentialGraphMismatch)
        }
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// θ(x, y) for an oriented vertex pair that is an edge of `g`.
    pub fn theta(&self, g: &WeightedGraph, x: usize, y: usize) -> Result<Phase> {
        let k = g
            .edge_index(x, y)
            .ok_or_else(|| Error::NotAnEdge(g.id(x).to_owned(), g.id(y).to_owned()))?;
        Ok(self.oriented(g, k, x))
    }

    /// Phase of stored edge `k` traversed starting at `tail`.
    pub fn oriented(&self, g: &WeightedGraph, k: usize, tail: usize) -> Phase {
        if g.edges()[k].u == tail {
            self.phases[k]
        } else {
            self.phases[k].neg()
        }
    }

    pub fn scale(&self, k: Rational64) -> Self {
        MagneticPotential {
            phases: self.phases.iter().map(|p| p.scale(k)).collect(),
            vertex_count: self.vertex_count,
        }
    }

    pub fn all_rational(&self) -> bool {
        self.phases.iter().all(|p| p.rational().is_some())
    }
}

/// An oriented closed walk, as a chain of (tail, head) edges.
#[derive(Debug, Clone)]
pub struct Cycle {
    pub edges: Vec<(usize, usize)>,
}

/// BFS spanning tree plus one fundamental cycle per non-tree edge.
#[derive(Debug, Clone)]
pub struct CycleBasis {
    /// Parent of each vertex in the BFS tree (root: None).
    pub parent: Vec<Option<usize>>,
    /// Edge indices of the non-tree edges, aligned with `cycles`.
    pub non_tree_edges: Vec<usize>,
    pub cycles: Vec<Cycle>,
}

impl CycleBasis {
    pub fn rank(&self) -> usize {
        self.cycles.len()
    }
}

/// Spanning tree from the first vertex; one fundamental cycle per
/// non-tree edge. Rank = |E| - |V| + 1.
pub fn cycle_basis(g: &WeightedGraph) -> CycleBasis {
    let n = g.vertex_count();
    let mut parent = vec![None; n];
    let mut depth = vec![0usize; n];
    let mut in_tree = vec![false; g.edge_count()];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[0] = true;
    queue.push_back(0usize);
    while let Some(x) = queue.pop_front() {
        for &(y, k) in g.neighbors(x) {
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some(x);
                depth[y] = depth[x] + 1;
                in_tree[k] = true;
                queue.push_back(y);
            }
        }
    }
    let mut non_tree_edges = Vec::new();
    let mut cycles = Vec::new();
    for (k, e) in g.edges().iter().enumerate() {
        if in_tree[k] {
            continue;
        }
        // cycle: (u,v) then the tree path v -> u
        let (u, v) = (e.u, e.v);
        let mut up_u = vec![u];
        let mut up_v = vec![v];
        let (mut a, mut b) = (u, v);
        while depth[a] > depth[b] {
            a = parent[a].unwrap();
            up_u.push(a);
        }
        while depth[b] > depth[a] {
            b = parent[b].unwrap();
            up_v.push(b);
        }
        while a != b {
            a = parent[a].unwrap();
            b = parent[b].unwrap();
            up_u.push(a);
            up_v.push(b);
        }
        // up_u: u..lca, up_v: v..lca
        let mut edges = vec![(u, v)];
        for w in up_v.windows(2) {
            edges.push((w[0], w[1]));
        }
        for w in up_u.windows(2).rev() {
            edges.push((w[1], w[0]));
        }
        non_tree_edges.push(k);
        cycles.push(Cycle { edges });
    }
    CycleBasis { parent, non_tree_edges, cycles }
}

/// Hol_θ(γ): Σ θ over the oriented cycle, mod 2π; exact when all phases
/// on the cycle are rational multiples of 2π.
pub fn holonomy(g: &WeightedGraph, theta: &MagneticPotential, cycle: &Cycle) -> Result<Phase> {
    theta.check(g)?;
    if cycle.edges.is_empty() {
        return Err(Error::NotACycle("empty edge sequence".into()));
    }
    for w in cycle.edges.windows(2) {
        if w[0].1 != w[1].0 {
            return Err(Error::NotACycle("consecutive edges do not chain".into()));
        }
    }
    let first = cycle.edges.first().unwrap().0;
    let last = cycle.edges.last().unwrap().1;
    if first != last {
        return Err(Error::NotACycle("walk does not close".into()));
    }
    let mut total = Phase::zero();
    for &(x, y) in &cycle.edges {
        total = total.add(theta.theta(g, x, y)?);
    }
    Ok(total.normalized())
}

/// Holonomy of every fundamental cycle. Two potentials are
/// gauge-equivalent iff their vectors agree mod 2π.
pub fn holonomy_vector(
    g: &WeightedGraph,
    theta: &MagneticPotential,
    basis: &CycleBasis,
) -> Result<Vec<Phase>> {
    basis.cycles.iter().map(|c| holonomy(g, theta, c)).collect()
}

pub fn holonomy_is_trivial(
    g: &WeightedGraph,
    theta: &MagneticPotential,
    basis: &CycleBasis,
) -> Result<bool> {
    Ok(holonomy_vector(g, theta, basis)?.iter().all(|h| h.is_zero(1e-12)))
}

/// A gauge transform, σ_x per vertex; acts as multiplication by e^{iσ_x}.
#[derive(Debug, Clone)]
pub struct GaugeFunction {
    pub sigma: Vec<f64>,
}

/// U*(θ)_{xy} = θ_{x,y} + σ_y - σ_x, renormalized to (-π, π].
pub fn apply_gauge(
    g: &WeightedGraph,
    theta: &MagneticPotential,
    gauge: &GaugeFunction,
) -> Result<MagneticPotential> {
    theta.check(g)?;
    if gauge.sigma.len() != g.vertex_count() {
        return Err(Error::PotentialGraphMismatch);
    }
    let phases = g
        .edges()
        .iter()
        .zip(theta.phases())
        .map(|(e, p)| p.add(Phase::Rad(gauge.sigma[e.v] - gauge.sigma[e.u])).normalized())
        .collect();
    MagneticPotential::from_phases(g, phases)
}

/// σ with apply_gauge(θ2, σ) = θ1, when the holonomy vectors agree:
/// σ = 0 at the spanning-tree root, propagated along tree edges, then
/// verified on every non-tree edge.
pub fn find_gauge(
    g: &WeightedGraph,
    theta1: &MagneticPotential,
    theta2: &MagneticPotential,
) -> Result<GaugeFunction> {
    theta1.check(g)?;
    theta2.check(g)?;
    let basis = cycle_basis(g);
    let n = g.vertex_count();
    let mut sigma = vec![0.0f64; n];
    // BFS in tree order so parents are assigned first
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| {
        let mut d = 0;
        let mut cur = x;
        while let Some(p) = basis.parent[cur] {
            d += 1;
            cur = p;
        }
        d
    });
    for &y in &order {
        if let Some(x) = basis.parent[y] {
            // θ1(x,y) = θ2(x,y) + σ_y - σ_x
            let d = theta1.theta(g, x, y)?.add(theta2.theta(g, x, y)?.neg());
            sigma[y] = sigma[x] + d.radians_value();
        }
    }
    let gauge = GaugeFunction { sigma };
    // verify every non-tree edge; a violation is exactly a holonomy mismatch
    let transformed = apply_gauge(g, theta2, &gauge)?;
    for (i, &k) in basis.non_tree_edges.iter().enumerate() {
        let e = &g.edges()[k];
        let got = transformed.theta(g, e.u, e.v)?;
        let want = theta1.theta(g, e.u, e.v)?;
        if !got.approx_eq(want, 1e-9) {
            return Err(Error::HolonomyMismatch {
                cycle_index: i,
                edge: (g.id(e.u).to_owned(), g.id(e.v).to_owned()),
            });
        }
    }
    Ok(gauge)
}

/// The set {λ : Hol_{λθ} ≡ 0}.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingPeriod {
    /// Every raw cycle flux is exactly zero; the set is all of R.
    Trivial,
    /// The set is νZ.
    Period(Rational64),
    /// The set is {0} (irrational fluxes; not produced from rational input).
    Zero,
}

/// Coupling period from exact rational fluxes. For a fundamental flux
/// 2π·p/q (the raw cycle sum of the stored phases, NOT reduced mod 2π:
/// a non-integer coupling λ acts on the phase representatives, so
/// λ·(p/q + 1) and λ·(p/q) are not equivalent) the couplings killing it
/// are (q/p)Z, and ν is the rational lcm of q_i/p_i over nonzero fluxes.
pub fn coupling_period(
    g: &WeightedGraph,
    theta: &MagneticPotential,
    basis: &CycleBasis,
) -> Result<CouplingPeriod> {
    let mut fluxes = Vec::with_capacity(basis.cycles.len());
    for cycle in &basis.cycles {
        let mut total = Rational64::zero();
        for &(x, y) in &cycle.edges {
            match theta.theta(g, x, y)?.rational() {
                Some(r) => total += r,
                None => return Err(Error::IrrationalFlux),
            }
        }
        fluxes.push(total);
    }
    let nonzero: Vec<Rational64> = fluxes.into_iter().filter(|r| !r.is_zero()).collect();
    if nonzero.is_empty() {
        return Ok(CouplingPeriod::Trivial);
    }
    let mut nu = Rational64::one();
    let mut first = true;
    for r in nonzero {
        let period = r.recip().abs(); // q/p for flux p/q
        nu = if first { period } else { rational_lcm(nu, period) };
        first = false;
    }
    Ok(CouplingPeriod::Period(nu))
}

/// Smallest eigenvalue of Δ_{G,θ} next to the holonomy-based kernel
/// prediction (Lemma: nontrivial kernel iff Hol_θ = 0 on finite graphs).
#[derive(Debug, Clone)]
pub struct KernelCheck {
    pub lambda_min: f64,
    pub holonomy_trivial: bool,
    pub kernel_predicted: bool,
}

pub fn kernel_dimension_check(
    g: &WeightedGraph,
    theta: &MagneticPotential,
) -> Result<KernelCheck> {
    let basis = cycle_basis(g);
    let trivial = holonomy_is_trivial(g, theta, &basis)?;
    let h = crate::operators::assemble_laplacian(g, theta)?;
    let lambda_min = *h
        .eigenvalues()?
        .first()
        .expect("graph has at least one vertex");
    Ok(KernelCheck { lambda_min, holonomy_trivial: trivial, kernel_predicted: trivial })
}
