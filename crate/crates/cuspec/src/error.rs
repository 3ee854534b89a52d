use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("vertex {0:?} has non-positive measure {1}")]
    NonpositiveMeasure(String, f64),
    #[error("self-loop at vertex {0:?}")]
    SelfLoop(String),
    #[error("edge ({0:?}, {1:?}) has negative weight {2}")]
    NegativeWeight(String, String, f64),
    #[error("edge ({0:?}, {1:?}) listed more than once")]
    DuplicateEdge(String, String),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("({0:?}, {1:?}) is not an edge")]
    NotAnEdge(String, String),
    #[error("edge sequence is not a cycle: {0}")]
    NotACycle(String),
    #[error("holonomy mismatch on fundamental cycle {cycle_index} (non-tree edge {edge:?})")]
    HolonomyMismatch { cycle_index: usize, edge: (String, String) },
    #[error("coupling period is undecidable for floating-point fluxes; supply rational fluxes")]
    IrrationalFlux,
    #[error("index set I is empty; the product would be disconnected")]
    EmptyIndexSet,
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("magnetic potential does not live on this graph")]
    PotentialGraphMismatch,
    #[error("operator is not self-adjoint in the m-inner product (deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("operator dimensions or measures do not match")]
    DimensionMismatch,
    #[error("operation requires a product through I")]
    NotThroughIProduct,
    #[error("fiber potential has trivial holonomy; eigenvalue-ratio asymptotics are not claimed")]
    TrivialFiberHolonomy,
    #[error("graph does not carry the cusp example weights: {0}")]
    WrongWeights(String),
    #[error("fiber Laplacian has a (numerically) zero eigenvalue; F(alpha) is undefined")]
    ZeroFiberEigenvalue,
    #[error("fiber degree is not constant over the fiber vertex set")]
    NonregularFiber,
    #[error("no bracketing interval found for F(alpha) = {0} on (0, {1}]")]
    NoBracket(f64, f64),
    #[error("bad target function: {0}")]
    BadTargetFunction(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
