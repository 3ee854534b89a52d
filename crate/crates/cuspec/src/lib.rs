//! Spectral machinery for magnetic Laplacians on weighted graphs:
//! holonomy and gauge equivalence, graph products, and discrete-cusp
//! constructions with eigenvalue asymptotics at finite truncation.

pub mod cusp;
pub mod document;
pub mod error;
pub mod graph;
pub mod magnetic;
pub mod operators;
pub mod phase;
pub mod products;

pub use error::{Error, Result};
pub use graph::WeightedGraph;
pub use magnetic::MagneticPotential;
pub use operators::{HermitianOperator, Spectrum};
pub use phase::Phase;
