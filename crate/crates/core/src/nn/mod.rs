//! Minimal network engine: MLPs, Adam, the squashed-Gaussian head and
//! Polyak averaging.

pub mod adam;
pub mod gaussian;
pub mod mlp;

pub use adam::AdamState;
pub use gaussian::{sample_squashed_gaussian, GaussianHead, SquashedBatch};
pub use mlp::{polyak_update, Dense, ForwardCache, Mlp, MlpGrads, OutputActivation};
