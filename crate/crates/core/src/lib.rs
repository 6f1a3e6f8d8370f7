//! Risk-conditioned soft actor critic for chance-constrained navigation.
//!
//! The policy takes the current state together with an upper bound `delta`
//! on execution risk (the probability of ever colliding before the horizon)
//! and is trained with an extra risk critic whose estimate is penalized when
//! it exceeds `delta`.

pub mod agent;
pub mod env;
mod error;
pub mod nn;
pub mod report;
pub mod risk;
pub mod selftest;
pub mod trainer;

pub use error::{Error, Result};
