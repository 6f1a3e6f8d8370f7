//! Maze environments: geometry, linear and Dubins dynamics, reward and
//! episode bookkeeping.

pub mod dynamics;
pub mod geometry;
mod maze;
pub mod spec;

pub use dynamics::{wrap_angle, AgentState};
pub use geometry::Rect;
pub use maze::{DoneReason, Rollout, StepResult};
pub use spec::{Dynamics, Limits, MazeSpec, RewardConfig, StartMode};
