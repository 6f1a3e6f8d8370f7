//! Risk-conditioned SAC agent: networks, replay, losses and the update step.

mod buffer;
mod losses;
mod nets;
mod update;

pub use buffer::{ReplayBuffer, RiskBound, Transition};
pub use losses::{policy_loss, q_loss, risk_critic_loss, Batch, PolicyLoss, QLoss, RiskLoss};
pub use nets::{normal_noise, ActionMode, AgentConfig, AgentNets};
pub use update::{update_step, Diagnostics, UpdateOutcome};
