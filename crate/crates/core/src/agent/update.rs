use rand::Rng;

use super::buffer::ReplayBuffer;
use super::losses::{policy_loss, q_loss, risk_critic_loss, Batch};
use super::nets::{normal_noise, AgentNets};
use crate::nn::polyak_update;

/// Scalars reported by one gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub q_loss: f64,
    pub risk_loss: f64,
    pub policy_loss: f64,
    pub mean_q: f64,
    pub mean_risk: f64,
}

impl Diagnostics {
    pub fn is_finite(&self) -> bool {
        [self.q_loss, self.risk_loss, self.policy_loss, self.mean_q, self.mean_risk]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    /// Not enough transitions stored for a batch.
    Skipped { stored: usize, needed: usize },
    Updated { diagnostics: Diagnostics, batch: Batch },
}

/// One gradient step on Q1, Q2, the risk critic and the policy (in that
/// order), followed by soft updates of the three target networks.
pub fn update_step<R: Rng + ?Sized>(
    nets: &mut AgentNets,
    buffer: &ReplayBuffer,
    batch_size: usize,
    rng: &mut R,
) -> UpdateOutcome {
    if buffer.is_empty() || buffer.len() < batch_size {
        return UpdateOutcome::Skipped {
            stored: buffer.len(),
            needed: batch_size,
        };
    }
    let items = buffer.sample(batch_size, rng).expect("buffer checked non-empty");
    let batch = Batch::from_transitions(&items);
    let d = nets.config.act_dim;
    let next_noise = normal_noise(batch_size, d, rng);
    let policy_noise = normal_noise(batch_size, d, rng);
    let lr = nets.config.lr;

    let q = q_loss(nets, &batch, &next_noise);
    nets.opt_q1.step(&mut nets.q1, &q.grads_q1, lr);
    nets.opt_q2.step(&mut nets.q2, &q.grads_q2, lr);

    let r = risk_critic_loss(nets, &batch, &next_noise);
    nets.opt_risk.step(&mut nets.risk, &r.grads, lr);

    let p = policy_loss(nets, &batch, nets.config.lambda_er, &policy_noise);
    nets.opt_policy.step(&mut nets.policy, &p.grads, lr);

    let tau = nets.config.tau;
    polyak_update(&mut nets.q1_target, &nets.q1, tau);
    polyak_update(&mut nets.q2_target, &nets.q2, tau);
    polyak_update(&mut nets.risk_target, &nets.risk, tau);

    UpdateOutcome::Updated {
        diagnostics: Diagnostics {
            q_loss: q.loss,
            risk_loss: r.loss,
            policy_loss: p.loss,
            mean_q: q.mean_q,
            mean_risk: r.mean_risk,
        },
        batch,
    }
}
