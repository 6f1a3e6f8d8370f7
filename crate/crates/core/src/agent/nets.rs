use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::buffer::RiskBound;
use crate::error::{Error, Result};
use crate::nn::{sample_squashed_gaussian, AdamState, GaussianHead, Mlp, OutputActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: usize,
    pub gamma: f64,
    /// Entropy temperature.
    pub alpha: f64,
    pub tau: f64,
    pub lr: f64,
    pub lambda_er: f64,
    /// Feed the risk bound to the Q and risk critics as well as the policy.
    pub delta_in_critics: bool,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.act_dim == 0 || self.hidden == 0 {
            return Err(Error::config("agent dimensions must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma must lie in (0, 1]"));
        }
        if !(self.alpha >= 0.0 && self.lr > 0.0 && self.lambda_er >= 0.0) {
            return Err(Error::config("alpha, lr and lambda_er must be non-negative (lr positive)"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config("tau must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn policy_in_dim(&self) -> usize {
        self.obs_dim + 1
    }

    pub fn critic_in_dim(&self) -> usize {
        self.obs_dim + self.act_dim + usize::from(self.delta_in_critics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Policy, twin soft-Q critics, risk critic, their targets and optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNets {
    pub config: AgentConfig,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    /// Sigmoid head, so estimates stay in (0, 1).
    pub risk: Mlp,
    pub risk_target: Mlp,
    pub opt_policy: AdamState,
    pub opt_q1: AdamState,
    pub opt_q2: AdamState,
    pub opt_risk: AdamState,
}

impl AgentNets {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let policy = Mlp::three_layer(config.policy_in_dim(), h, 2 * config.act_dim, OutputActivation::Linear, rng)?;
        let q1 = Mlp::three_layer(config.critic_in_dim(), h, 1, OutputActivation::Linear, rng)?;
        let q2 = Mlp::three_layer(config.critic_in_dim(), h, 1, OutputActivation::Linear, rng)?;
        let risk = Mlp::three_layer(config.critic_in_dim(), h, 1, OutputActivation::Sigmoid, rng)?;
        Ok(Self {
            opt_policy: AdamState::for_net(&policy),
            opt_q1: AdamState::for_net(&q1),
            opt_q2: AdamState::for_net(&q2),
            opt_risk: AdamState::for_net(&risk),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            risk_target: risk.clone(),
            policy,
            q1,
            q2,
            risk,
            config,
        })
    }

    /// Rows of `[obs | delta]`.
    pub fn policy_input(&self, obs: ArrayView2<f64>, delta: ArrayView1<f64>) -> Array2<f64> {
        let d = delta.insert_axis(Axis(1));
        concatenate![Axis(1), obs, d]
    }

    /// Rows of `[obs | action | delta]`, or `[obs | action]` when the critics
    /// ignore the bound.
    pub fn critic_input(&self, obs: ArrayView2<f64>, action: ArrayView2<f64>, delta: ArrayView1<f64>) -> Array2<f64> {
        if self.config.delta_in_critics {
            let d = delta.insert_axis(Axis(1));
            concatenate![Axis(1), obs, action, d]
        } else {
            concatenate![Axis(1), obs, action]
        }
    }

    pub fn policy_head(&self, obs: &[f64], delta: RiskBound) -> Result<GaussianHead> {
        let mut input = obs.to_vec();
        input.push(delta.value());
        Ok(GaussianHead::from_raw(&self.policy.forward(&input)?))
    }

    /// Normalized action in (-1, 1)^d; the environment maps it to controls.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        delta: RiskBound,
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let head = self.policy_head(obs, delta)?;
        Ok(match mode {
            ActionMode::Deterministic => head.deterministic_action(),
            ActionMode::Stochastic => {
                let noise: Vec<f64> = (0..head.dim()).map(|_| StandardNormal.sample(rng)).collect();
                sample_squashed_gaussian(&head, &noise).0
            }
        })
    }

    /// `tanh` of the policy mean: the action used for evaluation.
    pub fn deterministic_action(&self, obs: &[f64], delta: RiskBound) -> Result<Vec<f64>> {
        Ok(self.policy_head(obs, delta)?.deterministic_action())
    }

    pub fn q_value(&self, obs: &[f64], action: &[f64], delta: RiskBound) -> Result<(f64, f64)> {
        let x = self.single_critic_input(obs, action, delta);
        Ok((self.q1.forward(&x)?[0], self.q2.forward(&x)?[0]))
    }

    pub fn risk_value(&self, obs: &[f64], action: &[f64], delta: RiskBound) -> Result<f64> {
        let x = self.single_critic_input(obs, action, delta);
        Ok(self.risk.forward(&x)?[0])
    }

    fn single_critic_input(&self, obs: &[f64], action: &[f64], delta: RiskBound) -> Vec<f64> {
        let mut x = obs.to_vec();
        x.extend_from_slice(action);
        if self.config.delta_in_critics {
            x.push(delta.value());
        }
        x
    }

    pub fn is_finite(&self) -> bool {
        [&self.policy, &self.q1, &self.q2, &self.q1_target, &self.q2_target, &self.risk, &self.risk_target]
            .iter()
            .all(|n| n.is_finite())
    }
}

/// Draws an `(n, d)` matrix of standard-normal noise.
pub fn normal_noise<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(rng))
}

pub(crate) fn column(values: &Array1<f64>) -> Array2<f64> {
    values.clone().insert_axis(Axis(1))
}
