//! Immediate risk, execution risk and their Monte Carlo estimators.
//!
//! Immediate risk `r_b(s)` is the probability that the true position, drawn
//! from `N(position(s), sigma^2 I)`, lies inside an obstacle. Execution risk
//! over a trajectory follows the backward recursion
//! `er_t = r_t + (1 - r_t) * er_{t+1}` with `er_T = r_T`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{AgentState, MazeSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMethod {
    ExactRecursion,
    SumApprox,
    MonteCarlo,
}

/// An execution-risk value tagged with how it was obtained. Only
/// `SumApprox` may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRisk {
    pub er: f64,
    pub method: RiskMethod,
}

/// Fraction of `n_samples` Gaussian perturbations of `pos` that collide.
/// With `sigma == 0` this is the collision indicator of `pos` itself.
pub fn immediate_risk_mc<R: Rng + ?Sized>(
    maze: &MazeSpec,
    pos: [f64; 2],
    sigma: f64,
    n_samples: usize,
    rng: &mut R,
) -> f64 {
    assert!(n_samples >= 1, "need at least one sample");
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if maze.obstacles.is_empty() {
        return 0.0;
    }
    if sigma == 0.0 {
        return if maze.in_collision(pos) { 1.0 } else { 0.0 };
    }
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        if maze.in_collision([pos[0] + sigma * dx, pos[1] + sigma * dy]) {
            hits += 1;
        }
    }
    hits as f64 / n_samples as f64
}

fn check_probabilities(seq: &[f64]) -> Result<()> {
    match seq.iter().position(|r| !(0.0..=1.0).contains(r)) {
        Some(i) => Err(Error::Domain(format!(
            "immediate risk at step {i} is {} (must lie in [0, 1])",
            seq[i]
        ))),
        None => Ok(()),
    }
}

/// Exact execution risk of a single trajectory's immediate-risk sequence.
pub fn execution_risk_exact(seq: &[f64]) -> Result<f64> {
    check_probabilities(seq)?;
    Ok(seq.iter().rev().fold(0.0, |er_next, &r| r + (1.0 - r) * er_next))
}

/// Union-bound approximation: the plain, unclamped sum.
pub fn execution_risk_sum_approx(seq: &[f64]) -> f64 {
    seq.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutRiskMode {
    /// Exact recursion over per-state Monte Carlo immediate risks of the
    /// nominal rollout.
    #[default]
    ExactOverNominal,
    /// Perturb every visited state once and flag the rollout if any
    /// perturbed state collides.
    RolloutFlags,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutRiskConfig {
    pub n_rollouts: usize,
    pub sigma: f64,
    /// Samples per state for `ExactOverNominal`.
    pub n_samples: usize,
    pub mode: RolloutRiskMode,
}

/// Monte Carlo execution risk of a deterministic policy.
///
/// Each rollout draws from its own stream so results do not depend on how
/// rollouts are scheduled across threads.
pub fn policy_execution_risk_mc<P, R>(
    maze: &MazeSpec,
    policy: P,
    cfg: &RolloutRiskConfig,
    rng: &mut R,
) -> Result<f64>
where
    P: Fn(&AgentState) -> Vec<f64> + Sync,
    R: RngCore + ?Sized,
{
    assert!(cfg.n_rollouts >= 1, "need at least one rollout");
    let base = rng.next_u64();
    let per_rollout: Vec<Result<f64>> = (0..cfg.n_rollouts)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(base);
            r.set_stream(i as u64);
            let start = maze.reset(maze.start_mode, &mut r)?;
            let states = maze.rollout(start, &policy).states;
            rollout_risk(maze, &states, cfg, &mut r)
        })
        .collect();
    let mut total = 0.0;
    for v in per_rollout {
        total += v?;
    }
    Ok(total / cfg.n_rollouts as f64)
}

/// Mean of `cfg.n_rollouts` independent risk estimates of one fixed
/// visited-state sequence (the nominal path of a deterministic policy).
pub fn trajectory_execution_risk_mc<R: RngCore + ?Sized>(
    maze: &MazeSpec,
    states: &[AgentState],
    cfg: &RolloutRiskConfig,
    rng: &mut R,
) -> Result<f64> {
    assert!(cfg.n_rollouts >= 1, "need at least one rollout");
    let base = rng.next_u64();
    let per_rollout: Vec<Result<f64>> = (0..cfg.n_rollouts)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(base);
            r.set_stream(i as u64);
            rollout_risk(maze, states, cfg, &mut r)
        })
        .collect();
    let mut total = 0.0;
    for v in per_rollout {
        total += v?;
    }
    Ok(total / cfg.n_rollouts as f64)
}

/// Risk of one visited-state sequence under the chosen mode.
pub fn rollout_risk<R: Rng + ?Sized>(
    maze: &MazeSpec,
    states: &[AgentState],
    cfg: &RolloutRiskConfig,
    rng: &mut R,
) -> Result<f64> {
    match cfg.mode {
        RolloutRiskMode::ExactOverNominal => {
            let rb: Vec<f64> = states
                .iter()
                .map(|s| immediate_risk_mc(maze, s.position(), cfg.sigma, cfg.n_samples, rng))
                .collect();
            execution_risk_exact(&rb)
        }
        RolloutRiskMode::RolloutFlags => {
            let mut unsafe_rollout = false;
            for s in states {
                // One perturbation per state, drawn even after a hit so the
                // stream consumption does not depend on the outcome.
                unsafe_rollout |= immediate_risk_mc(maze, s.position(), cfg.sigma, 1, rng) > 0.0;
            }
            Ok(if unsafe_rollout { 1.0 } else { 0.0 })
        }
    }
}
