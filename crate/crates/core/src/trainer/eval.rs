use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::streams::Streams;
use crate::agent::{AgentNets, RiskBound};
use crate::env::{geometry::dist, DoneReason, MazeSpec};
use crate::error::{Error, Result};
use crate::risk::{
    execution_risk_exact, immediate_risk_mc, trajectory_execution_risk_mc, RolloutRiskConfig, RolloutRiskMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub deltas: Vec<f64>,
    pub episodes: usize,
    /// Independent execution-risk estimates averaged per episode.
    pub risk_rollouts: usize,
    /// Samples per state inside each of those estimates.
    pub risk_samples: usize,
    /// Samples per state for the immediate risks recorded in traces.
    pub trace_samples: usize,
    pub record_timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.1, 0.2, 0.3],
            episodes: 1,
            risk_rollouts: 500,
            risk_samples: 100,
            trace_samples: 500,
            record_timing: false,
        }
    }
}

/// One deterministic evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub delta: f64,
    pub episode: usize,
    /// `[x, y]` or `[x, y, theta, v]` per visited state, start included.
    pub states: Vec<Vec<f64>>,
    /// Normalized policy actions, one fewer than states.
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Immediate risk of every visited state.
    pub r_b: Vec<f64>,
    /// Exact recursion over `r_b`.
    pub exec_risk: f64,
    /// Averaged Monte Carlo execution risk of the path.
    pub mc_exec_risk: f64,
    pub steps: usize,
    /// Path length (m).
    pub distance: f64,
    pub reached_goal: bool,
    pub min_clearance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_s: Option<f64>,
}

/// Per-bound means over the evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub delta: f64,
    pub episodes: usize,
    pub goal_rate: f64,
    pub mean_steps: f64,
    pub mean_distance: f64,
    pub mean_exec_risk: f64,
    pub std_exec_risk: f64,
    pub mean_min_clearance: f64,
    /// Mean wall-clock seconds of policy inference per episode.
    pub time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summaries: Vec<DeltaSummary>,
    pub traces: Vec<EpisodeTrace>,
}

impl Evaluation {
    pub fn mean_over_deltas(&self, f: impl Fn(&DeltaSummary) -> f64) -> f64 {
        if self.summaries.is_empty() {
            return f64::NAN;
        }
        self.summaries.iter().map(f).sum::<f64>() / self.summaries.len() as f64
    }
}

/// Rolls out the deterministic policy for every bound in `cfg.deltas` and
/// estimates each path's execution risk. Starts are shared across bounds so
/// that bounds are compared on the same episodes.
pub fn evaluate(nets: &AgentNets, maze: &MazeSpec, cfg: &EvalConfig, streams: &Streams) -> Result<Evaluation> {
    if nets.config.obs_dim != maze.obs_dim() || nets.config.act_dim != maze.act_dim() {
        return Err(Error::config(format!(
            "agent expects obs {} / act {}, maze '{}' provides {} / {}",
            nets.config.obs_dim,
            nets.config.act_dim,
            maze.name,
            maze.obs_dim(),
            maze.act_dim()
        )));
    }
    if cfg.episodes == 0 || cfg.risk_rollouts == 0 || cfg.risk_samples == 0 || cfg.trace_samples == 0 {
        return Err(Error::config("evaluation counts must be positive"));
    }
    let starts = (0..cfg.episodes)
        .map(|ep| maze.reset(maze.start_mode, &mut streams.indexed("eval-start", ep as u64)))
        .collect::<Result<Vec<_>>>()?;
    let risk_cfg = RolloutRiskConfig {
        n_rollouts: cfg.risk_rollouts,
        sigma: maze.noise_sigma,
        n_samples: cfg.risk_samples,
        mode: RolloutRiskMode::ExactOverNominal,
    };

    let mut summaries = Vec::with_capacity(cfg.deltas.len());
    let mut traces = Vec::with_capacity(cfg.deltas.len() * cfg.episodes);
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let bound = RiskBound::new(delta)?;
        let policy = |s: &crate::env::AgentState| {
            nets.deterministic_action(&maze.observe(s), bound)
                .expect("dimensions checked above")
        };
        let first = traces.len();
        for (ep, &start) in starts.iter().enumerate() {
            let key = (di * cfg.episodes + ep) as u64;
            let clock = Instant::now();
            let rollout = maze.rollout(start, policy);
            let elapsed = clock.elapsed().as_secs_f64();

            let mut rb_rng = streams.indexed("eval-rb", key);
            let r_b: Vec<f64> = rollout
                .states
                .iter()
                .map(|s| immediate_risk_mc(maze, s.position(), maze.noise_sigma, cfg.trace_samples, &mut rb_rng))
                .collect();
            let exec_risk = execution_risk_exact(&r_b)?;
            let mc_exec_risk =
                trajectory_execution_risk_mc(maze, &rollout.states, &risk_cfg, &mut streams.indexed("eval-risk", key))?;
            let positions: Vec<[f64; 2]> = rollout.states.iter().map(|s| s.position()).collect();
            traces.push(EpisodeTrace {
                delta,
                episode: ep,
                states: rollout.states.iter().map(|s| s.to_vec()).collect(),
                actions: rollout.actions.clone(),
                rewards: rollout.rewards.clone(),
                r_b,
                exec_risk,
                mc_exec_risk,
                steps: rollout.actions.len(),
                distance: positions.windows(2).map(|w| dist(w[0], w[1])).sum(),
                reached_goal: rollout.done_reason == DoneReason::Goal,
                min_clearance: positions.iter().map(|&p| maze.clearance(p)).fold(f64::INFINITY, f64::min),
                time_s: cfg.record_timing.then_some(elapsed),
            });
        }
        summaries.push(summarize(delta, &traces[first..]));
    }
    Ok(Evaluation { summaries, traces })
}

/// Loads the agent from a checkpoint after checking it fits the maze.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    maze: &MazeSpec,
    cfg: &EvalConfig,
    streams: &Streams,
) -> Result<Evaluation> {
    checkpoint.check_compatible(maze)?;
    evaluate(&checkpoint.restore()?, maze, cfg, streams)
}

fn summarize(delta: f64, traces: &[EpisodeTrace]) -> DeltaSummary {
    let n = traces.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeTrace) -> f64| traces.iter().map(f).sum::<f64>() / n;
    let mean_risk = mean(&|t| t.mc_exec_risk);
    let var = if traces.len() > 1 {
        traces.iter().map(|t| (t.mc_exec_risk - mean_risk).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let time_s = traces
        .iter()
        .map(|t| t.time_s)
        .collect::<Option<Vec<f64>>>()
        .map(|ts| ts.iter().sum::<f64>() / n);
    DeltaSummary {
        delta,
        episodes: traces.len(),
        goal_rate: mean(&|t| f64::from(u8::from(t.reached_goal))),
        mean_steps: mean(&|t| t.steps as f64),
        mean_distance: mean(&|t| t.distance),
        mean_exec_risk: mean_risk,
        std_exec_risk: var.sqrt(),
        mean_min_clearance: mean(&|t| t.min_clearance),
        time_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nets(obs_dim: usize) -> AgentNets {
        let cfg = AgentConfig {
            obs_dim,
            act_dim: 2,
            hidden: 8,
            gamma: 0.99,
            alpha: 0.2,
            tau: 0.005,
            lr: 3e-4,
            lambda_er: 10.0,
            delta_in_critics: true,
        };
        AgentNets::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    fn small() -> EvalConfig {
        EvalConfig {
            deltas: vec![0.1, 0.3],
            episodes: 2,
            risk_rollouts: 20,
            risk_samples: 50,
            trace_samples: 100,
            record_timing: false,
        }
    }

    #[test]
    fn untrained_agent_evaluates_reproducibly() {
        let maze = MazeSpec::one_obstacle();
        let a = evaluate(&nets(2), &maze, &small(), &Streams::new(3)).unwrap();
        let b = evaluate(&nets(2), &maze, &small(), &Streams::new(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summaries.len(), 2);
        assert_eq!(a.traces.len(), 4);
        for t in &a.traces {
            assert_eq!(t.states.len(), t.actions.len() + 1);
            assert_eq!(t.r_b.len(), t.states.len());
            assert!((0.0..=1.0).contains(&t.exec_risk));
            assert!(t.steps <= maze.horizon);
            assert!(t.time_s.is_none());
        }
    }

    #[test]
    fn trace_replays_through_dynamics() {
        let maze = MazeSpec::one_obstacle();
        let e = evaluate(&nets(2), &maze, &small(), &Streams::new(0)).unwrap();
        for t in &e.traces {
            let mut s = crate::env::AgentState::from_slice(&t.states[0]).unwrap();
            for (a, want) in t.actions.iter().zip(&t.states[1..]) {
                s = maze.transition(&s, a);
                assert_eq!(&s.to_vec(), want);
            }
        }
    }

    #[test]
    fn dynamics_mismatch_is_an_error() {
        let r = evaluate(&nets(2), &MazeSpec::two_rooms(), &small(), &Streams::new(0));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
