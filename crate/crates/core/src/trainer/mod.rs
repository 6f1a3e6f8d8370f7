//! Training loop, evaluation, checkpoints and seeded random streams.

mod checkpoint;
mod config;
mod eval;
mod streams;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use config::{RunConfig, TrainConfig};
pub use eval::{evaluate, evaluate_checkpoint, DeltaSummary, EpisodeTrace, EvalConfig, Evaluation};
pub use streams::Streams;

use crate::agent::{
    update_step, ActionMode, AgentNets, Batch, Diagnostics, ReplayBuffer, RiskBound, Transition, UpdateOutcome,
};
use crate::env::DoneReason;
use crate::error::{Error, Result};
use crate::risk::immediate_risk_mc;

pub const LOG_HEADER: &str =
    "epoch,q_loss,risk_loss,policy_loss,mean_q,mean_risk_estimate,eval_steps,eval_distance,eval_exec_risk,wall_time_s";

/// One row of the training log. Losses are means over the epoch's gradient
/// steps (absent when none ran); evaluation columns are filled on
/// evaluation epochs only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogRow {
    pub epoch: usize,
    pub diagnostics: Option<Diagnostics>,
    pub eval_steps: Option<f64>,
    pub eval_distance: Option<f64>,
    pub eval_exec_risk: Option<f64>,
    pub wall_time_s: Option<f64>,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        let d = self.diagnostics;
        let cols = [
            d.map(|d| d.q_loss),
            d.map(|d| d.risk_loss),
            d.map(|d| d.policy_loss),
            d.map(|d| d.mean_q),
            d.map(|d| d.mean_risk),
            self.eval_steps,
            self.eval_distance,
            self.eval_exec_risk,
            self.wall_time_s,
        ];
        let mut line = self.epoch.to_string();
        for c in cols {
            line.push(',');
            if let Some(v) = c {
                write!(line, "{v}").expect("writing to a string");
            }
        }
        line
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Result of a completed training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub nets: AgentNets,
    pub log: Vec<LogRow>,
    pub checkpoint: Checkpoint,
    /// Evaluation after the last epoch, if any epochs ran.
    pub final_eval: Option<Evaluation>,
}

/// Contents of `nan_dump.json`, written when training goes non-finite.
#[derive(Debug, Serialize)]
struct NanDump<'a> {
    epoch: usize,
    grad_step: usize,
    detail: &'a str,
    diagnostics: Option<[f64; 5]>,
    batch_obs: Vec<Vec<f64>>,
    batch_action: Vec<Vec<f64>>,
    batch_reward: Vec<f64>,
    batch_risk: Vec<f64>,
    batch_delta: Vec<f64>,
}

/// Trains a risk-conditioned agent.
///
/// Every episode draws its own risk bound; every environment step labels
/// the current state with a Monte Carlo immediate risk. When `out` is set,
/// `checkpoint.json` and `log.csv` are rewritten at every evaluation epoch
/// and at the end. `on_epoch` sees each log row as it is produced.
pub fn train(run: &RunConfig, out: Option<&Path>, mut on_epoch: impl FnMut(&LogRow)) -> Result<TrainOutcome> {
    let cfg = &run.train;
    cfg.validate()?;
    let maze = run.effective_env();
    maze.validate()?;
    let hash = run.hash();
    let streams = Streams::new(cfg.seed);
    let clock = Instant::now();

    let mut nets = AgentNets::new(cfg.agent_config(maze.obs_dim(), maze.act_dim()), &mut streams.named("init"))?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut env_rng = streams.named("env");
    let mut policy_rng = streams.named("policy");
    let mut buffer_rng = streams.named("buffer");
    let mut delta_rng = streams.named("delta");
    let start_mode = cfg.train_start_mode.unwrap_or(maze.start_mode);
    let eval_cfg = EvalConfig {
        deltas: cfg.eval_deltas.clone(),
        episodes: cfg.eval_episodes.max(1),
        risk_rollouts: cfg.eval_risk_rollouts,
        risk_samples: cfg.eval_risk_samples,
        trace_samples: cfg.risk_samples,
        record_timing: false,
    };
    let draw_delta = |rng: &mut rand_chacha::ChaCha8Rng| {
        let [lo, hi] = cfg.delta_range;
        let d = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        RiskBound::new(d).expect("range validated")
    };

    let mut state = maze.reset(start_mode, &mut env_rng)?;
    let mut delta = draw_delta(&mut delta_rng);
    let mut t = 0usize;
    let mut env_step = 0u64;
    let mut grad_step = 0usize;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut final_eval = None;

    let save = |nets: &AgentNets, epoch: usize, log: &[LogRow]| -> Result<Checkpoint> {
        let ckpt = Checkpoint::capture(nets, &maze, &hash, epoch, cfg.seed);
        if let Some(dir) = out {
            ckpt.save(&dir.join("checkpoint.json"))?;
            write_file(&dir.join("log.csv"), &log_csv(log))?;
        }
        Ok(ckpt)
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut checkpoint = save(&nets, 0, &log)?;

    for epoch in 1..=cfg.epochs {
        for _ in 0..cfg.env_steps_per_epoch {
            let obs = maze.observe(&state);
            let action: Vec<f64> = if (env_step as usize) < cfg.warmup_steps {
                (0..maze.act_dim()).map(|_| policy_rng.random_range(-1.0..1.0)).collect()
            } else {
                nets.select_action(&obs, delta, ActionMode::Stochastic, &mut policy_rng)?
            };
            let r_b = immediate_risk_mc(
                &maze,
                state.position(),
                maze.noise_sigma,
                cfg.risk_samples,
                &mut streams.indexed("risk", env_step),
            );
            let step = maze.step_with_noise(&state, &action, t, &mut env_rng);
            buffer.push(Transition {
                obs,
                action,
                reward: step.reward,
                risk: r_b,
                delta,
                next_obs: maze.observe(&step.next_state),
                // Timeouts are not terminal: the state itself carries no
                // clock, so the bootstrap continues through them.
                done: step.done_reason == Some(DoneReason::Goal),
            });
            env_step += 1;
            if step.done {
                state = maze.reset(start_mode, &mut env_rng)?;
                delta = draw_delta(&mut delta_rng);
                t = 0;
            } else {
                state = step.next_state;
                t += 1;
            }
        }

        let mut sum = Diagnostics::default();
        let mut n_updates = 0usize;
        if buffer.len() >= cfg.min_buffer.max(cfg.batch_size) {
            for _ in 0..cfg.grad_steps_per_epoch {
                grad_step += 1;
                if let UpdateOutcome::Updated { diagnostics, batch } =
                    update_step(&mut nets, &buffer, cfg.batch_size, &mut buffer_rng)
                {
                    if !diagnostics.is_finite() || !nets.is_finite() {
                        return Err(nan_abort(out, epoch, grad_step, Some(&diagnostics), &batch));
                    }
                    sum.q_loss += diagnostics.q_loss;
                    sum.risk_loss += diagnostics.risk_loss;
                    sum.policy_loss += diagnostics.policy_loss;
                    sum.mean_q += diagnostics.mean_q;
                    sum.mean_risk += diagnostics.mean_risk;
                    n_updates += 1;
                }
            }
        }
        let diagnostics = (n_updates > 0).then(|| {
            let k = n_updates as f64;
            Diagnostics {
                q_loss: sum.q_loss / k,
                risk_loss: sum.risk_loss / k,
                policy_loss: sum.policy_loss / k,
                mean_q: sum.mean_q / k,
                mean_risk: sum.mean_risk / k,
            }
        });

        let last = epoch == cfg.epochs;
        let eval_now = last || (cfg.eval_interval > 0 && epoch % cfg.eval_interval == 0);
        let mut row = LogRow {
            epoch,
            diagnostics,
            wall_time_s: cfg.record_timing.then(|| clock.elapsed().as_secs_f64()),
            ..Default::default()
        };
        if eval_now {
            let e = evaluate(&nets, &maze, &eval_cfg, &streams)?;
            row.eval_steps = Some(e.mean_over_deltas(|s| s.mean_steps));
            row.eval_distance = Some(e.mean_over_deltas(|s| s.mean_distance));
            row.eval_exec_risk = Some(e.mean_over_deltas(|s| s.mean_exec_risk));
            final_eval = Some(e);
        }
        on_epoch(&row);
        log.push(row);
        if eval_now {
            checkpoint = save(&nets, epoch, &log)?;
        }
    }

    Ok(TrainOutcome {
        nets,
        log,
        checkpoint,
        final_eval,
    })
}

fn nan_abort(out: Option<&Path>, epoch: usize, grad_step: usize, d: Option<&Diagnostics>, batch: &Batch) -> Error {
    let detail = match d {
        Some(d) if !d.is_finite() => format!("non-finite loss at gradient step {grad_step}: {d:?}"),
        _ => format!("non-finite network parameters after gradient step {grad_step}"),
    };
    let rows = |a: &ndarray::Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let dump = NanDump {
        epoch,
        grad_step,
        detail: &detail,
        diagnostics: d.map(|d| [d.q_loss, d.risk_loss, d.policy_loss, d.mean_q, d.mean_risk]),
        batch_obs: rows(&batch.obs),
        batch_action: rows(&batch.action),
        batch_reward: batch.reward.to_vec(),
        batch_risk: batch.risk.to_vec(),
        batch_delta: batch.delta.to_vec(),
    };
    let path: Option<PathBuf> = out.and_then(|dir| {
        let p = dir.join("nan_dump.json");
        // serde_json writes non-finite floats as null, so the dump itself
        // cannot fail on the values that triggered it.
        let text = serde_json::to_string_pretty(&dump).ok()?;
        std::fs::write(&p, text).ok()?;
        Some(p)
    });
    Error::Numerical {
        epoch,
        detail,
        dump: path,
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
