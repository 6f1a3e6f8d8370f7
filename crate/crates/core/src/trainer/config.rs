use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::env::{MazeSpec, StartMode};
use crate::error::{Error, Result};

/// Training hyperparameters. Every key is optional in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub env_steps_per_epoch: usize,
    pub grad_steps_per_epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    pub lambda_er: f64,
    /// Entropy temperature (fixed).
    pub alpha: f64,
    pub tau: f64,
    pub hidden: usize,
    pub buffer_capacity: usize,
    /// Uniformly random actions for this many initial environment steps.
    pub warmup_steps: usize,
    /// No gradient steps until the buffer holds this many transitions
    /// (and at least one batch).
    pub min_buffer: usize,
    /// Each training episode draws its risk bound uniformly from this range.
    pub delta_range: [f64; 2],
    /// Monte Carlo samples per immediate-risk label.
    pub risk_samples: usize,
    /// Overrides the maze's position uncertainty when set.
    pub sigma: Option<f64>,
    /// Overrides the maze's start mode for training episodes only.
    pub train_start_mode: Option<StartMode>,
    pub delta_in_critics: bool,
    /// Evaluate (and checkpoint) every this many epochs; 0 disables
    /// intermediate evaluation.
    pub eval_interval: usize,
    pub eval_deltas: Vec<f64>,
    pub eval_episodes: usize,
    pub eval_risk_rollouts: usize,
    pub eval_risk_samples: usize,
    /// Fill the wall-clock column of the log. Off by default so that logs
    /// are byte-for-byte reproducible.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 200,
            env_steps_per_epoch: 1000,
            grad_steps_per_epoch: 1000,
            batch_size: 256,
            lr: 3e-4,
            gamma: 0.99,
            lambda_er: 10.0,
            alpha: 0.2,
            tau: 0.005,
            hidden: 256,
            buffer_capacity: 1_000_000,
            warmup_steps: 1000,
            min_buffer: 1000,
            delta_range: [0.0, 1.0],
            risk_samples: 500,
            sigma: None,
            train_start_mode: None,
            delta_in_critics: true,
            eval_interval: 10,
            eval_deltas: vec![0.1, 0.2, 0.3],
            eval_episodes: 1,
            eval_risk_rollouts: 500,
            eval_risk_samples: 100,
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.delta_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::config(format!("delta_range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")));
        }
        if let Some(d) = self.eval_deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::config(format!("eval delta {d} outside [0, 1]")));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::config("batch_size must be positive and fit in the buffer"));
        }
        if self.risk_samples == 0 || self.eval_risk_samples == 0 || self.eval_risk_rollouts == 0 {
            return Err(Error::config("risk sample counts must be positive"));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config("sigma must be non-negative"));
            }
        }
        self.agent_config(2, 2).validate()
    }

    pub fn agent_config(&self, obs_dim: usize, act_dim: usize) -> AgentConfig {
        AgentConfig {
            obs_dim,
            act_dim,
            hidden: self.hidden,
            gamma: self.gamma,
            alpha: self.alpha,
            tau: self.tau,
            lr: self.lr,
            lambda_er: self.lambda_er,
            delta_in_critics: self.delta_in_critics,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = crate::env::spec::parse_by_extension(path, &text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }
}

/// Maze and training settings of one run, as written to `resolved.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub env: MazeSpec,
}

impl RunConfig {
    pub fn new(train: TrainConfig, env: MazeSpec) -> Result<Self> {
        train.validate()?;
        env.validate()?;
        Ok(Self { train, env })
    }

    /// Applies `key=value` overrides. Bare keys address the training
    /// config; `env.`-prefixed keys address the maze. Values are parsed as
    /// TOML literals, falling back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut train = toml::Table::try_from(&self.train).expect("train config serializes");
        let mut env = toml::Table::try_from(&self.env).expect("maze serializes");
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override '{raw}' is not key=value")))?;
            let (table, key) = match key.trim().strip_prefix("env.") {
                Some(k) => (&mut env, k),
                None => (&mut train, key.trim()),
            };
            set_dotted(table, key, parse_value(value.trim()))?;
        }
        let train: TrainConfig = train
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("override: {}", e.message())))?;
        let env: MazeSpec = env
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("override: {}", e.message())))?;
        Self::new(train, env)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = crate::env::spec::parse_by_extension(path, &text)?;
        Self::new(cfg.train, cfg.env)
    }

    /// Hex SHA-256 of the resolved TOML; stored in checkpoints.
    pub fn hash(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }

    /// The maze as trained on: the sigma override applied.
    pub fn effective_env(&self) -> MazeSpec {
        let mut env = self.env.clone();
        if let Some(s) = self.train.sigma {
            env.noise_sigma = s;
        }
        env
    }
}

fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
            Ok(())
        }
        Some((head, rest)) => {
            let entry = table
                .entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => set_dotted(t, rest, value),
                _ => Err(Error::config(format!("override key '{head}' is not a table"))),
            }
        }
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
