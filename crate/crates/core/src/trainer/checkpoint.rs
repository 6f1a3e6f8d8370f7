use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentNets};
use crate::env::{Dynamics, MazeSpec};
use crate::error::{Error, Result};
use crate::nn::{AdamState, Mlp};

pub const CHECKPOINT_VERSION: u32 = 1;

const NETWORKS: [&str; 7] = ["policy", "q1", "q2", "q1_target", "q2_target", "risk", "risk_target"];
const OPTIMIZERS: [&str; 4] = ["policy", "q1", "q2", "risk"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    /// Hash of the resolved run configuration.
    pub config_hash: String,
    /// Number of completed epochs.
    pub epoch: usize,
    pub seed: u64,
    pub env: String,
    pub dynamics: Dynamics,
    pub obs_dim: usize,
    pub act_dim: usize,
}

/// Serializable snapshot of an agent: every network, every optimizer and
/// enough metadata to check it against a maze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub metadata: CheckpointMeta,
    pub agent: AgentConfig,
    pub networks: BTreeMap<String, Mlp>,
    pub optimizers: BTreeMap<String, AdamState>,
}

impl Checkpoint {
    pub fn capture(nets: &AgentNets, maze: &MazeSpec, config_hash: &str, epoch: usize, seed: u64) -> Self {
        let networks = NETWORKS
            .iter()
            .zip([
                &nets.policy,
                &nets.q1,
                &nets.q2,
                &nets.q1_target,
                &nets.q2_target,
                &nets.risk,
                &nets.risk_target,
            ])
            .map(|(k, n)| (k.to_string(), n.clone()))
            .collect();
        let optimizers = OPTIMIZERS
            .iter()
            .zip([&nets.opt_policy, &nets.opt_q1, &nets.opt_q2, &nets.opt_risk])
            .map(|(k, o)| (k.to_string(), o.clone()))
            .collect();
        Self {
            metadata: CheckpointMeta {
                version: CHECKPOINT_VERSION,
                config_hash: config_hash.to_string(),
                epoch,
                seed,
                env: maze.name.clone(),
                dynamics: maze.dynamics,
                obs_dim: nets.config.obs_dim,
                act_dim: nets.config.act_dim,
            },
            agent: nets.config.clone(),
            networks,
            optimizers,
        }
    }

    /// Rebuilds the agent, checking that every network and optimizer is
    /// present and shaped as the agent config requires.
    pub fn restore(&self) -> Result<AgentNets> {
        if self.metadata.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!("unsupported checkpoint version {}", self.metadata.version)));
        }
        self.agent.validate()?;
        let net = |k: &str| {
            self.networks
                .get(k)
                .cloned()
                .ok_or_else(|| Error::config(format!("checkpoint lacks network '{k}'")))
        };
        let opt = |k: &str| {
            self.optimizers
                .get(k)
                .cloned()
                .ok_or_else(|| Error::config(format!("checkpoint lacks optimizer '{k}'")))
        };
        let nets = AgentNets {
            config: self.agent.clone(),
            policy: net("policy")?,
            q1: net("q1")?,
            q2: net("q2")?,
            q1_target: net("q1_target")?,
            q2_target: net("q2_target")?,
            risk: net("risk")?,
            risk_target: net("risk_target")?,
            opt_policy: opt("policy")?,
            opt_q1: opt("q1")?,
            opt_q2: opt("q2")?,
            opt_risk: opt("risk")?,
        };
        let c = &nets.config;
        let check = |name: &str, n: &Mlp, input: usize, out: usize| {
            if n.in_dim() == input && n.out_dim() == out {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "network '{name}' is {}->{}, expected {input}->{out}",
                    n.in_dim(),
                    n.out_dim()
                )))
            }
        };
        check("policy", &nets.policy, c.policy_in_dim(), 2 * c.act_dim)?;
        for (name, n) in [
            ("q1", &nets.q1),
            ("q2", &nets.q2),
            ("q1_target", &nets.q1_target),
            ("q2_target", &nets.q2_target),
            ("risk", &nets.risk),
            ("risk_target", &nets.risk_target),
        ] {
            check(name, n, c.critic_in_dim(), 1)?;
        }
        for (name, o, n) in [
            ("policy", &nets.opt_policy, &nets.policy),
            ("q1", &nets.opt_q1, &nets.q1),
            ("q2", &nets.opt_q2, &nets.q2),
            ("risk", &nets.opt_risk, &nets.risk),
        ] {
            if o.m.len() != n.num_params() || o.v.len() != n.num_params() {
                return Err(Error::config(format!("optimizer '{name}' does not match its network")));
            }
        }
        Ok(nets)
    }

    /// Errors unless the maze has the dynamics and encoding the agent was
    /// trained on.
    pub fn check_compatible(&self, maze: &MazeSpec) -> Result<()> {
        let m = &self.metadata;
        if m.dynamics != maze.dynamics || m.obs_dim != maze.obs_dim() || m.act_dim != maze.act_dim() {
            return Err(Error::config(format!(
                "checkpoint was trained with {:?} dynamics (obs {}), maze '{}' uses {:?} (obs {})",
                m.dynamics,
                m.obs_dim,
                maze.name,
                maze.dynamics,
                maze.obs_dim()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
