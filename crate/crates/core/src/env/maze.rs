use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dynamics::{dubins_step, linear_step, AgentState};
use super::geometry::dist;
use super::spec::{Dynamics, MazeSpec, StartMode};
use crate::error::{Error, Result};

const MAX_START_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoneReason {
    Goal,
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: AgentState,
    pub reward: f64,
    pub done: bool,
    pub done_reason: Option<DoneReason>,
}

impl MazeSpec {
    pub fn in_collision(&self, p: [f64; 2]) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Distance to the nearest obstacle (infinite in an empty maze).
    pub fn clearance(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn goal_reached(&self, p: [f64; 2]) -> bool {
        dist(p, self.goal) <= self.goal_radius
    }

    /// Step cost, distance cost of the move, plus the bonus when `next`
    /// lands in the goal disk.
    pub fn reward(&self, prev: &AgentState, next: &AgentState) -> f64 {
        let bonus = if self.goal_reached(next.position()) {
            self.reward.goal_bonus
        } else {
            0.0
        };
        let moved = dist(prev.position(), next.position());
        bonus - self.reward.step_cost - self.reward.distance_cost * moved
    }

    pub fn start_state(&self) -> AgentState {
        let s = &self.start;
        match self.dynamics {
            Dynamics::Linear => AgentState::Point { x: s[0], y: s[1] },
            Dynamics::Dubins => AgentState::Car {
                x: s[0],
                y: s[1],
                theta: s.get(2).copied().unwrap_or(0.0),
                v: s.get(3).copied().unwrap_or(0.0).clamp(0.0, self.limits.v_max),
            },
        }
    }

    /// Initial state for an episode. `UniformFree` rejection-samples a
    /// collision-free point (and a uniform heading for the car).
    pub fn reset<R: Rng + ?Sized>(&self, mode: StartMode, rng: &mut R) -> Result<AgentState> {
        match mode {
            StartMode::Fixed => Ok(self.start_state()),
            StartMode::UniformFree => {
                let b = &self.bounds;
                for _ in 0..MAX_START_TRIES {
                    let p = [rng.random_range(b.x[0]..=b.x[1]), rng.random_range(b.y[0]..=b.y[1])];
                    if self.in_collision(p) || self.goal_reached(p) {
                        continue;
                    }
                    return Ok(match self.dynamics {
                        Dynamics::Linear => AgentState::Point { x: p[0], y: p[1] },
                        Dynamics::Dubins => AgentState::Car {
                            x: p[0],
                            y: p[1],
                            theta: super::dynamics::wrap_angle(
                                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                            ),
                            v: 0.0,
                        },
                    });
                }
                Err(Error::Config(format!(
                    "maze '{}': no free start found in {MAX_START_TRIES} tries",
                    self.name
                )))
            }
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self.dynamics {
            Dynamics::Linear => 2,
            Dynamics::Dubins => 5,
        }
    }

    pub fn act_dim(&self) -> usize {
        2
    }

    /// Network features: position scaled to [-1, 1]; the car adds
    /// `cos(theta)`, `sin(theta)` and `v / v_max`.
    pub fn observe(&self, s: &AgentState) -> Vec<f64> {
        let b = &self.bounds;
        let [x, y] = s.position();
        let nx = 2.0 * (x - b.x[0]) / b.width() - 1.0;
        let ny = 2.0 * (y - b.y[0]) / b.height() - 1.0;
        match *s {
            AgentState::Point { .. } => vec![nx, ny],
            AgentState::Car { theta, v, .. } => {
                vec![nx, ny, theta.cos(), theta.sin(), v / self.limits.v_max]
            }
        }
    }

    /// Maps a normalized policy action in [-1, 1]^2 to physical controls.
    ///
    /// Linear: radial rescale onto the unit disk, times `v_max`.
    /// Dubins: per-axis scaling to `(turn_rate, accel)`.
    pub fn project_action(&self, raw: &[f64]) -> [f64; 2] {
        assert_eq!(raw.len(), 2, "actions are two-dimensional");
        let a = [raw[0].clamp(-1.0, 1.0), raw[1].clamp(-1.0, 1.0)];
        match self.dynamics {
            Dynamics::Linear => {
                let norm = a[0].hypot(a[1]);
                let k = if norm > 1.0 { 1.0 / norm } else { 1.0 };
                [a[0] * k * self.limits.v_max, a[1] * k * self.limits.v_max]
            }
            Dynamics::Dubins => [a[0] * self.limits.turn_rate_max, a[1] * self.limits.accel_max],
        }
    }

    /// Deterministic transition for a normalized action.
    pub fn transition(&self, s: &AgentState, raw: &[f64]) -> AgentState {
        let u = self.project_action(raw);
        match *s {
            AgentState::Point { x, y } => {
                let p = linear_step([x, y], u, self.dt, &self.bounds);
                AgentState::Point { x: p[0], y: p[1] }
            }
            AgentState::Car { x, y, theta, v } => {
                let (x, y, theta, v) =
                    dubins_step((x, y, theta, v), u, self.dt, self.limits.v_max, &self.bounds);
                AgentState::Car { x, y, theta, v }
            }
        }
    }

    /// Advances from `s`, which was reached after `t` steps.
    pub fn step(&self, s: &AgentState, raw: &[f64], t: usize) -> StepResult {
        let next_state = self.transition(s, raw);
        self.finish_step(s, next_state, t)
    }

    /// Like [`MazeSpec::step`], additionally perturbing the position with the
    /// configured Gaussian noise when `noise_in_transition` is set.
    pub fn step_with_noise<R: Rng + ?Sized>(
        &self,
        s: &AgentState,
        raw: &[f64],
        t: usize,
        rng: &mut R,
    ) -> StepResult {
        let mut next_state = self.transition(s, raw);
        if self.noise_in_transition && self.noise_sigma > 0.0 {
            let p = next_state.position();
            let dx: f64 = StandardNormal.sample(rng);
            let dy: f64 = StandardNormal.sample(rng);
            let moved = [p[0] + self.noise_sigma * dx, p[1] + self.noise_sigma * dy];
            next_state = next_state.with_position(self.bounds.clamp(moved));
        }
        self.finish_step(s, next_state, t)
    }

    fn finish_step(&self, s: &AgentState, next_state: AgentState, t: usize) -> StepResult {
        let reward = self.reward(s, &next_state);
        let done_reason = if self.goal_reached(next_state.position()) {
            Some(DoneReason::Goal)
        } else if t + 1 >= self.horizon {
            Some(DoneReason::Horizon)
        } else {
            None
        };
        StepResult {
            next_state,
            reward,
            done: done_reason.is_some(),
            done_reason,
        }
    }
}

/// Visited states, actions and rewards of one deterministic rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// `states[0]` is the start; one more entry than `actions`.
    pub states: Vec<AgentState>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done_reason: DoneReason,
}

impl MazeSpec {
    /// Runs `policy` from `start` until the goal or the horizon.
    pub fn rollout<P>(&self, start: AgentState, policy: P) -> Rollout
    where
        P: Fn(&AgentState) -> Vec<f64>,
    {
        let mut states = vec![start];
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let mut s = start;
        for t in 0..self.horizon {
            let a = policy(&s);
            let r = self.step(&s, &a, t);
            actions.push(a);
            rewards.push(r.reward);
            states.push(r.next_state);
            s = r.next_state;
            if let Some(reason) = r.done_reason {
                return Rollout {
                    states,
                    actions,
                    rewards,
                    done_reason: reason,
                };
            }
        }
        unreachable!("step reports the horizon before the loop ends")
    }
}
