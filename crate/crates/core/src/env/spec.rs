//! Maze description and its config-file form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::Rect;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    /// Single integrator: the action is a planar velocity.
    Linear,
    /// Car with heading and speed, driven by turn rate and acceleration.
    Dubins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    #[default]
    Fixed,
    UniformFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub step_cost: f64,
    pub goal_bonus: f64,
    /// Cost per metre travelled; zero leaves a pure time-to-goal reward.
    pub distance_cost: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            step_cost: 1.0,
            goal_bonus: 100.0,
            distance_cost: 0.0,
        }
    }
}

/// Actuation limits. `v_max` bounds the speed in both dynamics modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub v_max: f64,
    /// rad/s
    pub turn_rate_max: f64,
    /// m/s^2
    pub accel_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            turn_rate_max: 1.0,
            accel_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeSpec {
    pub name: String,
    pub dynamics: Dynamics,
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    /// `[x, y]`, or `[x, y, heading, speed]` for Dubins (heading and speed
    /// default to zero).
    pub start: Vec<f64>,
    #[serde(default)]
    pub start_mode: StartMode,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub horizon: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Per-axis standard deviation of the position uncertainty (m).
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_in_transition: bool,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub limits: Limits,
}

fn default_dt() -> f64 {
    1.0
}

fn default_sigma() -> f64 {
    1.0
}

impl MazeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("maze '{}': {m}", self.name)));
        if !self.bounds.is_valid() {
            return bad("bounds must be a non-empty finite rectangle".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.is_valid() {
                return bad(format!("obstacle {i} is empty or non-finite"));
            }
            if !self.bounds.contains_rect(o) {
                return bad(format!("obstacle {i} leaves the maze bounds"));
            }
            if o.contains(self.goal) {
                return bad(format!("goal lies inside obstacle {i}"));
            }
        }
        if !self.bounds.contains(self.goal) {
            return bad("goal lies outside the bounds".into());
        }
        if !(self.goal_radius > 0.0 && self.goal_radius.is_finite()) {
            return bad("goal_radius must be positive".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative".into());
        }
        let l = &self.limits;
        if !(l.v_max > 0.0 && l.turn_rate_max > 0.0 && l.accel_max > 0.0) {
            return bad("limits must be positive".into());
        }
        let want = match self.dynamics {
            Dynamics::Linear => &[2][..],
            Dynamics::Dubins => &[2, 4][..],
        };
        if !want.contains(&self.start.len()) {
            return bad(format!("start has {} entries", self.start.len()));
        }
        if !self.bounds.contains([self.start[0], self.start[1]]) {
            return bad("start lies outside the bounds".into());
        }
        Ok(())
    }

    /// Reads a maze from TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: MazeSpec = parse_by_extension(path, &text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("maze spec serializes")
    }

    /// Obstacle between start and goal; the maze used for the linear-dynamics
    /// experiments.
    pub fn one_obstacle() -> Self {
        Self {
            name: "OneObstacle".into(),
            dynamics: Dynamics::Linear,
            bounds: Rect::new(0.0, 10.0, 0.0, 10.0),
            obstacles: vec![Rect::new(4.0, 6.0, 3.0, 7.0)],
            start: vec![1.0, 5.0],
            start_mode: StartMode::Fixed,
            goal: [9.0, 5.0],
            goal_radius: 0.5,
            horizon: 50,
            dt: 1.0,
            noise_sigma: 1.0,
            noise_in_transition: false,
            reward: RewardConfig::default(),
            limits: Limits::default(),
        }
    }

    /// Two rooms split by a wall at x in [4.5, 5.5] with doors at y in [2, 3]
    /// and [7, 8]; driven with Dubins dynamics.
    pub fn two_rooms() -> Self {
        Self {
            name: "TwoRooms".into(),
            dynamics: Dynamics::Dubins,
            bounds: Rect::new(0.0, 10.0, 0.0, 10.0),
            obstacles: vec![
                Rect::new(4.5, 5.5, 0.0, 2.0),
                Rect::new(4.5, 5.5, 3.0, 7.0),
                Rect::new(4.5, 5.5, 8.0, 10.0),
            ],
            start: vec![1.5, 5.0, 0.0, 0.0],
            start_mode: StartMode::Fixed,
            goal: [8.5, 5.0],
            goal_radius: 0.5,
            horizon: 80,
            dt: 1.0,
            noise_sigma: 1.0,
            noise_in_transition: false,
            reward: RewardConfig::default(),
            limits: Limits::default(),
        }
    }

    /// 20 m square with a U-shaped trap around the goal that opens upward.
    pub fn fly_trap_big() -> Self {
        Self {
            name: "FlyTrapBig".into(),
            dynamics: Dynamics::Linear,
            bounds: Rect::new(0.0, 20.0, 0.0, 20.0),
            obstacles: vec![
                Rect::new(7.0, 8.0, 7.0, 13.0),
                Rect::new(12.0, 13.0, 7.0, 13.0),
                Rect::new(7.0, 13.0, 7.0, 8.0),
            ],
            start: vec![2.0, 2.0],
            start_mode: StartMode::UniformFree,
            goal: [10.0, 10.0],
            goal_radius: 0.5,
            horizon: 200,
            dt: 1.0,
            noise_sigma: 1.0,
            noise_in_transition: false,
            reward: RewardConfig::default(),
            limits: Limits::default(),
        }
    }
}

pub(crate) fn parse_by_extension<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(text).map_err(|e| parse_err(e.to_string())),
        Some("toml") => toml::from_str(text).map_err(|e| parse_err(e.to_string())),
        other => Err(parse_err(format!(
            "unsupported extension {other:?}; expected .toml or .json"
        ))),
    }
}
