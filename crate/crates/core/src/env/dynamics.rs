//! Agent state and the two Euler-integrated motion models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentState {
    Point { x: f64, y: f64 },
    /// `theta` in (-pi, pi], `v` in [0, v_max].
    Car { x: f64, y: f64, theta: f64, v: f64 },
}

impl AgentState {
    pub fn position(&self) -> [f64; 2] {
        match *self {
            AgentState::Point { x, y } | AgentState::Car { x, y, .. } => [x, y],
        }
    }

    pub fn with_position(self, p: [f64; 2]) -> Self {
        match self {
            AgentState::Point { .. } => AgentState::Point { x: p[0], y: p[1] },
            AgentState::Car { theta, v, .. } => AgentState::Car {
                x: p[0],
                y: p[1],
                theta,
                v,
            },
        }
    }

    /// `[x, y]` or `[x, y, theta, v]`.
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            AgentState::Point { x, y } => vec![x, y],
            AgentState::Car { x, y, theta, v } => vec![x, y, theta, v],
        }
    }

    pub fn from_slice(s: &[f64]) -> Option<Self> {
        match *s {
            [x, y] => Some(AgentState::Point { x, y }),
            [x, y, theta, v] => Some(AgentState::Car { x, y, theta, v }),
            _ => None,
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// `x += vx dt`, `y += vy dt`, then clamp to the bounds. The velocity is
/// expected to be already projected onto the admissible disk.
pub fn linear_step(pos: [f64; 2], velocity: [f64; 2], dt: f64, bounds: &Rect) -> [f64; 2] {
    bounds.clamp([pos[0] + velocity[0] * dt, pos[1] + velocity[1] * dt])
}

/// Euler step of the car: position from the current heading and speed, then
/// heading and speed from the controls `(turn_rate, accel)`.
pub fn dubins_step(
    state: (f64, f64, f64, f64),
    control: [f64; 2],
    dt: f64,
    v_max: f64,
    bounds: &Rect,
) -> (f64, f64, f64, f64) {
    let (x, y, theta, v) = state;
    let nx = x + v * theta.cos() * dt;
    let ny = y + v * theta.sin() * dt;
    let ntheta = wrap_angle(theta + control[0] * dt);
    let nv = (v + control[1] * dt).clamp(0.0, v_max);
    let p = bounds.clamp([nx, ny]);
    (p[0], p[1], ntheta, nv)
}
