use serde::{Deserialize, Serialize};

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x: [x0, x1], y: [y0, y1] }
    }

    pub fn is_valid(&self) -> bool {
        self.x[0] < self.x[1] && self.y[0] < self.y[1] && self.iter().all(f64::is_finite)
    }

    fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().chain(self.y.iter()).copied()
    }

    /// Boundary points count as inside.
    #[inline]
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x[0] >= self.x[0] && other.x[1] <= self.x[1] && other.y[0] >= self.y[0] && other.y[1] <= self.y[1]
    }

    /// Euclidean distance from `p` to the rectangle; zero inside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let dx = (self.x[0] - p[0]).max(0.0).max(p[0] - self.x[1]);
        let dy = (self.y[0] - p[1]).max(0.0).max(p[1] - self.y[1]);
        dx.hypot(dy)
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.x[0], self.x[1]), p[1].clamp(self.y[0], self.y[1])]
    }

    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        self.y[1] - self.y[0]
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
