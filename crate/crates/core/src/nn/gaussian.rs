//! Tanh-squashed diagonal Gaussian used as the policy head.
//!
//! The network emits `[mean | log_std]`. Samples are reparameterized as
//! `u = mean + exp(log_std) * noise`, `a = tanh(u)`, and the log-density of
//! `a` includes the change-of-variables term `-sum log(1 - a^2 + eps)`.

use ndarray::{s, Array1, Array2, ArrayView2};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside the tanh log-determinant.
pub const TANH_EPS: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    /// Always within `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
}

impl GaussianHead {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len(), "mean/log_std length mismatch");
        let log_std = log_std.into_iter().map(clamp_log_std).collect();
        Self { mean, log_std }
    }

    /// Splits a raw `[mean | log_std]` network output.
    pub fn from_raw(raw: &[f64]) -> Self {
        assert!(raw.len() % 2 == 0, "raw head output must have even length");
        let d = raw.len() / 2;
        Self::new(raw[..d].to_vec(), raw[d..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Mode of the squashed distribution's pre-image, pushed through tanh.
    pub fn deterministic_action(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m.tanh()).collect()
    }
}

#[inline]
fn clamp_log_std(x: f64) -> f64 {
    x.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Draw from the squashed Gaussian given a standard-normal `noise` vector.
/// Returns the action in `(-1, 1)^d` and its log-density.
pub fn sample_squashed_gaussian(head: &GaussianHead, noise: &[f64]) -> (Vec<f64>, f64) {
    assert_eq!(noise.len(), head.dim(), "noise length mismatch");
    let mut log_prob = 0.0;
    let action = (0..head.dim())
        .map(|i| {
            let (a, lp) = squash_one(head.mean[i], head.log_std[i], noise[i]);
            log_prob += lp;
            a
        })
        .collect();
    (action, log_prob)
}

/// Returns `(tanh(u), log-density contribution)` for one coordinate.
#[inline]
fn squash_one(mean: f64, log_std: f64, noise: f64) -> (f64, f64) {
    // tanh rounds to exactly +-1 in f64 for |u| > ~19; keep the action open.
    const EDGE: f64 = 1.0 - f64::EPSILON;
    let u = mean + log_std.exp() * noise;
    let a = u.tanh().clamp(-EDGE, EDGE);
    let lp = -0.5 * noise * noise - log_std - HALF_LN_2PI - (1.0 - a * a + TANH_EPS).ln();
    (a, lp)
}

/// Batched squashed sample that remembers what its backward pass needs.
#[derive(Debug, Clone)]
pub struct SquashedBatch {
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
    noise: Array2<f64>,
    log_std: Array2<f64>,
    /// 1 where log_std was inside the clamp range, 0 where it was clipped.
    log_std_live: Array2<f64>,
}

impl SquashedBatch {
    /// `raw` rows are `[mean | log_std]`; `noise` rows are standard normal.
    pub fn sample(raw: ArrayView2<f64>, noise: ArrayView2<f64>) -> Self {
        let d = raw.ncols() / 2;
        assert_eq!(raw.ncols(), 2 * d, "raw head output must have even width");
        assert_eq!(noise.dim(), (raw.nrows(), d), "noise shape mismatch");
        let mean = raw.slice(s![.., ..d]);
        let raw_log_std = raw.slice(s![.., d..]);
        let log_std = raw_log_std.mapv(clamp_log_std);
        let log_std_live =
            raw_log_std.mapv(|x| if (LOG_STD_MIN..=LOG_STD_MAX).contains(&x) { 1.0 } else { 0.0 });
        let b = raw.nrows();
        let mut action = Array2::zeros((b, d));
        let mut log_prob = Array1::zeros(b);
        for r in 0..b {
            let mut lp = 0.0;
            for c in 0..d {
                let (a, l) = squash_one(mean[[r, c]], log_std[[r, c]], noise[[r, c]]);
                action[[r, c]] = a;
                lp += l;
            }
            log_prob[r] = lp;
        }
        Self {
            action,
            log_prob,
            noise: noise.to_owned(),
            log_std,
            log_std_live,
        }
    }

    /// Maps gradients w.r.t. the actions and log-densities back onto the raw
    /// `[mean | log_std]` head output.
    pub fn backward(&self, d_action: &Array2<f64>, d_log_prob: &Array1<f64>) -> Array2<f64> {
        let (b, d) = self.action.dim();
        assert_eq!(d_action.dim(), (b, d), "action gradient shape mismatch");
        assert_eq!(d_log_prob.len(), b, "log-prob gradient length mismatch");
        let mut d_raw = Array2::zeros((b, 2 * d));
        for r in 0..b {
            let gl = d_log_prob[r];
            for c in 0..d {
                let a = self.action[[r, c]];
                let one_minus = 1.0 - a * a;
                let du = d_action[[r, c]] * one_minus + gl * 2.0 * a * one_minus / (one_minus + TANH_EPS);
                let sigma = self.log_std[[r, c]].exp();
                d_raw[[r, c]] = du;
                d_raw[[r, d + c]] =
                    (du * sigma * self.noise[[r, c]] - gl) * self.log_std_live[[r, c]];
            }
        }
        d_raw
    }
}
