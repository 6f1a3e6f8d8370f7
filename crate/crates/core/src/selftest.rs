//! Built-in property suites that check the risk and learning machinery
//! against independent oracles: brute-force enumeration, closed-form
//! Gaussian probabilities, numerical integration and finite differences.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::agent::{normal_noise, policy_loss, q_loss, risk_critic_loss, AgentConfig, AgentNets, Batch, RiskBound, Transition};
use crate::env::{Dynamics, MazeSpec, Rect};
use crate::nn::{sample_squashed_gaussian, GaussianHead, Mlp};
use crate::risk::{execution_risk_exact, execution_risk_sum_approx, immediate_risk_mc};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Recursion,
    SumBound,
    MonteCarlo,
    Density,
    Gradients,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Recursion,
        Suite::SumBound,
        Suite::MonteCarlo,
        Suite::Density,
        Suite::Gradients,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Recursion => "recursion",
            Suite::SumBound => "sum-bound",
            Suite::MonteCarlo => "monte-carlo",
            Suite::Density => "density",
            Suite::Gradients => "gradients",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Deliberate defects for checking that the suites catch real bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the continuation term of the risk recursion.
    RecursionSign,
}

impl Fault {
    pub fn from_name(name: &str) -> Option<Self> {
        (name == "recursion-sign").then_some(Fault::RecursionSign)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    /// First failing case, if any.
    pub failure: Option<String>,
    pub elapsed_s: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn run(suites: &[Suite], faults: &[Fault]) -> Vec<SuiteReport> {
    suites.iter().map(|&s| run_suite(s, faults)).collect()
}

pub fn run_suite(suite: Suite, faults: &[Fault]) -> SuiteReport {
    let clock = Instant::now();
    let (cases, failure) = match suite {
        Suite::Recursion => recursion_suite(faults.contains(&Fault::RecursionSign)),
        Suite::SumBound => sum_bound_suite(),
        Suite::MonteCarlo => monte_carlo_suite(),
        Suite::Density => density_suite(),
        Suite::Gradients => gradient_suite(),
    };
    SuiteReport {
        suite,
        cases,
        failure,
        elapsed_s: clock.elapsed().as_secs_f64(),
    }
}

/// Probability of at least one failure, summed over all `2^T` outcome
/// paths of independent per-step failures.
pub fn brute_force_execution_risk(seq: &[f64]) -> f64 {
    assert!(seq.len() <= 20, "enumeration is exponential");
    let mut total = 0.0;
    for mask in 0u32..(1 << seq.len()) {
        if mask == 0 {
            continue;
        }
        let p: f64 = seq
            .iter()
            .enumerate()
            .map(|(i, &r)| if mask >> i & 1 == 1 { r } else { 1.0 - r })
            .product();
        total += p;
    }
    total
}

fn faulty_recursion(seq: &[f64]) -> f64 {
    seq.iter().rev().fold(0.0, |er_next, &r| r - (1.0 - r) * er_next)
}

fn random_sequence(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..1.0),
        })
        .collect()
}

fn recursion_suite(inject_sign_fault: bool) -> (usize, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let cases = 1000;
    for case in 0..cases {
        let len = rng.random_range(1..=10);
        let seq = random_sequence(&mut rng, len);
        let got = if inject_sign_fault {
            faulty_recursion(&seq)
        } else {
            match execution_risk_exact(&seq) {
                Ok(v) => v,
                Err(e) => return (case + 1, Some(format!("case {case}: {e}"))),
            }
        };
        let want = brute_force_execution_risk(&seq);
        if (got - want).abs() > 1e-12 {
            return (case + 1, Some(format!("case {case}: seq {seq:?} recursion {got} enumeration {want}")));
        }
    }
    (cases, None)
}

fn sum_bound_suite() -> (usize, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let cases = 10_000;
    for case in 0..cases {
        let len = rng.random_range(1..=20);
        let mut seq = random_sequence(&mut rng, len);
        // Keep single-nonzero sequences common so equality is exercised.
        if rng.random_bool(0.3) {
            let keep = rng.random_range(0..len);
            for (i, r) in seq.iter_mut().enumerate() {
                if i != keep {
                    *r = 0.0;
                }
            }
        }
        let exact = execution_risk_exact(&seq).expect("valid probabilities");
        let approx = execution_risk_sum_approx(&seq);
        let nonzero = seq.iter().filter(|&&r| r > 0.0).count();
        if approx < exact {
            return (case + 1, Some(format!("case {case}: sum {approx} below exact {exact} for {seq:?}")));
        }
        if (approx == exact) != (nonzero <= 1) {
            return (
                case + 1,
                Some(format!("case {case}: equality {} with {nonzero} nonzero entries in {seq:?}", approx == exact)),
            );
        }
    }
    (cases, None)
}

/// Closed-form probability that `N(center, sigma^2 I)` lands in `rect`.
pub fn gaussian_rect_probability(center: [f64; 2], sigma: f64, rect: &Rect) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let axis = |c: f64, [lo, hi]: [f64; 2]| n.cdf((hi - c) / sigma) - n.cdf((lo - c) / sigma);
    axis(center[0], rect.x) * axis(center[1], rect.y)
}

fn monte_carlo_suite() -> (usize, Option<String>) {
    let rect = Rect::new(4.0, 6.0, 4.0, 6.0);
    let maze = MazeSpec {
        name: "mc-check".into(),
        dynamics: Dynamics::Linear,
        bounds: Rect::new(0.0, 10.0, 0.0, 10.0),
        obstacles: vec![rect],
        start: vec![1.0, 1.0],
        start_mode: Default::default(),
        goal: [9.0, 9.0],
        goal_radius: 0.5,
        horizon: 10,
        dt: 1.0,
        noise_sigma: 1.0,
        noise_in_transition: false,
        reward: Default::default(),
        limits: Default::default(),
    };
    let want = gaussian_rect_probability([5.0, 5.0], 1.0, &rect);
    let reps = 100;
    let mut misses = Vec::new();
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0300 + rep as u64);
        let got = immediate_risk_mc(&maze, [5.0, 5.0], 1.0, 10_000, &mut rng);
        if (got - want).abs() > 0.015 {
            misses.push(format!("rep {rep}: {got} vs {want}"));
        }
    }
    let failure = (misses.len() > 1).then(|| format!("{} of {reps} outside 0.015: {}", misses.len(), misses[0]));
    (reps, failure)
}

/// Midpoint-rule integral of the 1-D squashed-Gaussian density over (-1, 1).
pub fn squashed_density_mass(mean: f64, log_std: f64, points: usize) -> f64 {
    let head = GaussianHead::new(vec![mean], vec![log_std]);
    let width = 2.0 / points as f64;
    (0..points)
        .map(|k| {
            let a: f64 = -1.0 + (k as f64 + 0.5) * width;
            let noise = (a.atanh() - mean) / log_std.exp();
            sample_squashed_gaussian(&head, &[noise]).1.exp() * width
        })
        .sum()
}

fn density_suite() -> (usize, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0004);
    let cases = 10;
    for case in 0..cases {
        let mean = rng.random_range(-0.5..0.5);
        let log_std = rng.random_range(-1.5..0.0);
        let mass = squashed_density_mass(mean, log_std, 10_000);
        if (mass - 1.0).abs() > 1e-3 {
            return (case + 1, Some(format!("mean {mean} log_std {log_std}: mass {mass}")));
        }
    }
    (cases, None)
}

/// Which objective a gradient check differentiates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradCase {
    /// Twin soft-Q loss, w.r.t. both critics.
    QLoss,
    RiskLoss,
    /// Actor loss with the given penalty weight and a batch-wide bound.
    PolicyLoss { lambda_er: f64, delta: f64 },
}

impl GradCase {
    pub const STANDARD: [GradCase; 6] = [
        GradCase::QLoss,
        GradCase::RiskLoss,
        GradCase::PolicyLoss { lambda_er: 0.0, delta: 0.0 },
        GradCase::PolicyLoss { lambda_er: 0.0, delta: 1.0 },
        // The risk estimate is a sigmoid in (0, 1): delta = 0 makes every
        // penalty term active, delta = 1 makes every one inactive.
        GradCase::PolicyLoss { lambda_er: 10.0, delta: 0.0 },
        GradCase::PolicyLoss { lambda_er: 10.0, delta: 1.0 },
    ];
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` at `x`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn with_params(net: &Mlp, flat: &[f64]) -> Mlp {
    let mut n = net.clone();
    n.set_flat(flat).expect("same parameter count");
    n
}

/// Relative error between the analytic gradient of `case` and central
/// differences, on width-8 networks built from `seed`.
pub fn gradient_check(case: GradCase, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = AgentConfig {
        obs_dim: 2,
        act_dim: 2,
        hidden: 8,
        gamma: 0.99,
        alpha: 0.2,
        tau: 0.005,
        lr: 3e-4,
        lambda_er: 10.0,
        delta_in_critics: true,
    };
    let mut nets = AgentNets::new(config, &mut rng).expect("valid config");
    // Distinct targets so the bootstrap terms are not copies of the
    // networks being differentiated.
    let other = AgentNets::new(nets.config.clone(), &mut rng).expect("valid config");
    nets.q1_target = other.q1;
    nets.q2_target = other.q2;
    nets.risk_target = other.risk;

    let fixed_delta = match case {
        GradCase::PolicyLoss { delta, .. } => Some(delta),
        _ => None,
    };
    let n = 8;
    let items: Vec<Transition> = (0..n)
        .map(|_| Transition {
            obs: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            action: vec![rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)],
            reward: rng.random_range(-1.0..1.0),
            risk: rng.random_range(0.0..0.5),
            delta: RiskBound::new(fixed_delta.unwrap_or_else(|| rng.random_range(0.0..1.0))).expect("in range"),
            next_obs: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            done: rng.random_bool(0.25),
        })
        .collect();
    let batch = Batch::from_transitions(&items.iter().collect::<Vec<_>>());
    let noise = normal_noise(n, 2, &mut rng);
    let h = 1e-5;

    match case {
        GradCase::QLoss => {
            let q = q_loss(&nets, &batch, &noise);
            let mut analytic = q.grads_q1.flatten();
            analytic.extend(q.grads_q2.flatten());
            let mut x = nets.q1.flatten();
            let split = x.len();
            x.extend(nets.q2.flatten());
            let numeric = central_differences(
                |p| {
                    let mut m = nets.clone();
                    m.q1 = with_params(&nets.q1, &p[..split]);
                    m.q2 = with_params(&nets.q2, &p[split..]);
                    q_loss(&m, &batch, &noise).loss
                },
                &x,
                h,
            );
            relative_error(&analytic, &numeric)
        }
        GradCase::RiskLoss => {
            let analytic = risk_critic_loss(&nets, &batch, &noise).grads.flatten();
            let numeric = central_differences(
                |p| {
                    let mut m = nets.clone();
                    m.risk = with_params(&nets.risk, p);
                    risk_critic_loss(&m, &batch, &noise).loss
                },
                &nets.risk.flatten(),
                h,
            );
            relative_error(&analytic, &numeric)
        }
        GradCase::PolicyLoss { lambda_er, .. } => {
            let analytic = policy_loss(&nets, &batch, lambda_er, &noise).grads.flatten();
            let numeric = central_differences(
                |p| {
                    let mut m = nets.clone();
                    m.policy = with_params(&nets.policy, p);
                    policy_loss(&m, &batch, lambda_er, &noise).loss
                },
                &nets.policy.flatten(),
                h,
            );
            relative_error(&analytic, &numeric)
        }
    }
}

fn gradient_suite() -> (usize, Option<String>) {
    let mut cases = 0;
    for case in GradCase::STANDARD {
        for seed in 0..20 {
            cases += 1;
            let err = gradient_check(case, 0x5EED_0500 + seed);
            if !(err <= 1e-4) {
                return (cases, Some(format!("{case:?} seed {seed}: relative error {err:.3e}")));
            }
        }
    }
    (cases, None)
}
