//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary
//! (no libtest harness) and exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use risk_sac::agent::{AgentNets, RiskBound};
use risk_sac::env::MazeSpec;
use risk_sac::selftest::{self, Suite};
use risk_sac::trainer::{self, EvalConfig, Evaluation, RunConfig, Streams, TrainConfig, TrainOutcome};

const BOUNDS: [f64; 3] = [0.1, 0.2, 0.3];
const RISK_SLACK: f64 = 0.05;
const DISTANCE_SLACK: f64 = 0.3;
const RISK_SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    passed: bool,
    detail: String,
}

fn pass_if(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn cfg_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cfg")
}

fn desk_run(maze_file: &str, overrides: &[String]) -> RunConfig {
    let maze = MazeSpec::load(&cfg_dir().join(maze_file)).expect("maze config");
    let train = TrainConfig::load(&cfg_dir().join("desk.toml")).expect("desk config");
    RunConfig::new(train, maze)
        .expect("valid run")
        .with_overrides(overrides)
        .expect("valid overrides")
}

fn train_quiet(run: &RunConfig) -> TrainOutcome {
    trainer::train(run, None, |_| {}).expect("training succeeds")
}

fn eval_bounds(nets: &AgentNets, run: &RunConfig, deltas: &[f64]) -> Evaluation {
    let cfg = EvalConfig {
        deltas: deltas.to_vec(),
        episodes: 1,
        risk_rollouts: 500,
        ..Default::default()
    };
    trainer::evaluate(nets, &run.effective_env(), &cfg, &Streams::new(run.train.seed)).expect("evaluation")
}

fn suite(s: Suite, budget_s: f64) -> Outcome {
    let r = selftest::run_suite(s, &[]);
    let in_time = r.elapsed_s < budget_s;
    pass_if(
        r.passed() && in_time,
        format!(
            "{} cases, {:.2}s (budget {budget_s}s){}",
            r.cases,
            r.elapsed_s,
            r.failure.map(|f| format!(", first failure: {f}")).unwrap_or_default()
        ),
    )
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn criterion_6() -> Outcome {
    let clock = Instant::now();
    let run = desk_run("one_obstacle.toml", &["lambda_er=0".into(), "seed=11".into()]);
    let out = train_quiet(&run);
    // Twenty deterministic episodes, one per bound spread over the training
    // range (the bound is an input even when it carries no penalty).
    let deltas: Vec<f64> = (0..20).map(|i| 0.05 + 0.45 * i as f64 / 19.0).collect();
    let eval = eval_bounds(&out.nets, &run, &deltas);
    let reached = eval.traces.iter().filter(|t| t.reached_goal).count();
    let mean_steps = eval.traces.iter().map(|t| t.steps as f64).sum::<f64>() / 20.0;
    let elapsed = clock.elapsed();
    pass_if(
        reached >= 18 && elapsed <= Duration::from_secs(15 * 60),
        format!(
            "goal reached in {reached}/20 episodes (mean {mean_steps:.1} steps), hidden {}, {} epochs, {:.0}s",
            run.train.hidden,
            run.train.epochs,
            elapsed.as_secs_f64()
        ),
    )
}

struct RiskRun {
    seed: u64,
    risks: Vec<f64>,
    distances: Vec<f64>,
    clearances: Vec<f64>,
}

impl RiskRun {
    fn within_bound(&self) -> usize {
        self.risks.iter().zip(BOUNDS).filter(|(r, d)| **r <= d + RISK_SLACK).count()
    }

    fn distance_nonincreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] <= w[0] + DISTANCE_SLACK)
    }

    fn clearance_nonincreasing(&self) -> bool {
        self.clearances.windows(2).all(|w| w[1] <= w[0])
    }

    fn describe(&self) -> String {
        format!(
            "seed {}: risk [{}] dist [{}] clearance [{}]",
            self.seed,
            fmt_list(&self.risks),
            fmt_list(&self.distances),
            fmt_list(&self.clearances)
        )
    }
}

fn risk_run(seed: u64) -> RiskRun {
    let run = desk_run("one_obstacle.toml", &[format!("seed={seed}")]);
    let out = train_quiet(&run);
    let eval = eval_bounds(&out.nets, &run, &BOUNDS);
    RiskRun {
        seed,
        risks: eval.summaries.iter().map(|s| s.mean_exec_risk).collect(),
        distances: eval.summaries.iter().map(|s| s.mean_distance).collect(),
        clearances: eval.summaries.iter().map(|s| s.mean_min_clearance).collect(),
    }
}

/// Trains risk-conditioned agents lazily, one seed at a time, so later
/// seeds are only paid for when a criterion needs them.
struct RiskRuns {
    runs: Vec<RiskRun>,
    train_time: Duration,
}

impl RiskRuns {
    fn get(&mut self, i: usize) -> &RiskRun {
        while self.runs.len() <= i {
            let clock = Instant::now();
            self.runs.push(risk_run(RISK_SEEDS[self.runs.len()]));
            self.train_time += clock.elapsed();
        }
        &self.runs[i]
    }
}

fn criterion_7(runs: &mut RiskRuns) -> Outcome {
    let first = runs.get(0);
    let first_ok = first.within_bound() >= 2;
    let distance_ok = first.distance_nonincreasing();
    let mut lines = vec![first.describe()];
    let mut best = first.within_bound();
    let mut i = 1;
    while best < 3 && i < RISK_SEEDS.len() {
        let r = runs.get(i);
        lines.push(r.describe());
        best = best.max(r.within_bound());
        i += 1;
    }
    let in_time = runs.train_time <= Duration::from_secs(45 * 60);
    pass_if(
        first_ok && best == 3 && distance_ok && in_time,
        format!(
            "first seed {}/3 within bound+{RISK_SLACK}, best {best}/3, distance nonincreasing (slack {DISTANCE_SLACK} m): {distance_ok}, training {:.0}s; {}",
            runs.runs[0].within_bound(),
            runs.train_time.as_secs_f64(),
            lines.join("; ")
        ),
    )
}

fn criterion_8(runs: &mut RiskRuns) -> Outcome {
    let first = runs.get(0);
    if first.clearance_nonincreasing() {
        return pass_if(true, first.describe());
    }
    let first_desc = first.describe();
    let second = runs.get(1);
    pass_if(
        second.clearance_nonincreasing(),
        format!("first seed not monotone ({first_desc}); re-test {}", second.describe()),
    )
}

fn criterion_9() -> Outcome {
    let clock = Instant::now();
    let run = desk_run("two_rooms_wide.toml", &["seed=5".into()]);
    let out = train_quiet(&run);
    let eval = eval_bounds(&out.nets, &run, &BOUNDS);
    let risks: Vec<f64> = eval.summaries.iter().map(|s| s.mean_exec_risk).collect();
    let goals: Vec<f64> = eval.summaries.iter().map(|s| s.goal_rate).collect();
    let dists: Vec<f64> = eval.summaries.iter().map(|s| s.mean_distance).collect();
    let ok = risks.iter().zip(BOUNDS).filter(|(r, d)| **r < d + RISK_SLACK).count();
    pass_if(
        ok >= 2,
        format!(
            "{ok}/3 bounds below delta+{RISK_SLACK}; risk [{}] goal [{}] dist [{}], {} epochs, {:.0}s",
            fmt_list(&risks),
            fmt_list(&goals),
            fmt_list(&dists),
            run.train.epochs,
            clock.elapsed().as_secs_f64()
        ),
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_risk-sac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let env = cfg_dir().join("one_obstacle.toml");
    let train = cfg_dir().join("desk.toml");
    let mut logs = Vec::new();
    let mut sweeps = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = out.to_str().expect("utf-8 path");
        let r = cli(&[
            "train",
            "--env",
            env.to_str().expect("utf-8 path"),
            "--train",
            train.to_str().expect("utf-8 path"),
            "--seed",
            "7",
            "--out",
            o,
            "--override",
            "epochs=15",
            "--override",
            "eval_interval=5",
        ]);
        if !r.status.success() {
            return pass_if(false, format!("train failed: {}", String::from_utf8_lossy(&r.stderr)));
        }
        let ckpt = out.join("checkpoint.json");
        let r = cli(&[
            "sweep",
            "--checkpoint",
            ckpt.to_str().expect("utf-8 path"),
            "--deltas",
            "0.1,0.2,0.3",
            "--seed",
            "3",
            "--out",
            o,
        ]);
        if !r.status.success() {
            return pass_if(false, format!("sweep failed: {}", String::from_utf8_lossy(&r.stderr)));
        }
        logs.push(std::fs::read(out.join("log.csv")).expect("log.csv"));
        sweeps.push(std::fs::read(out.join("sweep.csv")).expect("sweep.csv"));
    }
    pass_if(
        logs[0] == logs[1] && sweeps[0] == sweeps[1],
        format!(
            "log.csv identical: {} ({} bytes), sweep.csv identical: {} ({} bytes)",
            logs[0] == logs[1],
            logs[0].len(),
            sweeps[0] == sweeps[1],
            sweeps[0].len()
        ),
    )
}

fn criterion_11() -> Outcome {
    let cfg = TrainConfig {
        hidden: 256,
        ..Default::default()
    };
    let maze = MazeSpec::one_obstacle();
    let nets = AgentNets::new(
        cfg.agent_config(maze.obs_dim(), maze.act_dim()),
        &mut Streams::new(0).named("init"),
    )
    .expect("agent");
    let delta = RiskBound::new(0.2).expect("bound");
    let obs = maze.observe(&maze.start_state());
    for _ in 0..100 {
        std::hint::black_box(nets.deterministic_action(&obs, delta).expect("forward"));
    }
    let n = 5000;
    let clock = Instant::now();
    for _ in 0..n {
        std::hint::black_box(nets.deterministic_action(std::hint::black_box(&obs), delta).expect("forward"));
    }
    let per_step = clock.elapsed().as_secs_f64() / n as f64;
    pass_if(per_step <= 1e-3, format!("{:.1} us per deterministic forward pass (width 256)", per_step * 1e6))
}

fn main() {
    // libtest flags (e.g. from `cargo test -- --nocapture`) are ignored.
    let mut runs = RiskRuns {
        runs: Vec::new(),
        train_time: Duration::ZERO,
    };
    type Check<'a> = Box<dyn FnMut() -> Outcome + 'a>;
    let mut results = Vec::new();
    {
        let runs = std::cell::RefCell::new(&mut runs);
        let criteria: Vec<(&str, Check)> = vec![
            ("execution-risk recursion vs brute-force enumeration", Box::new(|| suite(Suite::Recursion, 5.0))),
            ("sum approximation bounds exact risk", Box::new(|| suite(Suite::SumBound, 5.0))),
            ("Monte Carlo immediate risk vs analytic", Box::new(|| suite(Suite::MonteCarlo, 30.0))),
            ("loss gradients vs central differences", Box::new(|| suite(Suite::Gradients, 60.0))),
            ("squashed-Gaussian density normalization", Box::new(|| suite(Suite::Density, 5.0))),
            ("SAC baseline reaches the goal", Box::new(criterion_6)),
            ("risk bounding on OneObstacle", Box::new(|| criterion_7(&mut runs.borrow_mut()))),
            ("clearance monotone in the risk bound", Box::new(|| criterion_8(&mut runs.borrow_mut()))),
            ("Dubins risk bounding on TwoRooms", Box::new(criterion_9)),
            ("seeded CLI runs are byte-identical", Box::new(criterion_10)),
            ("inference latency", Box::new(criterion_11)),
        ];
        for (i, (name, mut check)) in criteria.into_iter().enumerate() {
            let clock = Instant::now();
            let o = check();
            let status = if o.passed { "PASS" } else { "FAIL" };
            println!(
                "criterion {:>2} {status}  {name} [{:.1}s]: {}",
                i + 1,
                clock.elapsed().as_secs_f64(),
                o.detail
            );
            results.push(o.passed);
        }
    }
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
