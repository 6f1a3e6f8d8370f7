//! `risk-sac`: train, evaluate and sweep risk-conditioned SAC agents, and
//! run the built-in oracle self-tests.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risk_sac::env::MazeSpec;
use risk_sac::report::{paths_svg, SweepReport, TracesFile};
use risk_sac::selftest::{self, Fault, Suite};
use risk_sac::trainer::{self, Checkpoint, EvalConfig, Evaluation, RunConfig, Streams, TrainConfig};
use risk_sac::Error;

#[derive(Parser, Debug)]
#[command(name = "risk-sac", version, about = "Risk-conditioned soft actor critic for chance-constrained navigation")]
struct Cli {
    /// Master seed (training seed, or evaluation seed for eval/sweep).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "runs/latest")]
    out: PathBuf,

    /// `key=value` config override; repeatable. `env.`-prefixed keys
    /// address the maze.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Record wall-clock columns (makes outputs non-reproducible).
    #[arg(long, global = true)]
    record_timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an agent; writes checkpoint.json, log.csv and resolved.toml.
    Train {
        /// Maze config (TOML or JSON).
        #[arg(long)]
        env: PathBuf,
        /// Training config (TOML or JSON); defaults apply when omitted.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Evaluate a checkpoint; prints the metrics table, writes traces.json.
    Eval(EvalArgs),
    /// Evaluate a list of risk bounds; writes sweep.csv, traces.json and
    /// paths.svg.
    Sweep(EvalArgs),
    /// Run the oracle property suites.
    Selftest {
        /// Restrict to these suites (recursion, sum-bound, monte-carlo,
        /// density, gradients).
        #[arg(long)]
        suite: Vec<String>,
        /// Inject a known defect to confirm the suites catch it.
        #[arg(long, value_name = "FAULT")]
        inject_fault: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Maze config, or a run's resolved.toml. Defaults to the resolved.toml
    /// next to the checkpoint.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Comma-separated risk bounds in [0, 1].
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3])]
    deltas: Vec<f64>,
    /// Episodes per bound.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Independent execution-risk estimates per episode.
    #[arg(long, default_value_t = 500)]
    risk_rollouts: usize,
}

enum Failure {
    Tests(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tests(msg)) => {
            eprintln!("self-test failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numerical { .. } => 3,
                _ => 2,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Train { env, train } => cmd_train(&cli, env, train.as_deref()),
        Command::Eval(args) => cmd_eval(&cli, args, false),
        Command::Sweep(args) => cmd_eval(&cli, args, true),
        Command::Selftest { suite, inject_fault } => cmd_selftest(suite, inject_fault),
    }
}

fn cmd_train(cli: &Cli, env: &Path, train: Option<&Path>) -> Result<(), Failure> {
    let maze = MazeSpec::load(env)?;
    let train_cfg = match train {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let mut run = RunConfig::new(train_cfg, maze)?.with_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        run.train.seed = seed;
    }
    run.train.record_timing |= cli.record_timing;

    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    write(&cli.out.join("resolved.toml"), &run.to_toml())?;
    println!(
        "training on '{}' for {} epochs (seed {}) -> {}",
        run.env.name,
        run.train.epochs,
        run.train.seed,
        cli.out.display()
    );
    let outcome = trainer::train(&run, Some(&cli.out), |row| {
        if let (Some(steps), Some(dist), Some(risk)) = (row.eval_steps, row.eval_distance, row.eval_exec_risk) {
            let q = row.diagnostics.map(|d| format!("{:.4}", d.q_loss)).unwrap_or_else(|| "-".into());
            println!(
                "epoch {:>5}  q_loss {q:>10}  eval steps {steps:>6.1}  distance {dist:>7.3}  exec risk {risk:.4}",
                row.epoch
            );
        }
    })?;
    println!(
        "done: checkpoint at epoch {} written to {}",
        outcome.checkpoint.metadata.epoch,
        cli.out.join("checkpoint.json").display()
    );
    Ok(())
}

fn load_eval_maze(args: &EvalArgs, overrides: &[String]) -> Result<MazeSpec, Error> {
    let path = match &args.env {
        Some(p) => p.clone(),
        None => args
            .checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("resolved.toml"),
    };
    // A run snapshot carries the sigma the agent was trained with.
    let maze = match RunConfig::load(&path) {
        Ok(run) => run.with_overrides(overrides)?.effective_env(),
        Err(Error::Io { .. }) if args.env.is_none() => {
            return Err(Error::Config(format!(
                "no --env given and {} does not exist",
                path.display()
            )))
        }
        Err(_) => {
            let maze = MazeSpec::load(&path)?;
            RunConfig::new(TrainConfig::default(), maze)?
                .with_overrides(overrides)?
                .env
        }
    };
    Ok(maze)
}

fn cmd_eval(cli: &Cli, args: &EvalArgs, sweep: bool) -> Result<(), Failure> {
    if let Some(d) = args.deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::Config(format!("risk bound {d} outside [0, 1]")).into());
    }
    if args.deltas.is_empty() || args.episodes == 0 || args.risk_rollouts == 0 {
        return Err(Error::Config("need at least one bound, episode and risk rollout".into()).into());
    }
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let maze = load_eval_maze(args, &cli.overrides)?;
    let seed = cli.seed.unwrap_or(ckpt.metadata.seed);
    let cfg = EvalConfig {
        deltas: args.deltas.clone(),
        episodes: args.episodes,
        risk_rollouts: args.risk_rollouts,
        record_timing: cli.record_timing,
        ..Default::default()
    };
    let eval: Evaluation = trainer::evaluate_checkpoint(&ckpt, &maze, &cfg, &Streams::new(seed))?;
    let report = SweepReport {
        env: maze.name.clone(),
        checkpoint: ckpt.metadata.config_hash.clone(),
        seed,
        rows: eval.summaries.clone(),
    };
    print!("{}", report.to_table());

    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    if sweep {
        write(&cli.out.join("sweep.csv"), &report.to_csv())?;
        write(&cli.out.join("paths.svg"), &paths_svg(&maze, &eval.traces))?;
    }
    write(&cli.out.join("traces.json"), &TracesFile::new(&maze, eval.traces).to_json())?;
    Ok(())
}

fn cmd_selftest(suites: &[String], faults: &[String]) -> Result<(), Failure> {
    let suites = if suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        suites
            .iter()
            .map(|s| Suite::from_name(s).ok_or_else(|| Error::Config(format!("unknown suite '{s}'"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    let faults = faults
        .iter()
        .map(|f| Fault::from_name(f).ok_or_else(|| Error::Config(format!("unknown fault '{f}'"))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut first_failure = None;
    for suite in suites {
        let r = selftest::run_suite(suite, &faults);
        let status = if r.passed() { "ok" } else { "FAILED" };
        println!("{:<12} {:>6} cases  {:>7.2}s  {status}", suite.name(), r.cases, r.elapsed_s);
        if let Some(msg) = r.failure {
            println!("  first failure: {msg}");
            first_failure.get_or_insert(format!("{}: {msg}", suite.name()));
        }
    }
    match first_failure {
        None => Ok(()),
        Some(msg) => Err(Failure::Tests(msg)),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
