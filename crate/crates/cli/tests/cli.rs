//! Exit codes, output files and flag handling of the `risk-sac` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cfg(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cfg").join(name)
}

fn risk_sac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risk-sac")).args(args).output().expect("spawn risk-sac")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Tiny run so the binary finishes in well under a second of training.
const TINY: &[&str] = &[
    "--override", "epochs=2",
    "--override", "env_steps_per_epoch=40",
    "--override", "grad_steps_per_epoch=5",
    "--override", "batch_size=16",
    "--override", "hidden=8",
    "--override", "warmup_steps=20",
    "--override", "min_buffer=20",
    "--override", "risk_samples=20",
    "--override", "eval_interval=1",
    "--override", "eval_risk_rollouts=5",
    "--override", "eval_risk_samples=20",
];

fn train_tiny(out: &Path, extra: &[&str]) -> Output {
    let env = cfg("one_obstacle.toml");
    let mut args = vec!["train", "--env", env.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    risk_sac(&args)
}

#[test]
fn train_writes_checkpoint_log_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_tiny(dir.path(), &["--seed", "4", "--override", "lambda_er=0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["checkpoint.json", "log.csv", "resolved.toml"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let resolved = std::fs::read_to_string(dir.path().join("resolved.toml")).unwrap();
    assert!(resolved.contains("lambda_er = 0"), "{resolved}");
    assert!(resolved.contains("seed = 4"), "{resolved}");
    let log = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert!(log.starts_with("epoch,q_loss,"));
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn sweep_on_untrained_checkpoint_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_tiny(dir.path(), &["--override", "epochs=0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = dir.path().join("checkpoint.json");
    let o = risk_sac(&[
        "sweep",
        "--checkpoint", ckpt.to_str().unwrap(),
        "--out", dir.path().to_str().unwrap(),
        "--risk-rollouts", "20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("env,checkpoint,seed,delta,"));
    let svg = std::fs::read_to_string(dir.path().join("paths.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert_eq!(svg.matches("<circle").count(), 1);
    let traces = std::fs::read_to_string(dir.path().join("traces.json")).unwrap();
    assert!(traces.contains("\"schema_version\": 1") || traces.contains("\"schema_version\":1"));
    assert!(stdout(&o).contains("CPU only"));
}

#[test]
fn missing_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = risk_sac(&["train", "--env", "/nonexistent/maze.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_override_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_tiny(dir.path(), &["--override", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(risk_sac(&["fly"]).status.code(), Some(2));
}

#[test]
fn risk_bound_outside_unit_interval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_tiny(dir.path(), &["--override", "epochs=0"]).status.success());
    let ckpt = dir.path().join("checkpoint.json");
    let o = risk_sac(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--deltas", "0.2,1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn checkpoint_for_other_dynamics_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_tiny(dir.path(), &["--override", "epochs=0"]).status.success());
    let ckpt = dir.path().join("checkpoint.json");
    let other = cfg("two_rooms.toml");
    let o = risk_sac(&[
        "eval",
        "--checkpoint", ckpt.to_str().unwrap(),
        "--env", other.to_str().unwrap(),
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_tiny(dir.path(), &["--override", "lr=1e300"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn selftest_passes_and_injected_fault_is_caught() {
    let o = risk_sac(&["selftest", "--suite", "recursion", "--suite", "sum-bound"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = risk_sac(&["selftest", "--suite", "recursion", "--inject-fault", "recursion-sign"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.contains("recursion") && l.contains("FAIL")), "{text}");
}
