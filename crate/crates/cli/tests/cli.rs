use std::fs;
use std::process::Command;

fn dwn() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dwn"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

const TINY: &str = "\
# two short episodes on small networks
env = mountain_car
episodes = 2
step_cap = 30
hidden = 8
dueling_width = 8
batch_size = 8
memory_size = 64
seeds = 1
";

#[test]
fn run_with_override_creates_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.cfg");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("run");
    let status = dwn()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--override", "seed=7", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["config.resolved", "episodes.csv", "summary.json", "checkpoints/seed-7.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("seeds = 7"));
    let csv = fs::read_to_string(out.join("episodes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn default_output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.cfg");
    fs::write(&cfg, TINY).unwrap();
    let status = dwn()
        .env("DWN_OUTPUT_ROOT", dir.path())
        .args(["run", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("mountain_car-dwn/summary.json").exists());
}

#[test]
fn pareto_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dwn().arg("pareto").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("episodes.csv"));
}

#[test]
fn pareto_scores_deep_sea_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dst.cfg");
    fs::write(
        &cfg,
        TINY.replace("env = mountain_car", "env = deep_sea").replace("step_cap = 30", "step_cap = 20"),
    )
    .unwrap();
    let run = dir.path().join("run");
    assert!(dwn()
        .args(["run", "--override", "agent=dqn_sum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run)
        .status()
        .unwrap()
        .success());
    let out = dwn().arg("pareto").arg(&run).output().unwrap();
    assert!(out.status.success());
    let line: serde_json::Value = serde_json::from_slice(out.stdout.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(line["seed"], 1);
    assert_eq!(line["evaluation"]["short_run"], true);
    assert!(line["evaluation"]["distance"].as_f64().unwrap() >= 0.0);
}

#[test]
fn unknown_subcommand_and_flag_are_rejected() {
    let out = dwn().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = dwn().args(["run", "--bogus"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn bad_override_is_reported() {
    let out = dwn().args(["run", "--override", "gamma"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("key=value"));
}

#[test]
fn selftest_passes() {
    let out = dwn().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("ok")).count(), 8);
}

#[test]
fn pretrain_writes_both_phases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dst.cfg");
    fs::write(
        &cfg,
        TINY.replace("env = mountain_car", "env = deep_sea") + "pretrain_episodes = 1\n",
    )
    .unwrap();
    let out = dir.path().join("pre");
    assert!(dwn()
        .args(["pretrain", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    for f in [
        "config.resolved",
        "phase1/channel-0/episodes.csv",
        "phase1/channel-1/checkpoints/seed-1.json",
        "phase2/summary.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}
