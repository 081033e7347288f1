use std::path::Path;
use std::process::{Command, Output};

fn flockrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flockrl"))
        .args(args)
        .env_remove("FLOCKRL_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

const SMALL: [&str; 12] = [
    "--set",
    "n=24",
    "--set",
    "world_width=24",
    "--set",
    "world_height=24",
    "--set",
    "rollout_steps=8",
    "--set",
    "minibatch_size=32",
    "--set",
    "hidden=8",
];

#[test]
fn train_writes_one_metrics_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--seed", "3", "--output", out, "--set", "training_steps=4"];
    args.extend(SMALL);
    let res = flockrl(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = lines(&dir.path().join("metrics.csv"));
    assert_eq!(
        metrics[0],
        "training_step,policy,mean_reward,policy_loss,value_loss,entropy,clip_fraction"
    );
    assert_eq!(metrics.len(), 5);
    assert_eq!(lines(&dir.path().join("timings.csv")).len(), 5);
    assert!(dir.path().join("checkpoint_flock.json").exists());
    let manifest: String = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 3"));
}

#[test]
fn snapshot_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--output", out, "--set", "training_steps=1"];
    args.extend(SMALL);
    assert!(flockrl(&args).status.success());
    let ck = dir.path().join("checkpoint_flock.json");
    let snap = dir.path().join("snap");
    let mut args = vec![
        "snapshot",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--steps",
        "5",
        "--output",
        snap.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let res = flockrl(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    // Header plus 24 agents for each of steps 1..=5.
    let positions = lines(&snap.join("positions.csv"));
    assert_eq!(positions.len(), 1 + 24 * 5);
    assert!(positions[1].starts_with("1,0,boid,"));
    assert_eq!(lines(&snap.join("view_agent0.csv")).len(), 1 + 5);
}

#[test]
fn benchmark_rows_follow_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = flockrl(&[
        "benchmark",
        "--env",
        "tag",
        "--counts",
        "100,200",
        "--steps",
        "3",
        "--output",
        out,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = lines(&dir.path().join("benchmark.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("tag,100,3,"));
}

#[test]
fn validate_reports_minibatch_plan() {
    let res = flockrl(&["validate", "--set", "n=16000"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("b=512 total_updates=204800"), "{text}");
}

#[test]
fn invalid_configuration_exits_with_two() {
    let res = flockrl(&["validate", "--set", "theta_max=4"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("theta_max"));
    let res = flockrl(&["validate", "--set", "no_such_key=1"]);
    assert_eq!(res.status.code(), Some(2));
    let res = flockrl(&["validate", "--config", "/nonexistent/run.json"]);
    assert_eq!(res.status.code(), Some(1));
}
