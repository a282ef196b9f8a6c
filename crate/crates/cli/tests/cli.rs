//! Black-box tests of the `scadamap` binary: exit codes, artifact layout,
//! reproducibility of generated files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> PathBuf {
    // target/debug/scadamap next to the test binary's directory
    let mut p = std::env::current_exe().unwrap();
    p.pop();
    if p.ends_with("deps") {
        p.pop();
    }
    p.join("scadamap")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("SCADAMAP_CONFIG")
        .env_remove("SCADAMAP_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, seed: u64) -> PathBuf {
    let text = format!(
        r#"
seed = {seed}
out_dir = "out"
stride = 6
weeks = [2]

[[turbines]]
id = "WT-A"
[turbines.simulate]
preset = "source"
n_records = 3000

[[turbines]]
id = "WT-B"
[turbines.simulate]
preset = "target"
n_records = 3000
faults = [
    {{ start = "2020-01-16T00:00:00Z", end = "2020-01-17T00:00:00Z", kind = "idle-stuck", magnitude = 1.0, logged = true }},
]

[[pairs]]
source = "WT-A"
target = "WT-B"
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--config"), "{stderr}");
}

#[test]
fn invalid_weeks_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1);
    let out = run(&["--config", cfg.to_str().unwrap(), "--weeks", "9", "evaluate"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn finetune_without_source_checkpoint_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1);
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--pair",
        "WT-A:WT-B",
        "--weeks",
        "2",
        "finetune",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--source-checkpoint"), "{stderr}");
}

#[test]
fn train_mapper_reports_missing_checkpoint_as_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1);
    let out = Command::new(bin())
        .current_dir(dir.path())
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--pair",
            "WT-A:WT-B",
            "--weeks",
            "2",
            "train-mapper",
            "--source-checkpoint",
            "does-not-exist.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_identical_files_for_identical_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 7);
    for _ in 0..2 {
        let out = Command::new(bin())
            .current_dir(dir.path())
            .args(["--config", cfg.to_str().unwrap(), "simulate"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    // locate the run dir (named from the config hash)
    let out_root = dir.path().join("out");
    let runs: Vec<_> = std::fs::read_dir(&out_root).unwrap().collect();
    assert_eq!(runs.len(), 1, "one run directory per config hash");
    let data_dir = runs[0].as_ref().unwrap().path().join("data");
    let a = std::fs::read(data_dir.join("WT-A.csv")).unwrap();
    assert!(!a.is_empty());
    let labels = std::fs::read_to_string(data_dir.join("WT-B_labels.csv")).unwrap();
    assert!(labels.lines().count() > 1);
    assert!(labels.contains(",1"), "some labeled records exist");

    // a different seed produces different bytes
    let cfg2 = {
        let p = write_config(dir.path(), 8);
        std::fs::rename(&p, dir.path().join("run2.toml")).unwrap();
        dir.path().join("run2.toml")
    };
    let out = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", cfg2.to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let runs: Vec<_> = std::fs::read_dir(&out_root).unwrap().collect();
    assert_eq!(runs.len(), 2, "different config hash means a new run dir");
}

#[test]
fn prepare_writes_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 9);
    let out = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", cfg.to_str().unwrap(), "prepare"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("prepare"), "{stdout}");
    let listed: Vec<&str> = stdout.lines().filter(|l| l.starts_with("wrote ")).collect();
    assert_eq!(listed.len(), 2, "one summary per pair side");
    for line in listed {
        // paths are printed relative to the binary's working directory
        let path = dir.path().join(line.trim_start_matches("wrote "));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(!json.as_array().unwrap().is_empty());
    }
}

#[test]
fn report_without_results_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 10);
    let out = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", cfg.to_str().unwrap(), "report"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("evaluate"), "{stderr}");
}

#[test]
fn evaluate_micro_grid_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 5
out_dir = "out"
stride = 4
weeks = [2]

[[turbines]]
id = "WT-A"
[turbines.simulate]
preset = "source"
n_records = 4600

[[turbines]]
id = "WT-B"
[turbines.simulate]
preset = "target"
n_records = 4600
faults = [
    { start = "2020-01-28T00:00:00Z", end = "2020-01-29T00:00:00Z", kind = "power-derating", magnitude = 0.5, logged = true },
]

[[pairs]]
source = "WT-A"
target = "WT-B"

[nbm]
max_epochs = 2

[mapper]
batch_size = 4
max_iters = 2
patience_iters = 5
ema_decay = 0.5
"#;
    let cfg = dir.path().join("micro.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", cfg.to_str().unwrap(), "evaluate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("domain_map"), "{stdout}");

    let run_dir = std::fs::read_dir(dir.path().join("out")).unwrap().next().unwrap().unwrap().path();
    // delta table per scarcity, shaped method-minus-scarce
    let deltas = std::fs::read_to_string(run_dir.join("report").join("f1_deltas_w2.csv")).unwrap();
    assert!(deltas.starts_with("target,source,scarce_f1,fine_tune_delta,domain_map_delta"));
    assert_eq!(deltas.lines().count(), 2, "{deltas}");
    let results = std::fs::read_to_string(run_dir.join("report").join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 3);
    assert!(run_dir.join("report").join("summary.json").exists());
    // score plots exist and carry the threshold line
    let plots: Vec<_> = std::fs::read_dir(run_dir.join("report").join("plots"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(plots.len(), 4);
    // `report` re-emits from persisted results without retraining
    let out = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", cfg.to_str().unwrap(), "report"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
