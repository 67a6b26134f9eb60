use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fedsamp(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fedsamp"));
    cmd.args(args).env_remove("FEDSAMP_OUT");
    if let Some(dir) = out_env {
        cmd.env("FEDSAMP_OUT", dir);
    }
    cmd.output().unwrap()
}

const SMALL: &str = "
[problem]
clients = 6
samples_per_client = 10
dim = 3
sigma = 3.0

[training]
k = 2
rounds = 25

[sweep]
samplers = [\"uniform\", \"adaptive-osmd\"]
seeds = [0, 1]
";

fn write_config(dir: &Path, body: &str, out: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        format!("{body}\n[output]\ndir = {:?}\n", out.display().to_string()),
    )
    .unwrap();
    path
}

#[test]
fn validate_reports_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL, &dir.path().join("out"));
    let out = fedsamp(&["validate", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok: 4 runs");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[training]\nalpha = 1.5\n").unwrap();
    let out = fedsamp(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("training.alpha"));

    fs::write(&bad, "[training]\nk = 5\nmystery = 1\n").unwrap();
    let out = fedsamp(&["run", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    assert_eq!(fedsamp(&["preset", "no-such-preset"], None).status.code(), Some(2));
    assert_eq!(
        fedsamp(&["validate", "/nonexistent/file.toml"], None).status.code(),
        Some(2)
    );
}

#[test]
fn run_writes_files_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let from_file = dir.path().join("from_file");
    let from_env = dir.path().join("from_env");
    let from_flag = dir.path().join("from_flag");
    let cfg = write_config(dir.path(), SMALL, &from_file);
    let cfg = cfg.to_str().unwrap();

    assert_eq!(fedsamp(&["run", cfg], None).status.code(), Some(0));
    for name in ["results.csv", "runs.csv", "summary.csv"] {
        assert!(from_file.join(name).exists());
    }
    let rows = fs::read_to_string(from_file.join("results.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 4 * 25);

    assert_eq!(fedsamp(&["run", cfg], Some(&from_env)).status.code(), Some(0));
    assert!(from_env.join("results.csv").exists());

    let out = fedsamp(
        &[
            "run",
            cfg,
            "--out",
            from_flag.to_str().unwrap(),
            "--seeds",
            "3",
            "--rounds",
            "5",
        ],
        Some(&from_env),
    );
    assert_eq!(out.status.code(), Some(0));
    let runs = fs::read_to_string(from_flag.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 3);
    assert!(runs.lines().skip(1).all(|l| l.contains(",ok,5,")));
}

#[test]
fn failed_runs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("rounds = 25", "rounds = 300\nmu_sgd = 50.0");
    let cfg = write_config(dir.path(), &body, &dir.path().join("out"));
    let out = fedsamp(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let runs = fs::read_to_string(dir.path().join("out/runs.csv")).unwrap();
    assert!(runs.lines().skip(1).all(|l| l.contains("failed")));
}

#[test]
fn dataset_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut features = String::new();
    let mut labels = String::new();
    let mut partition = String::new();
    for i in 0..30 {
        let x = i as f64 / 10.0;
        features.push_str(&format!("{x},{}\n", 1.0 - x));
        labels.push_str(&format!("{}\n", i % 3));
        partition.push_str(&format!("{}\n", i % 4));
    }
    fs::write(dir.path().join("x.csv"), features).unwrap();
    fs::write(dir.path().join("y.csv"), labels).unwrap();
    fs::write(dir.path().join("part.csv"), partition).unwrap();
    let body = "
[problem]
kind = \"csv\"
features = \"x.csv\"
labels = \"y.csv\"
partition = \"part.csv\"

[training]
k = 2
rounds = 20
sampler = \"adaptive-doubling-osmd\"
";
    let cfg = write_config(dir.path(), body, &dir.path().join("out"));
    let out = fedsamp(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let first = results.lines().nth(1).unwrap();
    assert!(first.starts_with("0,adaptive-doubling-osmd,,0.4,with,0,1,"), "{first}");
}

#[test]
fn lists_presets() {
    let out = fedsamp(&["presets"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "synthetic-sigma1",
        "synthetic-sigma3",
        "synthetic-sigma10",
        "alpha-robustness",
        "replacement-compare",
    ] {
        assert!(text.contains(name));
    }
}
