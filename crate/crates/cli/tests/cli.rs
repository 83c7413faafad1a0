use std::path::Path;
use std::process::{Command, Output};

fn dial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dial"))
        .args(args)
        .env("DIAL_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = dial(args);
    assert!(
        out.status.success(),
        "dial {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_subcommands() {
    let text = ok(&["--help"]);
    for cmd in ["collect", "train", "sweep", "run", "report", "explain"] {
        assert!(text.contains(cmd), "{cmd}");
    }
    let text = ok(&["run", "--help"]);
    for flag in ["--seed", "--scenario", "--workload", "--sequence", "--clients", "--repeats", "--paper-scale", "--out"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    for args in [
        vec!["run", "--workload", "s_xx_sq_1m", "--out", out],
        vec!["run", "--workload", "s_wr_sq_1m", "--mode", "fixed", "--out", out],
        vec!["run", "--workload", "s_wr_sq_1m", "--mode", "tuned", "--out", out],
        vec!["run", "--out", out],
    ] {
        let o = dial(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn run_sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let common = ["--workload", "s_wr_rn_8k", "--duration", "3", "--repeats", "2", "--out", out];
    let text = ok(&[&["run", "--mode", "default"][..], &common].concat());
    assert!(text.contains("over 2 repeats"));
    ok(&[&["run", "--mode", "fixed", "--config", "1024x32"][..], &common].concat());
    let sweep = ok(&[&["sweep"][..], &common].concat());
    assert!(sweep.contains("42 configurations"));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 43);
    assert!(csv.starts_with("# tool_version="));

    let default = dir.path().join("results_default.csv");
    let fixed = dir.path().join("results_fixed1024x32.csv");
    let text = std::fs::read_to_string(&default).unwrap();
    assert!(text.contains("# seeds=1;2"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 4);
    let report = ok(&["report", "--out", out, s(&default), s(&fixed)]);
    let line = report.lines().find(|l| l.starts_with("s_wr_rn_8k")).unwrap();
    assert!(line.contains(" 1.00 "));
    assert!(line.contains("missing"));
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn multi_client_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    ok(&["run", "--workload", "s_wr_rn_8k,s_rd_sq_1m", "--duration", "2", "--repeats", "1", "--out", out]);
    let text = std::fs::read_to_string(dir.path().join("results_default.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 4);
    ok(&["run", "--workload", "s_wr_rn_8k", "--clients", "3", "--duration", "2", "--repeats", "1", "--out", out]);
    let text = std::fs::read_to_string(dir.path().join("results_default.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 4);
}

#[test]
fn collect_train_tune_explain() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let text = ok(&["collect", "--run-seconds", "15", "--repeats", "1", "--out", out]);
    assert!(text.contains("runs: 13"));
    assert!(text.contains("discarded"));
    let hyper = dir.path().join("hyper.json");
    std::fs::write(&hyper, r#"{"num_trees": 30, "max_depth": 4, "learning_rate": 0.1, "min_samples_leaf": 10, "subsample_fraction": 1.0, "seed": 0}"#).unwrap();
    let models = dir.path().join("models");
    let text = ok(&["train", "--samples", out, "--hyper", s(&hyper), "--out", s(&models)]);
    assert!(text.contains("read model: schema v1"));
    assert!(text.contains("error rate"));
    let first = std::fs::read(models.join("write_model.json")).unwrap();
    ok(&["train", "--samples", out, "--hyper", s(&hyper), "--out", s(&models)]);
    assert_eq!(first, std::fs::read(models.join("write_model.json")).unwrap());

    let text = ok(&[
        "run", "--mode", "tuned", "--models", s(&models), "--workload", "s_wr_rn_8k", "--duration", "5", "--repeats", "1",
        "--out", out,
    ]);
    assert!(text.contains("tuned client 0 phase 0"));
    let text = ok(&[
        "explain", "--models", s(&models), "--workload", "s_wr_rn_8k", "--duration", "10", "--at", "4", "--out", out,
    ]);
    assert!(text.contains("candidates above tau 0.8"));
    assert!(dir.path().join("explain.csv").exists());
}
