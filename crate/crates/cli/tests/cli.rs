use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dys");

fn dys(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env("DYS_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = dys(args, cwd);
    assert!(
        out.status.success(),
        "dys {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Workspace with a small synthetic dataset and a fast config.
fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"n_times": 6,
            "train": {"max_epochs": 3, "hidden_sizes": [4], "learning_rate": 0.001},
            "synth": {"n": 300, "p": 3}}"#,
    )
    .unwrap();
    ok(
        &["synth", "--config", "cfg.json", "--out", "data", "--seed", "1"],
        dir.path(),
    );
    let data = dir.path().join("data/data.csv");
    (dir, data)
}

#[test]
fn synth_writes_data_and_sidecar() {
    let (dir, data) = workspace();
    let csv = fs::read_to_string(&data).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x1,x2,x3,time,event");
    assert_eq!(csv.lines().count(), 301);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("data/data.sidecar.json")).unwrap()).unwrap();
    assert_eq!(sidecar["beta"].as_array().unwrap().len(), 3);
    assert_eq!(sidecar["config"]["seed"], 1);
}

#[test]
fn train_predict_eval_explain() {
    let (dir, _) = workspace();
    let w = dir.path();
    ok(
        &[
            "train",
            "--config",
            "cfg.json",
            "--data",
            "data/data.csv",
            "--out",
            "run",
            "--seed",
            "4",
        ],
        w,
    );
    for f in ["model.json", "train_log.json", "auc.csv", "auc.json", "config.json"] {
        assert!(w.join("run").join(f).exists(), "{f}");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(w.join("run/config.json")).unwrap()).unwrap();
    assert_eq!(resolved["train"]["seed"], 4);

    ok(
        &[
            "predict",
            "--model",
            "run/model.json",
            "--data",
            "data/data.csv",
            "--out",
            "pred",
        ],
        w,
    );
    let surv = fs::read_to_string(w.join("pred/survival.csv")).unwrap();
    let mut lines = surv.lines();
    assert_eq!(lines.next().unwrap(), "id,t_1,t_2,t_3,t_4,t_5,t_6");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 300);
    for r in &rows {
        assert!(r.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }
    assert_eq!(fs::read_to_string(w.join("pred/grid.csv")).unwrap().lines().count(), 7);

    // eval reuses the training seed, so it reproduces the AUC written by train
    ok(
        &[
            "eval",
            "--model",
            "run/model.json",
            "--data",
            "data/data.csv",
            "--out",
            "ev",
        ],
        w,
    );
    assert_eq!(
        fs::read_to_string(w.join("ev/auc.csv")).unwrap(),
        fs::read_to_string(w.join("run/auc.csv")).unwrap()
    );

    ok(
        &[
            "explain",
            "--model",
            "run/model.json",
            "--data",
            "data/data.csv",
            "--out",
            "rep",
            "--svg",
        ],
        w,
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(w.join("rep/manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f == "importances.csv"));
    assert!(files.iter().any(|f| f.as_str().unwrap().ends_with(".svg")));
    for f in files {
        assert!(w.join("rep").join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn predict_reads_rows_without_outcomes() {
    let (dir, data) = workspace();
    let w = dir.path();
    ok(
        &[
            "train",
            "--config",
            "cfg.json",
            "--data",
            "data/data.csv",
            "--out",
            "run",
            "--mode",
            "cox",
        ],
        w,
    );
    let features: String = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .take(4)
        .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(w.join("new.csv"), features).unwrap();
    ok(
        &[
            "predict",
            "--model",
            "run/model.json",
            "--data",
            "new.csv",
            "--out",
            "pred",
        ],
        w,
    );
    let risk = fs::read_to_string(w.join("pred/risk.csv")).unwrap();
    assert_eq!(risk.lines().count(), 4);
    assert_eq!(risk.lines().next().unwrap(), "id,risk");
}

#[test]
fn training_is_reproducible() {
    let (dir, _) = workspace();
    let w = dir.path();
    for out in ["a", "b"] {
        ok(
            &["train", "--config", "cfg.json", "--data", "data/data.csv", "--out", out],
            w,
        );
    }
    for f in ["model.json", "train_log.json", "auc.csv"] {
        assert_eq!(
            fs::read(w.join("a").join(f)).unwrap(),
            fs::read(w.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn trials_write_summary() {
    let (dir, _) = workspace();
    let w = dir.path();
    ok(
        &[
            "train",
            "--config",
            "cfg.json",
            "--data",
            "data/data.csv",
            "--out",
            "t",
            "--trials",
            "2",
            "--seed",
            "7",
        ],
        w,
    );
    assert!(w.join("t/trial_7/model.json").exists());
    assert!(w.join("t/trial_8/model.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(w.join("t/trials.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"].as_array().unwrap().len(), 2);
    assert!(summary["mean_auc"].is_f64());
}

#[test]
fn config_errors_exit_with_two() {
    let (dir, _) = workspace();
    let w = dir.path();
    fs::write(w.join("bad.json"), r#"{"trian": {}}"#).unwrap();
    assert_eq!(dys(&["train", "--config", "bad.json"], w).status.code(), Some(2));
    assert_eq!(dys(&["train", "--out", "x"], w).status.code(), Some(2));
    fs::write(w.join("notime.csv"), "a,b,event\n1,2,1\n3,4,0\n").unwrap();
    assert_eq!(dys(&["train", "--data", "notime.csv"], w).status.code(), Some(2));
    assert_eq!(
        dys(
            &["select", "--config", "cfg.json", "--data", "data/data.csv", "--k", "9"],
            w
        )
        .status
        .code(),
        Some(2)
    );
    fs::write(w.join("neg.json"), r#"{"train": {"learning_rate": -1}}"#).unwrap();
    assert_eq!(
        dys(&["train", "--config", "neg.json", "--data", "data/data.csv"], w)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dys(&["train", "--data", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}
