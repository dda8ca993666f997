use std::path::Path;
use std::process::{Command, Output};

fn los(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_los"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn los")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_tree_config(dir: &Path) -> String {
    let path = dir.join("tree.json");
    std::fs::write(
        &path,
        r#"{"model.family": "decision_tree", "model.params": {"max_depth": 6}}"#,
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn synth_train_evaluate_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = los(
        &["synth", "--rows", "1500", "--seed", "3", "--out", "data"],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("data/synthetic.csv").exists());

    let config = write_tree_config(dir);
    let out = los(
        &[
            "train",
            "--config",
            &config,
            "--input",
            "data/synthetic.csv",
            "--out",
            "run",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("Decision Tree"));
    for name in [
        "model.json",
        "metrics.json",
        "manifest.json",
        "preprocess.json",
    ] {
        assert!(dir.join("run").join(name).exists(), "{name}");
    }

    let out = los(&["evaluate", "--run", "run", "--out", "eval"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let evaluated: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let trained: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run/metrics.json")).unwrap())
            .unwrap();
    assert_eq!(evaluated["accuracy"], trained["accuracy"]);
    assert!(dir.join("eval/metrics.csv").exists());

    let out = los(&["report", "--run", "run", "--run", "run"], dir);
    assert_eq!(code(&out), 0);
    let table = stdout(&out);
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(1).unwrap().starts_with("Decision Tree"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(
        code(&los(&["synth", "--rows", "2000", "--out", "."], dir)),
        0
    );
    let config = write_tree_config(dir);
    for run in ["a", "b"] {
        let out = los(
            &[
                "train",
                "--config",
                &config,
                "--input",
                "synthetic.csv",
                "--seed",
                "11",
                "--out",
                run,
            ],
            dir,
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["model.json", "metrics.json", "config.json"] {
        let a = std::fs::read(dir.join("a").join(name)).unwrap();
        let b = std::fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn tune_writes_search_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(
        code(&los(&["synth", "--rows", "2000", "--out", "."], dir)),
        0
    );
    let out = los(
        &[
            "tune",
            "--input",
            "synthetic.csv",
            "--family",
            "decision_tree",
            "--trials",
            "3",
            "--objective",
            "accuracy",
            "--out",
            "tuned",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("best trial"));
    let trials = std::fs::read_to_string(dir.join("tuned/search_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 4);
    let out = los(&["report", "--run", "tuned"], dir);
    assert!(stdout(&out).contains("Decision Tree (tuned)"));
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.json"), r#"{"split.test_fraction": 2.0}"#).unwrap();
    let out = los(&["train", "--config", "bad.json", "--input", "x.csv"], dir);
    assert_eq!(code(&out), 1);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    std::fs::write(dir.join("unknown.json"), r#"{"no_such_key": 1}"#).unwrap();
    assert_eq!(code(&los(&["train", "--config", "unknown.json"], dir)), 1);
    assert_eq!(code(&los(&["train", "--family", "svm"], dir)), 1);
    assert_eq!(code(&los(&["frobnicate"], dir)), 1);
    assert_eq!(code(&los(&["synth", "--rows", "5"], dir)), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = los(&["train", "--input", "missing.csv", "--out", "run"], dir);
    assert_eq!(code(&out), 2);
    assert!(!dir.join("run").exists(), "failed run left output behind");
    assert_eq!(code(&los(&["evaluate", "--run", "nowhere"], dir)), 2);
}

#[test]
fn help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = los(&["--help"], tmp.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("synth"));
}
