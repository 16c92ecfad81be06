use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn advtrain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advtrain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const SYNTHETIC_AGD: &str = r#"{
  "dataset": {"synthetic": {"n_per_circle": 20}},
  "algorithm": "agd",
  "alphas": [0.0, 0.5],
  "alpha_scale": "gamma",
  "normalize": true,
  "iterations": 100,
  "step_size": "theory_cap"
}"#;

#[test]
fn train_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC_AGD);
    let out = dir.path().join("run");
    let o = advtrain(&["--config", &cfg, "--out", out.to_str().unwrap(), "train", "--charts"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("agd on synthetic"));
    assert!(out.join("trace_alpha=0.csv").exists());
    assert!(out.join("chart_robust_risk.svg").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["alphas"].as_array().unwrap().len(), 2);
    let first = fs::read_to_string(out.join("trace_alpha=0.csv")).unwrap();
    assert!(first.starts_with("t,empirical_risk,robust_risk,margin,truncated_margin,weight_norm\n"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dataset": {"synthetic": {"n_per_circle": 10}}, "algorithm": "asgd", "alphas": [0.1],
            "iterations": 50, "step_size": {"explicit": 0.1}}"#,
    );
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = advtrain(&[
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "train",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("trace_alpha=0.1.csv")).unwrap()
    };
    assert_eq!(run("4", "a"), run("4", "b"));
    assert_ne!(run("4", "a"), run("5", "c"));
}

#[test]
fn tune_reports_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dataset": {"synthetic": {"n_per_circle": 10}}, "algorithm": "agd", "alphas": [0.25]}"#,
    );
    let out = dir.path().join("tune");
    let o = advtrain(&["--config", &cfg, "--out", out.to_str().unwrap(), "tune"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 1);
    assert!(out.join("tuning.json").exists());
}

#[test]
fn game_defaults_are_admissible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("game");
    let o = advtrain(&["--out", out.to_str().unwrap(), "game"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("rounds=100/100 admissible=true"), "{text}");
    assert!(out.join("game_alpha=0.4.csv").exists());
}

#[test]
fn bounds_prints_a_table() {
    let o = advtrain(&[
        "bounds", "--n", "20", "--gamma", "1", "--alpha", "0.25", "--t", "2,10,100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,gd_bound,sgd_bound,margin_trigger_level");
    assert_eq!(lines.len(), 6);
    assert!(lines[4].starts_with("# gd_margin_iters="));
}

#[test]
fn bounds_from_config_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC_AGD);
    let out = dir.path().join("b");
    let o = advtrain(&[
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "bounds",
        "--alpha",
        "0.1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert_eq!(table.lines().count(), 8);
}

#[test]
fn data_exports_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC_AGD);
    let out = dir.path().join("d");
    let o = advtrain(&["--config", &cfg, "--out", out.to_str().unwrap(), "data"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n=42 d=2"));
    let csv = fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,y\n"));
    assert_eq!(csv.lines().count(), 43);
}

#[test]
fn errors_are_one_line_and_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["train".into()],
        vec![
            "--config".into(),
            dir.path().join("nope.json").to_string_lossy().into_owned(),
            "train".into(),
        ],
        vec![
            "--config".into(),
            write_config(dir.path(), r#"{"algorithm": "agd"}"#),
            "train".into(),
        ],
        vec!["bounds".into(), "--alpha".into(), "0.5".into()],
        vec![
            "bounds".into(),
            "--n".into(),
            "5".into(),
            "--gamma".into(),
            "0.5".into(),
            "--alpha".into(),
            "0.7".into(),
        ],
        vec!["game".into(), "--alpha".into(), "0.6".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = advtrain(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: "), "{err}");
    }
}

#[test]
fn tune_rejects_other_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dataset": {"synthetic": {}}, "algorithm": "aperceptron"}"#,
    );
    let o = advtrain(&["--config", &cfg, "tune"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tune applies to agd and asgd"));
}
