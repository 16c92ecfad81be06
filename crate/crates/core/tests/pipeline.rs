//! End-to-end runs through the public API: config in, files out, files back in.

use std::fs;
use std::path::Path;

use advtrain_core::data::{read_dataset_csv, IrisSpec, SyntheticSpec};
use advtrain_core::harness::{
    emit_bound_table, export_dataset, parse_trace_csv, run_experiment, Algorithm, AlphaScale, DatasetConfig,
    ExperimentConfig, StepSizeConfig,
};
use advtrain_core::losses::{empirical_risk, robust_risk};
use advtrain_core::metrics::{gd_bound, gd_step_cap, margin, BoundInputs};
use advtrain_core::{Error, LinkFunction, StepSchedule, Vector};

fn config(dir: &Path, json: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(json).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn agd_trace_last_row_matches_final_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"{"dataset": {"synthetic": {"n_per_circle": 20}}, "algorithm": "agd",
            "alphas": [0.0, 0.5], "alpha_scale": "gamma", "normalize": true,
            "iterations": 400, "step_size": "theory_cap", "charts": true}"#,
    );
    let report = run_experiment(&cfg).unwrap();
    let (data, _) = export_dataset(&cfg).unwrap();
    let s = read_dataset_csv(&dir.path().join("dataset.csv")).unwrap();
    assert_eq!(s, data.dataset);

    for &alpha in &report.summary.alphas {
        let key = alpha.to_string();
        let text = fs::read_to_string(dir.path().join(format!("trace_alpha={key}.csv"))).unwrap();
        let rows = parse_trace_csv(&text, "trace").unwrap();
        assert_eq!(rows.len(), cfg.iterations + 1);
        let w = Vector::new(report.summary.final_models[&key][0].clone()).unwrap();
        let last = rows.last().unwrap();
        let rr = robust_risk(LinkFunction::Logistic, &w, &s, alpha).unwrap();
        let er = empirical_risk(LinkFunction::Logistic, &w, &s).unwrap();
        assert!((last.robust_risk - rr).abs() <= 1e-9 * rr.max(1.0));
        assert!((last.empirical_risk - er).abs() <= 1e-9 * er.max(1.0));
        assert!((last.margin.unwrap() - margin(&w, &s).unwrap().margin).abs() <= 1e-9);

        // Theory-cap runs stay under the envelope.
        let schedule = StepSchedule::ConstantWithWarmup {
            first: 1.0,
            rest: gd_step_cap(report.summary.gamma, alpha).unwrap(),
        };
        for r in &rows[2..] {
            assert!(r.robust_risk <= gd_bound(r.t as u64, report.summary.gamma, alpha, &schedule).unwrap());
        }
    }
    for name in ["chart_robust_risk.svg", "chart_robust_risk_loglog.svg", "summary.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "agd");
    assert_eq!(summary["n"], 42);
}

#[test]
fn asgd_multi_trial_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(DatasetConfig::Synthetic(SyntheticSpec::default()), Algorithm::Asgd);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.alphas = vec![0.25];
    cfg.alpha_scale = AlphaScale::Gamma;
    cfg.normalize = true;
    cfg.iterations = 200;
    cfg.trials = 3;
    cfg.step_size = StepSizeConfig::Explicit(0.5);
    let report = run_experiment(&cfg).unwrap();
    let key = report.summary.alphas[0].to_string();
    for k in 0..3 {
        assert!(dir.path().join(format!("trace_alpha={key}_trial={k}.csv")).exists());
        assert!(dir.path().join(format!("trace_avg_alpha={key}_trial={k}.csv")).exists());
    }
    let agg = fs::read_to_string(dir.path().join(format!("aggregate_alpha={key}.csv"))).unwrap();
    assert!(agg.starts_with("t,mean_empirical_risk,std_empirical_risk,"));
    assert_eq!(agg.lines().count(), cfg.iterations + 2);
    assert_eq!(report.summary.final_models[&key].len(), 3);
    assert_eq!(report.summary.averaged_models[&key].len(), 3);
}

#[test]
fn iris_config_resolves_relative_path() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/iris.data");
    fs::copy(&fixture, dir.path().join("iris.data")).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"dataset": {"iris": {"path": "iris.data", "positive_class": "Iris-setosa",
            "negative_class": "Iris-virginica"}}, "algorithm": "aperceptron", "alphas": [0.5],
            "alpha_scale": "gamma", "normalize": true, "iterations": 1000}"#,
    )
    .unwrap();
    let mut cfg = ExperimentConfig::load(&cfg_path).unwrap();
    cfg.output_dir = dir.path().join("out");
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.summary.n, 100);
    let p = &report.summary.perceptron.as_ref().unwrap()[&report.summary.alphas[0].to_string()];
    assert!(p.terminated);
    assert!(p.final_margin.unwrap() >= report.summary.alphas[0]);
}

#[test]
fn failures_are_reported_and_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = ExperimentConfig::new(
        DatasetConfig::Iris(IrisSpec {
            path: dir.path().join("missing.data"),
            positive_class: "Iris-setosa".into(),
            negative_class: "Iris-virginica".into(),
        }),
        Algorithm::Agd,
    );
    cfg.output_dir = out.clone();
    assert!(matches!(run_experiment(&cfg), Err(Error::Io { .. })));
    assert!(!out.exists());

    assert!(matches!(
        ExperimentConfig::from_json(r#"{"dataset": {"synthetic": {}}, "algorithm": "agd", "bogus": 1}"#),
        Err(Error::Config(_))
    ));
}

#[test]
fn bound_table_from_public_api() {
    let inputs = BoundInputs {
        n: 102,
        d: 2,
        gamma: 1.0,
        alpha: 0.5,
        eta: gd_step_cap(1.0, 0.5).unwrap(),
        delta_conf: 0.1,
        q: 2.0,
        c: 1.0,
        c_init: 5.0,
    };
    let table = emit_bound_table(&inputs, &[1, 2, 1000]).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "t,gd_bound,sgd_bound,margin_trigger_level");
    assert!(lines[1].starts_with("1,NaN,"));
    assert_eq!(lines.len(), 6);
    assert!(emit_bound_table(&BoundInputs { alpha: 1.0, ..inputs }, &[2]).is_err());
}
