//! Runs a configured sweep over alpha: data preparation, step-size choice,
//! training, and the CSV/JSON/SVG artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{Algorithm, AlphaScale, DatasetConfig, ExperimentConfig, InitConfig, StepSizeConfig};
use super::svg::{emit_svg_chart, ChartLabels, Series};
use super::tables::{trace_to_csv, Aggregate, AGGREGATE_METRICS};
use crate::data::{
    format_float, load_iris, scale_to_unit_ball, synth_two_circles, two_point_dataset, write_dataset_csv,
};
use crate::erm_game::{code_threshold, erm_lower_bound_iters, run_erm_game, GameParams, GameSummary};
use crate::error::{Error, Result};
use crate::losses::{Dataset, LabeledExample, Vector};
use crate::metrics::{
    exp_gd_threshold, gd_bound, gd_margin_iters, gd_step_cap, margin, margin_trigger_level, max_margin,
    perceptron_update_bound, rate_slope_rows, sgd_bound, sgd_margin_iters, sgd_step_cap, slow_gd_margin_threshold,
    BoundInputs,
};
use crate::trainers::{
    run_alpha_gd, run_alpha_perceptron, run_alpha_sgd, run_slow_gd_instance, Model, StepSchedule, TraceMetric, TraceRow,
};

pub const TUNING_ITERATIONS: usize = 500;
pub const TUNING_SGD_TRIALS: u64 = 5;
const GAMMA_TOLERANCE: f64 = 1e-9;
const GAMMA_MAX_SWEEPS: usize = 1_000_000;

/// `0.1 / 2^k` for `k = 0..10`, largest first.
pub fn tuning_grid() -> Vec<f64> {
    (0..10).map(|k| 0.1 / f64::powi(2.0, k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub gamma: f64,
    /// `1/max_norm` when the data were rescaled into the unit ball.
    pub scale: Option<f64>,
}

/// Builds the configured dataset (or the fixed single-example instance for
/// slow_gd), rescales it if asked, and computes its max-margin.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<PreparedData> {
    if cfg.algorithm == Algorithm::SlowGd {
        let s = Dataset::new(vec![LabeledExample::from_parts(vec![1.0, 0.0], 1.0)?])?;
        return Ok(PreparedData {
            dataset: s,
            gamma: 1.0,
            scale: None,
        });
    }
    let raw = match &cfg.dataset {
        DatasetConfig::Synthetic(spec) => synth_two_circles(spec)?,
        DatasetConfig::Iris(spec) => load_iris(spec)?,
        DatasetConfig::TwoPoint { gamma, d } => two_point_dataset(*gamma, *d, &Vector::basis(*d, 0))?,
    };
    let (dataset, scale) = if cfg.normalize {
        let (s, k) = scale_to_unit_ball(&raw)?;
        (s, Some(k))
    } else {
        (raw, None)
    };
    let gamma = max_margin(&dataset, GAMMA_TOLERANCE, GAMMA_MAX_SWEEPS)?.gamma;
    Ok(PreparedData { dataset, gamma, scale })
}

pub fn initial_model(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Model> {
    let d = data.dataset.dim();
    match &cfg.init {
        InitConfig::Zero => Ok(Model::zeros(d)),
        InitConfig::Preset => match (&cfg.dataset, cfg.algorithm) {
            (DatasetConfig::Synthetic(_), a) if a != Algorithm::SlowGd => Ok(Model::new(Vector::basis(d, 1))),
            (DatasetConfig::Iris(_), _) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let w = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                Ok(Model::new(Vector::new(w)?))
            }
            _ => Ok(Model::zeros(d)),
        },
        InitConfig::Explicit(w) => {
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: w.len(),
                });
            }
            Ok(Model::new(Vector::new(w.clone())?))
        }
    }
}

pub fn effective_alphas(cfg: &ExperimentConfig, gamma: f64) -> Vec<f64> {
    match cfg.alpha_scale {
        AlphaScale::Absolute => cfg.alphas.clone(),
        AlphaScale::Gamma => cfg.alphas.iter().map(|a| a * gamma).collect(),
    }
}

/// File-name and JSON-key form of alpha.
pub fn alpha_key(alpha: f64) -> String {
    format!("{alpha}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub eta: f64,
    /// Mean final robust risk; `None` when a run diverged.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningResult {
    pub alpha: f64,
    pub chosen: f64,
    pub grid: Vec<GridPoint>,
}

/// Picks the grid step with the smallest final robust risk after 500
/// iterations (α-SGD: mean over 5 trials); ties go to the smaller step.
pub fn tune_step_size(cfg: &ExperimentConfig, alpha: f64) -> Result<TuningResult> {
    let data = prepare_dataset(cfg)?;
    let w0 = initial_model(cfg, &data)?;
    tune_on(cfg.algorithm, &data.dataset, &w0, alpha, cfg.seed)
}

fn final_risk(rows: &[TraceRow]) -> f64 {
    rows.last().map_or(f64::NAN, |r| r.robust_risk)
}

fn tune_on(algorithm: Algorithm, s: &Dataset, w0: &Model, alpha: f64, seed: u64) -> Result<TuningResult> {
    let mut grid = Vec::new();
    for eta in tuning_grid() {
        let outcome = match algorithm {
            Algorithm::Agd => run_alpha_gd(s, alpha, &StepSchedule::Constant(eta), TUNING_ITERATIONS, w0.clone())
                .map(|tr| final_risk(&tr.rows)),
            Algorithm::Asgd => (0..TUNING_SGD_TRIALS)
                .map(|k| {
                    run_alpha_sgd(s, alpha, eta, TUNING_ITERATIONS, seed.wrapping_add(k), w0.clone())
                        .map(|tr| final_risk(&tr.rows))
                })
                .sum::<Result<f64>>()
                .map(|total| total / TUNING_SGD_TRIALS as f64),
            _ => return Err(Error::invalid("step-size tuning applies to agd and asgd")),
        };
        let loss = match outcome {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) | Err(Error::Divergence { .. }) => None,
            Err(e) => return Err(e),
        };
        grid.push(GridPoint { eta, loss });
    }
    // The grid runs from large to small steps, so `<=` breaks ties downward.
    let mut best: Option<(f64, f64)> = None;
    for p in &grid {
        if let Some(loss) = p.loss {
            if best.is_none_or(|(b, _)| loss <= b) {
                best = Some((loss, p.eta));
            }
        }
    }
    let (_, chosen) = best.ok_or(Error::TuningFailed)?;
    Ok(TuningResult { alpha, chosen, grid })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerceptronSummary {
    pub nonzero_updates: usize,
    pub epochs: usize,
    pub terminated: bool,
    pub final_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub max_norm: f64,
    pub scale: Option<f64>,
    pub gamma: f64,
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    pub step_sizes: BTreeMap<String, Option<f64>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub tuning: BTreeMap<String, TuningResult>,
    pub bounds: BTreeMap<String, BTreeMap<String, Option<f64>>>,
    pub rate_slopes: BTreeMap<String, Option<f64>>,
    /// Per trial: first row whose margin is at least alpha.
    pub margin_attained_at: BTreeMap<String, Vec<Option<usize>>>,
    /// Per trial: the last iterate.
    pub final_models: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub averaged_models: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perceptron: Option<BTreeMap<String, PerceptronSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game: Option<BTreeMap<String, GameSummary>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Tracks written files so a failed run leaves nothing behind.
struct OutputDir {
    root: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    fn open(root: &Path) -> Result<Self> {
        let created = !root.exists();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            created,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name);
        if let Err(e) = fs::write(&path, contents) {
            let _ = fs::remove_file(&path);
            return Err(Error::io(path, e));
        }
        self.written.push(path);
        Ok(())
    }

    fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    fn rollback(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

/// What one alpha cell contributes to the summary and charts.
#[derive(Default)]
struct Cell {
    eta: Option<f64>,
    tuning: Option<TuningResult>,
    bounds: BTreeMap<String, Option<f64>>,
    slope: Option<f64>,
    attained: Vec<Option<usize>>,
    final_models: Vec<Vec<f64>>,
    averaged_models: Vec<Vec<f64>>,
    perceptron: Option<PerceptronSummary>,
    game: Option<GameSummary>,
    /// Rows to chart: the single trace, or per-t means across trials.
    chart_rows: Vec<TraceRow>,
}

fn slope_window(iterations: usize) -> Option<(usize, usize)> {
    let t_min = (iterations / 50).max(1);
    (iterations > t_min).then_some((t_min, iterations))
}

fn fitted_slope(rows: &[TraceRow], iterations: usize) -> Option<f64> {
    let (lo, hi) = slope_window(iterations)?;
    rate_slope_rows(rows, TraceMetric::RobustRisk, lo, hi).ok()
}

fn attained(rows: &[TraceRow], alpha: f64) -> Option<usize> {
    rows.iter().find(|r| r.margin.is_some_and(|m| m >= alpha)).map(|r| r.t)
}

fn mean_rows(agg: &Aggregate) -> Vec<TraceRow> {
    let col = |m: TraceMetric| agg.mean_series(m).expect("aggregate carries every chart metric");
    let (er, rr, tm, wn) = (
        col(TraceMetric::EmpiricalRisk),
        col(TraceMetric::RobustRisk),
        col(TraceMetric::TruncatedMargin),
        col(TraceMetric::WeightNorm),
    );
    (0..agg.t.len())
        .map(|i| TraceRow {
            t: agg.t[i],
            empirical_risk: er[i].1,
            robust_risk: rr[i].1,
            margin: None,
            truncated_margin: tm[i].1,
            weight_norm: wn[i].1,
        })
        .collect()
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a PreparedData,
    w0: &'a Model,
}

impl Context<'_> {
    fn bound_inputs(&self, alpha: f64, eta: f64) -> BoundInputs {
        BoundInputs {
            n: self.data.dataset.len(),
            d: self.data.dataset.dim(),
            gamma: self.data.gamma,
            alpha,
            eta,
            delta_conf: self.cfg.delta_conf,
            q: self.cfg.q,
            c: self.cfg.c,
            c_init: self.cfg.c_init,
        }
    }

    fn explicit_or_tuned(&self, alpha: f64, cap: Result<f64>) -> Result<(f64, Option<TuningResult>)> {
        match self.cfg.step_size {
            StepSizeConfig::Explicit(eta) => Ok((eta, None)),
            StepSizeConfig::TheoryCap => Ok((cap?, None)),
            StepSizeConfig::Tune => {
                let t = tune_on(self.cfg.algorithm, &self.data.dataset, self.w0, alpha, self.cfg.seed)?;
                Ok((t.chosen, Some(t)))
            }
        }
    }

    fn run_cell(&self, alpha: f64, out: &mut OutputDir) -> Result<Cell> {
        let cfg = self.cfg;
        let s = &self.data.dataset;
        let gamma = self.data.gamma;
        let key = alpha_key(alpha);
        let t_final = cfg.iterations as u64;
        let mut cell = Cell::default();
        match cfg.algorithm {
            Algorithm::Agd => {
                let (eta, tuning) = self.explicit_or_tuned(alpha, gd_step_cap(gamma, alpha))?;
                let schedule = if cfg.step_size == StepSizeConfig::TheoryCap {
                    StepSchedule::ConstantWithWarmup { first: 1.0, rest: eta }
                } else {
                    StepSchedule::Constant(eta)
                };
                let tr = run_alpha_gd(s, alpha, &schedule, cfg.iterations, self.w0.clone())?;
                out.write(&format!("trace_alpha={key}.csv"), &trace_to_csv(&tr.rows))?;
                let inputs = self.bound_inputs(alpha, eta);
                cell.bounds = BTreeMap::from([
                    ("gd_step_cap".into(), gd_step_cap(gamma, alpha).ok()),
                    ("gd_bound_final".into(), gd_bound(t_final, gamma, alpha, &schedule).ok()),
                    ("margin_trigger_level".into(), Some(margin_trigger_level(s.len()))),
                    ("gd_margin_iters".into(), gd_margin_iters(&inputs).ok()),
                ]);
                cell.eta = Some(eta);
                cell.tuning = tuning;
                cell.slope = fitted_slope(&tr.rows, cfg.iterations);
                cell.attained = vec![attained(&tr.rows, alpha)];
                cell.final_models = vec![tr.final_model.w.to_vec()];
                cell.chart_rows = tr.rows;
            }
            Algorithm::Asgd => {
                let (eta, tuning) = self.explicit_or_tuned(alpha, Ok(sgd_step_cap(alpha)))?;
                let mut iterate_rows = Vec::with_capacity(cfg.trials);
                let mut averaged_rows = Vec::with_capacity(cfg.trials);
                for k in 0..cfg.trials {
                    let seed = cfg.seed.wrapping_add(k as u64);
                    let tr = run_alpha_sgd(s, alpha, eta, cfg.iterations, seed, self.w0.clone())?;
                    let suffix = if cfg.trials > 1 {
                        format!("_trial={k}")
                    } else {
                        String::new()
                    };
                    let avg = tr.averaged_rows.clone().unwrap_or_default();
                    out.write(&format!("trace_alpha={key}{suffix}.csv"), &trace_to_csv(&tr.rows))?;
                    out.write(&format!("trace_avg_alpha={key}{suffix}.csv"), &trace_to_csv(&avg))?;
                    cell.attained.push(attained(&tr.rows, alpha));
                    cell.final_models.push(tr.final_model.w.to_vec());
                    if let Some(m) = &tr.averaged_model {
                        cell.averaged_models.push(m.w.to_vec());
                    }
                    iterate_rows.push(tr.rows);
                    averaged_rows.push(avg);
                }
                if cfg.trials > 1 {
                    let refs: Vec<&[TraceRow]> = iterate_rows.iter().map(Vec::as_slice).collect();
                    let agg = Aggregate::new(&refs, &AGGREGATE_METRICS)?;
                    out.write(&format!("aggregate_alpha={key}.csv"), &agg.to_csv())?;
                    let refs: Vec<&[TraceRow]> = averaged_rows.iter().map(Vec::as_slice).collect();
                    let avg_agg = Aggregate::new(&refs, &AGGREGATE_METRICS)?;
                    out.write(&format!("aggregate_avg_alpha={key}.csv"), &avg_agg.to_csv())?;
                    cell.chart_rows = mean_rows(&agg);
                } else {
                    cell.chart_rows = iterate_rows.swap_remove(0);
                }
                let inputs = self.bound_inputs(alpha, eta);
                cell.bounds = BTreeMap::from([
                    ("sgd_step_cap".into(), Some(sgd_step_cap(alpha))),
                    (
                        "sgd_bound_final".into(),
                        sgd_bound(t_final, gamma, alpha, eta, cfg.delta_conf).ok(),
                    ),
                    ("margin_trigger_level".into(), Some(margin_trigger_level(s.len()))),
                    ("sgd_margin_iters".into(), sgd_margin_iters(&inputs).ok()),
                ]);
                cell.eta = Some(eta);
                cell.tuning = tuning;
                cell.slope = fitted_slope(&cell.chart_rows, cfg.iterations);
            }
            Algorithm::Aperceptron => {
                let report = run_alpha_perceptron(s, alpha, cfg.iterations)?;
                let tr = report.trace(s, alpha)?;
                out.write(&format!("trace_alpha={key}.csv"), &trace_to_csv(&tr.rows))?;
                cell.bounds = BTreeMap::from([(
                    "perceptron_update_bound".into(),
                    perceptron_update_bound(gamma, alpha).ok(),
                )]);
                cell.perceptron = Some(PerceptronSummary {
                    nonzero_updates: report.nonzero_updates,
                    epochs: report.epochs,
                    terminated: report.terminated,
                    final_margin: margin(&report.final_model.w, s).ok().map(|m| m.margin),
                });
                cell.eta = Some(1.0);
                cell.attained = vec![attained(&tr.rows, alpha)];
                cell.final_models = vec![report.final_model.w.to_vec()];
                cell.chart_rows = tr.rows;
            }
            Algorithm::SlowGd => {
                let run = run_slow_gd_instance(cfg.c_init, alpha, cfg.iterations)?;
                out.write(&format!("trace_alpha={key}.csv"), &trace_to_csv(&run.trace.rows))?;
                cell.bounds = BTreeMap::from([
                    (
                        "slow_gd_margin_threshold".into(),
                        Some(slow_gd_margin_threshold(cfg.c_init, alpha)),
                    ),
                    ("exp_gd_threshold".into(), Some(exp_gd_threshold(cfg.c_init, alpha))),
                ]);
                cell.eta = Some(1.0);
                cell.slope = fitted_slope(&run.trace.rows, cfg.iterations);
                cell.attained = vec![attained(&run.trace.rows, alpha)];
                cell.final_models = vec![run.trace.final_model.w.to_vec()];
                cell.chart_rows = run.trace.rows;
            }
            Algorithm::ErmGame => {
                let (game_gamma, d) = match cfg.dataset {
                    DatasetConfig::TwoPoint { gamma, d } => (gamma, d),
                    _ => return Err(Error::Config("erm_game runs on the two_point dataset".into())),
                };
                let epsilon = cfg
                    .epsilon
                    .ok_or_else(|| Error::Config("erm_game needs epsilon".into()))?;
                let params = GameParams {
                    d,
                    gamma: game_gamma,
                    alpha,
                    epsilon,
                };
                let game = run_erm_game(&params, cfg.iterations, cfg.seed)?;
                let mut csv = String::from("t,margin_on_s,min_score,separates,margin_ok\n");
                for r in &game.rounds {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        r.t,
                        format_float(r.margin_on_s),
                        format_float(r.min_score),
                        r.separates,
                        r.margin_ok
                    );
                }
                out.write(&format!("game_alpha={key}.csv"), &csv)?;
                cell.bounds = BTreeMap::from([
                    ("code_threshold".into(), code_threshold(game_gamma, alpha, epsilon).ok()),
                    (
                        "erm_lower_bound_iters".into(),
                        erm_lower_bound_iters(d, game_gamma, epsilon, cfg.c).ok(),
                    ),
                ]);
                cell.final_models = game.models.last().map(|m| vec![m.w.to_vec()]).unwrap_or_default();
                cell.game = Some(game.summary());
            }
        }
        Ok(cell)
    }
}

fn write_charts(cells: &[(f64, Cell)], out: &mut OutputDir) -> Result<()> {
    for metric in AGGREGATE_METRICS {
        let series: Vec<Series> = cells
            .iter()
            .filter(|(_, c)| !c.chart_rows.is_empty())
            .map(|(a, c)| {
                Series::new(
                    format!("alpha={}", alpha_key(*a)),
                    c.chart_rows.iter().map(|r| (r.t as f64, r.get(metric))).collect(),
                )
            })
            .collect();
        if series.is_empty() {
            continue;
        }
        let labels = ChartLabels {
            title: metric.name().replace('_', " "),
            x: "t".into(),
            y: metric.name().into(),
        };
        let name = format!("chart_{}.svg", metric.name());
        let path = out.path(&name);
        emit_svg_chart(&series, false, &labels, &path)?;
        out.record(path);

        let positive: Vec<Series> = series
            .iter()
            .map(|s| {
                Series::new(
                    s.name.clone(),
                    s.points.iter().copied().filter(|p| p.0 >= 1.0).collect(),
                )
            })
            .collect();
        let plottable = positive
            .iter()
            .all(|s| !s.points.is_empty() && s.points.iter().all(|p| p.1 > 0.0));
        if plottable {
            let path = out.path(&format!("chart_{}_loglog.svg", metric.name()));
            emit_svg_chart(&positive, true, &labels, &path)?;
            out.record(path);
        }
    }
    Ok(())
}

fn run_into(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Summary> {
    let data = prepare_dataset(cfg)?;
    let w0 = initial_model(cfg, &data)?;
    let alphas = effective_alphas(cfg, data.gamma);
    let ctx = Context {
        cfg,
        data: &data,
        w0: &w0,
    };
    let mut cells = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        cells.push((alpha, ctx.run_cell(alpha, out)?));
    }
    if cfg.charts {
        write_charts(&cells, out)?;
    }

    let mut summary = Summary {
        algorithm: cfg.algorithm,
        dataset: cfg.dataset.kind().to_string(),
        n: data.dataset.len(),
        d: data.dataset.dim(),
        max_norm: data.dataset.max_norm(),
        scale: data.scale,
        gamma: data.gamma,
        alphas: alphas.clone(),
        iterations: cfg.iterations,
        trials: cfg.trials,
        seed: cfg.seed,
        step_sizes: BTreeMap::new(),
        tuning: BTreeMap::new(),
        bounds: BTreeMap::new(),
        rate_slopes: BTreeMap::new(),
        margin_attained_at: BTreeMap::new(),
        final_models: BTreeMap::new(),
        averaged_models: BTreeMap::new(),
        perceptron: None,
        game: None,
    };
    for (alpha, cell) in cells {
        let key = alpha_key(alpha);
        summary.step_sizes.insert(key.clone(), cell.eta);
        if let Some(t) = cell.tuning {
            summary.tuning.insert(key.clone(), t);
        }
        summary.bounds.insert(key.clone(), cell.bounds);
        summary.rate_slopes.insert(key.clone(), cell.slope);
        summary.margin_attained_at.insert(key.clone(), cell.attained);
        summary.final_models.insert(key.clone(), cell.final_models);
        if !cell.averaged_models.is_empty() {
            summary.averaged_models.insert(key.clone(), cell.averaged_models);
        }
        if let Some(p) = cell.perceptron {
            summary
                .perceptron
                .get_or_insert_with(BTreeMap::new)
                .insert(key.clone(), p);
        }
        if let Some(g) = cell.game {
            summary.game.get_or_insert_with(BTreeMap::new).insert(key, g);
        }
    }
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::invalid(e.to_string()))?;
    out.write("summary.json", &(json + "\n"))?;
    Ok(summary)
}

/// Runs every alpha cell and writes traces, aggregates, charts and
/// `summary.json` under `cfg.output_dir`. On failure every file written by
/// this run is removed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut out = OutputDir::open(&cfg.output_dir)?;
    match run_into(cfg, &mut out) {
        Ok(summary) => Ok(ExperimentReport {
            summary,
            files: out.written.clone(),
        }),
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

/// Writes the prepared dataset to `<output_dir>/dataset.csv`.
pub fn export_dataset(cfg: &ExperimentConfig) -> Result<(PreparedData, PathBuf)> {
    let data = prepare_dataset(cfg)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("dataset.csv");
    write_dataset_csv(&data.dataset, &path)?;
    Ok((data, path))
}
