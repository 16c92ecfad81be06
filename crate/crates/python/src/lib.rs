//! Python bindings. Datasets cross the boundary as a list of rows `X` and a
//! list of labels `y` in {+1, -1}; models as plain lists of floats.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use advtrain_core::data::{self, SyntheticSpec};
use advtrain_core::erm_game::{self, GameParams};
use advtrain_core::harness::{self, ExperimentConfig};
use advtrain_core::{losses, metrics, trainers};
use advtrain_core::{Dataset, LabeledExample, LinkFunction, Model, StepSchedule, TrainTrace, Vector};

create_exception!(advtrain, AdvtrainError, PyValueError);

fn py_err(e: advtrain_core::Error) -> PyErr {
    AdvtrainError::new_err(e.to_string())
}

fn link(name: &str) -> PyResult<LinkFunction> {
    match name {
        "logistic" => Ok(LinkFunction::Logistic),
        "relu" => Ok(LinkFunction::Relu),
        other => Err(AdvtrainError::new_err(format!(
            "unknown link {other:?}; expected \"logistic\" or \"relu\""
        ))),
    }
}

fn vector(v: Vec<f64>) -> PyResult<Vector> {
    Vector::new(v).map_err(py_err)
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Dataset> {
    if x.len() != y.len() {
        return Err(AdvtrainError::new_err(format!(
            "X has {} rows but y has {} labels",
            x.len(),
            y.len()
        )));
    }
    let examples = x
        .into_iter()
        .zip(y)
        .map(|(row, label)| LabeledExample::from_parts(row, label))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    Dataset::new(examples).map_err(py_err)
}

fn split(s: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    s.iter().map(|e| (e.x.to_vec(), e.y.sign())).unzip()
}

fn initial(w0: Option<Vec<f64>>, d: usize) -> PyResult<Model> {
    match w0 {
        Some(w) => Ok(Model::new(vector(w)?)),
        None => Ok(Model::zeros(d)),
    }
}

/// Per-iteration metrics of a training run, one list per column.
#[pyclass(frozen, get_all)]
struct Trace {
    t: Vec<usize>,
    empirical_risk: Vec<f64>,
    robust_risk: Vec<f64>,
    /// `None` where the model is zero.
    margin: Vec<Option<f64>>,
    truncated_margin: Vec<f64>,
    weight_norm: Vec<f64>,
    final_model: Vec<f64>,
    averaged_model: Option<Vec<f64>>,
    /// Robust risk of the running average (α-SGD only), for t >= 1.
    averaged_robust_risk: Option<Vec<f64>>,
}

impl From<TrainTrace> for Trace {
    fn from(tr: TrainTrace) -> Self {
        let col = |f: fn(&trainers::TraceRow) -> f64| tr.rows.iter().map(f).collect::<Vec<_>>();
        Trace {
            t: tr.rows.iter().map(|r| r.t).collect(),
            empirical_risk: col(|r| r.empirical_risk),
            robust_risk: col(|r| r.robust_risk),
            margin: tr.rows.iter().map(|r| r.margin).collect(),
            truncated_margin: col(|r| r.truncated_margin),
            weight_norm: col(|r| r.weight_norm),
            final_model: tr.final_model.w.to_vec(),
            averaged_model: tr.averaged_model.as_ref().map(|m| m.w.to_vec()),
            averaged_robust_risk: tr
                .averaged_rows
                .as_ref()
                .map(|rows| rows.iter().map(|r| r.robust_risk).collect()),
        }
    }
}

#[pymethods]
impl Trace {
    /// First iteration whose margin is at least `alpha`, or `None`.
    fn margin_attained_at(&self, alpha: f64) -> Option<usize> {
        self.t
            .iter()
            .zip(&self.margin)
            .find(|(_, m)| m.is_some_and(|m| m >= alpha))
            .map(|(t, _)| *t)
    }

    fn to_csv(&self) -> String {
        let rows: Vec<trainers::TraceRow> = (0..self.t.len())
            .map(|i| trainers::TraceRow {
                t: self.t[i],
                empirical_risk: self.empirical_risk[i],
                robust_risk: self.robust_risk[i],
                margin: self.margin[i],
                truncated_margin: self.truncated_margin[i],
                weight_norm: self.weight_norm[i],
            })
            .collect();
        harness::trace_to_csv(&rows)
    }

    fn __len__(&self) -> usize {
        self.t.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace(rows={}, dim={})", self.t.len(), self.final_model.len())
    }
}

/// Worst-case loss over the ball `|delta| <= alpha`, in closed form.
#[pyfunction]
#[pyo3(signature = (w, x, y, alpha, link_name = "logistic"))]
fn robust_loss(w: Vec<f64>, x: Vec<f64>, y: f64, alpha: f64, link_name: &str) -> PyResult<f64> {
    let e = LabeledExample::from_parts(x, y).map_err(py_err)?;
    losses::robust_pointwise_loss(link(link_name)?, &vector(w)?, &e, alpha).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (w, x, y, link_name = "logistic"))]
fn loss(w: Vec<f64>, x: Vec<f64>, y: f64, link_name: &str) -> PyResult<f64> {
    let e = LabeledExample::from_parts(x, y).map_err(py_err)?;
    losses::pointwise_loss(link(link_name)?, &vector(w)?, &e).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (w, x, y, alpha, link_name = "logistic"))]
fn robust_subgradient(w: Vec<f64>, x: Vec<f64>, y: f64, alpha: f64, link_name: &str) -> PyResult<Vec<f64>> {
    let e = LabeledExample::from_parts(x, y).map_err(py_err)?;
    losses::robust_subgradient(link(link_name)?, &vector(w)?, &e, alpha)
        .map(Vector::into_inner)
        .map_err(py_err)
}

/// The maximizing perturbation `-y alpha w/|w|`.
#[pyfunction]
fn adversarial_perturbation(w: Vec<f64>, x: Vec<f64>, y: f64, alpha: f64) -> PyResult<Vec<f64>> {
    let e = LabeledExample::from_parts(x, y).map_err(py_err)?;
    losses::adversarial_perturbation(&vector(w)?, &e, alpha)
        .map(Vector::into_inner)
        .map_err(py_err)
}

#[pyfunction]
fn robust_risk(w: Vec<f64>, x: Vec<Vec<f64>>, y: Vec<f64>, alpha: f64) -> PyResult<f64> {
    losses::robust_risk(LinkFunction::Logistic, &vector(w)?, &dataset(x, y)?, alpha).map_err(py_err)
}

#[pyfunction]
fn margin(w: Vec<f64>, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
    metrics::margin(&vector(w)?, &dataset(x, y)?)
        .map(|m| m.margin)
        .map_err(py_err)
}

/// `(gamma, w_star)` of the max-margin separator through the origin.
#[pyfunction]
#[pyo3(signature = (x, y, tol = 1e-9, max_iters = 1_000_000))]
fn max_margin(x: Vec<Vec<f64>>, y: Vec<f64>, tol: f64, max_iters: usize) -> PyResult<(f64, Vec<f64>)> {
    let sol = metrics::max_margin(&dataset(x, y)?, tol, max_iters).map_err(py_err)?;
    Ok((sol.gamma, sol.w_star.w.into_inner()))
}

#[pyfunction]
fn gd_step_cap(gamma: f64, alpha: f64) -> PyResult<f64> {
    metrics::gd_step_cap(gamma, alpha).map_err(py_err)
}

#[pyfunction]
fn sgd_step_cap(alpha: f64) -> f64 {
    metrics::sgd_step_cap(alpha)
}

/// α-GD envelope at `t` for a warm-up step `first` followed by `eta`.
#[pyfunction]
#[pyo3(signature = (t, gamma, alpha, eta, first = 1.0))]
fn gd_bound(t: u64, gamma: f64, alpha: f64, eta: f64, first: f64) -> PyResult<f64> {
    metrics::gd_bound(t, gamma, alpha, &StepSchedule::ConstantWithWarmup { first, rest: eta }).map_err(py_err)
}

#[pyfunction]
fn sgd_bound(t: u64, gamma: f64, alpha: f64, eta: f64, delta: f64) -> PyResult<f64> {
    metrics::sgd_bound(t, gamma, alpha, eta, delta).map_err(py_err)
}

#[pyfunction]
fn perceptron_update_bound(gamma: f64, alpha: f64) -> PyResult<f64> {
    metrics::perceptron_update_bound(gamma, alpha).map_err(py_err)
}

#[pyfunction]
fn code_threshold(gamma: f64, alpha: f64, epsilon: f64) -> PyResult<f64> {
    erm_game::code_threshold(gamma, alpha, epsilon).map_err(py_err)
}

/// α-GD. With `first` set, step 0 uses it and later steps use `eta`.
#[pyfunction]
#[pyo3(signature = (x, y, alpha, eta, iterations, w0 = None, first = None))]
#[allow(clippy::too_many_arguments)]
fn run_alpha_gd(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    alpha: f64,
    eta: f64,
    iterations: usize,
    w0: Option<Vec<f64>>,
    first: Option<f64>,
) -> PyResult<Trace> {
    let s = dataset(x, y)?;
    let w0 = initial(w0, s.dim())?;
    let schedule = match first {
        Some(first) => StepSchedule::ConstantWithWarmup { first, rest: eta },
        None => StepSchedule::Constant(eta),
    };
    py.detach(|| trainers::run_alpha_gd(&s, alpha, &schedule, iterations, w0))
        .map(Trace::from)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (x, y, alpha, eta, iterations, seed = 0, w0 = None))]
#[allow(clippy::too_many_arguments)]
fn run_alpha_sgd(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    alpha: f64,
    eta: f64,
    iterations: usize,
    seed: u64,
    w0: Option<Vec<f64>>,
) -> PyResult<Trace> {
    let s = dataset(x, y)?;
    let w0 = initial(w0, s.dim())?;
    py.detach(|| trainers::run_alpha_sgd(&s, alpha, eta, iterations, seed, w0))
        .map(Trace::from)
        .map_err(py_err)
}

/// Returns `(final_model, nonzero_updates, epochs, terminated)`.
#[pyfunction]
#[pyo3(signature = (x, y, alpha, max_epochs = 10_000))]
fn run_alpha_perceptron(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    alpha: f64,
    max_epochs: usize,
) -> PyResult<(Vec<f64>, usize, usize, bool)> {
    let s = dataset(x, y)?;
    let r = trainers::run_alpha_perceptron(&s, alpha, max_epochs).map_err(py_err)?;
    Ok((r.final_model.w.into_inner(), r.nonzero_updates, r.epochs, r.terminated))
}

/// Plain GD on `((1,0), +1)` from `(0, c)`; returns the trace and the scalar
/// recursion `a_t`.
#[pyfunction]
fn run_slow_gd(c: f64, alpha: f64, iterations: usize) -> PyResult<(Trace, Vec<f64>)> {
    let run = trainers::run_slow_gd_instance(c, alpha, iterations).map_err(py_err)?;
    Ok((Trace::from(run.trace), run.recursion))
}

/// Plays the ERM game and returns its summary as a JSON string.
#[pyfunction]
#[pyo3(signature = (d, gamma, alpha, epsilon, rounds, seed = 0))]
fn run_erm_game(d: usize, gamma: f64, alpha: f64, epsilon: f64, rounds: usize, seed: u64) -> PyResult<String> {
    let params = GameParams {
        d,
        gamma,
        alpha,
        epsilon,
    };
    let state = erm_game::run_erm_game(&params, rounds, seed).map_err(py_err)?;
    serde_json::to_string(&state.summary()).map_err(|e| AdvtrainError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (n_per_circle = 50, seed = 0, include_anchor_points = true))]
fn synth_two_circles(
    n_per_circle: usize,
    seed: u64,
    include_anchor_points: bool,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let spec = SyntheticSpec {
        n_per_circle,
        seed,
        include_anchor_points,
    };
    Ok(split(&data::synth_two_circles(&spec).map_err(py_err)?))
}

#[pyfunction]
fn two_point_dataset(gamma: f64, d: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    Ok(split(
        &data::two_point_dataset(gamma, d, &Vector::basis(d, 0)).map_err(py_err)?,
    ))
}

/// Rescales into the unit ball; returns `(X, y, scale)`.
#[pyfunction]
fn scale_to_unit_ball(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, f64)> {
    let (s, k) = data::scale_to_unit_ball(&dataset(x, y)?).map_err(py_err)?;
    let (x, y) = split(&s);
    Ok((x, y, k))
}

/// Runs an experiment from a JSON config and returns `summary.json`'s text.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let report = py.detach(|| harness::run_experiment(&cfg)).map_err(py_err)?;
    serde_json::to_string(&report.summary).map_err(|e| AdvtrainError::new_err(e.to_string()))
}

#[pymodule]
fn advtrain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AdvtrainError", m.py().get_type::<AdvtrainError>())?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(robust_loss, m)?)?;
    m.add_function(wrap_pyfunction!(robust_subgradient, m)?)?;
    m.add_function(wrap_pyfunction!(adversarial_perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(robust_risk, m)?)?;
    m.add_function(wrap_pyfunction!(margin, m)?)?;
    m.add_function(wrap_pyfunction!(max_margin, m)?)?;
    m.add_function(wrap_pyfunction!(gd_step_cap, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_step_cap, m)?)?;
    m.add_function(wrap_pyfunction!(gd_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_bound, m)?)?;
    m.add_function(wrap_pyfunction!(perceptron_update_bound, m)?)?;
    m.add_function(wrap_pyfunction!(code_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(run_alpha_gd, m)?)?;
    m.add_function(wrap_pyfunction!(run_alpha_sgd, m)?)?;
    m.add_function(wrap_pyfunction!(run_alpha_perceptron, m)?)?;
    m.add_function(wrap_pyfunction!(run_slow_gd, m)?)?;
    m.add_function(wrap_pyfunction!(run_erm_game, m)?)?;
    m.add_function(wrap_pyfunction!(synth_two_circles, m)?)?;
    m.add_function(wrap_pyfunction!(two_point_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(scale_to_unit_ball, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
