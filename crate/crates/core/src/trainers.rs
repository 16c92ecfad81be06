//! Training loops: the generic adversarial-training loop, α-GD, α-SGD with
//! iterate averaging, the α-perceptron and the slow plain-GD instance.
//!
//! Gradient trainers follow the adversarial recipe literally: build
//! `(x + delta*, y)` for the current model and take a gradient step of the
//! plain logistic loss at those points. That is the same step as subgradient
//! descent on the robust risk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    adversarial_example, check_dims, empirical_risk, loss_gradient, norm, robust_risk, Dataset, LabeledExample,
    LinkFunction, Vector,
};
use crate::metrics::margin;

const LINK: LinkFunction = LinkFunction::Logistic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub w: Vector,
}

impl Model {
    pub fn new(w: Vector) -> Self {
        Model { w }
    }

    pub fn zeros(dim: usize) -> Self {
        Model { w: Vector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `first` at t = 0, `rest` afterwards.
    ConstantWithWarmup {
        first: f64,
        rest: f64,
    },
    Constant(f64),
}

impl StepSchedule {
    pub fn step(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::ConstantWithWarmup { first, rest } => {
                if t == 0 {
                    first
                } else {
                    rest
                }
            }
            StepSchedule::Constant(eta) => eta,
        }
    }

    /// `sum_{j=1}^{k} eta_j`.
    pub fn sum_from_one(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::ConstantWithWarmup { rest, .. } => rest * k as f64,
            StepSchedule::Constant(eta) => eta * k as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::ConstantWithWarmup { first, rest } => first > 0.0 && rest > 0.0,
            StepSchedule::Constant(eta) => eta > 0.0,
        };
        if !ok {
            return Err(Error::invalid(format!("step sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Metrics of one iterate. Row `t` describes `w_t`, before step `t` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub empirical_risk: f64,
    pub robust_risk: f64,
    /// `None` when the model is zero.
    pub margin: Option<f64>,
    pub truncated_margin: f64,
    pub weight_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMetric {
    EmpiricalRisk,
    RobustRisk,
    Margin,
    TruncatedMargin,
    WeightNorm,
}

impl TraceMetric {
    pub const ALL: [TraceMetric; 5] = [
        TraceMetric::EmpiricalRisk,
        TraceMetric::RobustRisk,
        TraceMetric::Margin,
        TraceMetric::TruncatedMargin,
        TraceMetric::WeightNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceMetric::EmpiricalRisk => "empirical_risk",
            TraceMetric::RobustRisk => "robust_risk",
            TraceMetric::Margin => "margin",
            TraceMetric::TruncatedMargin => "truncated_margin",
            TraceMetric::WeightNorm => "weight_norm",
        }
    }
}

impl TraceRow {
    pub fn measure(t: usize, w: &Vector, s: &Dataset, alpha: f64) -> Result<Self> {
        let margin = match margin(w, s) {
            Ok(r) => Some(r.margin),
            Err(Error::UndefinedMargin) => None,
            Err(e) => return Err(e),
        };
        Ok(TraceRow {
            t,
            empirical_risk: empirical_risk(LINK, w, s)?,
            robust_risk: robust_risk(LINK, w, s, alpha)?,
            margin,
            truncated_margin: margin.map_or(0.0, |m| m.max(0.0)),
            weight_norm: w.norm(),
        })
    }

    /// Metric value; an undefined margin reads as NaN.
    pub fn get(&self, metric: TraceMetric) -> f64 {
        match metric {
            TraceMetric::EmpiricalRisk => self.empirical_risk,
            TraceMetric::RobustRisk => self.robust_risk,
            TraceMetric::Margin => self.margin.unwrap_or(f64::NAN),
            TraceMetric::TruncatedMargin => self.truncated_margin,
            TraceMetric::WeightNorm => self.weight_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    /// Metrics of the running average `(1/t) sum_{j<t} w_j`, for t >= 1
    /// (α-SGD only).
    pub averaged_rows: Option<Vec<TraceRow>>,
    pub final_model: Model,
    pub averaged_model: Option<Model>,
}

impl TrainTrace {
    /// First row whose margin is at least `alpha`.
    pub fn margin_attained_at(&self, alpha: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.margin.is_some_and(|m| m >= alpha))
            .map(|r| r.t)
    }

    pub fn column(&self, metric: TraceMetric) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(metric)).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::NegativeAlpha(alpha));
    }
    Ok(())
}

fn check_finite(w: &[f64], iteration: usize) -> Result<()> {
    if w.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration })
    }
}

/// `w - eta/m * sum_i grad loss(w, x'_i, y_i)` over adversarial examples.
fn minibatch_step(w: &Vector, batch: &[LabeledExample], eta: f64) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; w.dim()];
    for e in batch {
        let g = loss_gradient(LINK, w, e)?;
        for (acc, gi) in grad.iter_mut().zip(g.iter()) {
            *acc += gi;
        }
    }
    let m = batch.len() as f64;
    Ok(w.iter().zip(&grad).map(|(wi, gi)| wi - eta * (gi / m)).collect())
}

fn adversarial_batch<'a>(
    w: &Vector,
    examples: impl IntoIterator<Item = &'a LabeledExample>,
    alpha: f64,
) -> Result<Vec<LabeledExample>> {
    examples.into_iter().map(|e| adversarial_example(w, e, alpha)).collect()
}

/// One full-batch α-GD step.
pub fn alpha_gd_step(w: &Model, s: &Dataset, alpha: f64, eta: f64) -> Result<Model> {
    check_alpha(alpha)?;
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {eta}")));
    }
    check_dims(s.dim(), w.dim())?;
    let batch = adversarial_batch(&w.w, s, alpha)?;
    Ok(Model::new(Vector::from_raw(minibatch_step(&w.w, &batch, eta)?)))
}

/// Checks the hypotheses of the α-GD convergence guarantee: zero start, a
/// unit warm-up step, later steps under the cap, and data in the unit ball.
pub fn check_gd_guarantee(s: &Dataset, gamma: f64, alpha: f64, schedule: &StepSchedule, w0: &Model) -> Result<()> {
    if !w0.w.is_zero() {
        return Err(Error::invalid("the α-GD guarantee assumes w0 = 0"));
    }
    let cap = crate::metrics::gd_step_cap(gamma, alpha)?;
    let (first, rest) = match *schedule {
        StepSchedule::ConstantWithWarmup { first, rest } => (first, rest),
        StepSchedule::Constant(eta) => (eta, eta),
    };
    if first != 1.0 {
        return Err(Error::invalid("the α-GD guarantee assumes a unit first step"));
    }
    if rest > cap {
        return Err(Error::invalid(format!("step {rest} exceeds the cap {cap}")));
    }
    if s.max_norm() > 1.0 {
        return Err(Error::invalid("the α-GD guarantee assumes |x| <= 1"));
    }
    Ok(())
}

/// Runs `iterations` α-GD steps from `w0`; the trace has `iterations + 1` rows.
pub fn run_alpha_gd(
    s: &Dataset,
    alpha: f64,
    schedule: &StepSchedule,
    iterations: usize,
    w0: Model,
) -> Result<TrainTrace> {
    check_alpha(alpha)?;
    schedule.validate()?;
    if iterations < 1 {
        return Err(Error::invalid("need at least one iteration"));
    }
    check_dims(s.dim(), w0.dim())?;
    let mut w = w0.w;
    let mut rows = Vec::with_capacity(iterations + 1);
    for t in 0..=iterations {
        rows.push(TraceRow::measure(t, &w, s, alpha)?);
        if t == iterations {
            break;
        }
        let batch = adversarial_batch(&w, s, alpha)?;
        let next = minibatch_step(&w, &batch, schedule.step(t))?;
        check_finite(&next, t)?;
        w = Vector::from_raw(next);
    }
    Ok(TrainTrace {
        rows,
        averaged_rows: None,
        final_model: Model::new(w),
        averaged_model: None,
    })
}

/// α-SGD with a constant step: each step uses one example drawn uniformly
/// with a seeded ChaCha8 generator. Also tracks the running average of the
/// iterates.
pub fn run_alpha_sgd(s: &Dataset, alpha: f64, eta: f64, iterations: usize, seed: u64, w0: Model) -> Result<TrainTrace> {
    check_alpha(alpha)?;
    StepSchedule::Constant(eta).validate()?;
    if iterations < 1 {
        return Err(Error::invalid("need at least one iteration"));
    }
    check_dims(s.dim(), w0.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.len();
    let mut w = w0.w;
    let mut avg = w.clone().into_inner();
    let mut rows = Vec::with_capacity(iterations + 1);
    let mut averaged_rows = Vec::with_capacity(iterations);
    for t in 0..=iterations {
        rows.push(TraceRow::measure(t, &w, s, alpha)?);
        if t >= 1 {
            // avg holds (1/t) sum_{j<t} w_j here.
            let a = Vector::from_raw(avg.clone());
            averaged_rows.push(TraceRow::measure(t, &a, s, alpha)?);
            for (ai, wi) in avg.iter_mut().zip(w.iter()) {
                *ai += (wi - *ai) / (t + 1) as f64;
            }
        }
        if t == iterations {
            break;
        }
        let i = rng.random_range(0..n);
        let batch = [adversarial_example(&w, &s.examples()[i], alpha)?];
        let next = minibatch_step(&w, &batch, eta)?;
        check_finite(&next, t)?;
        w = Vector::from_raw(next);
    }
    // The last push folded in w_T; the reported average stops at w_{T-1}.
    let averaged_model = averaged_rows.last().map(|_| {
        let mut a = avg;
        let t = (iterations + 1) as f64;
        for (ai, wi) in a.iter_mut().zip(w.iter()) {
            *ai = (*ai * t - wi) / (t - 1.0);
        }
        Model::new(Vector::from_raw(a))
    });
    Ok(TrainTrace {
        rows,
        averaged_rows: Some(averaged_rows),
        final_model: Model::new(w),
        averaged_model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitOrder {
    /// Cyclic passes; stops after a pass with no update.
    Cyclic,
    /// `n` uniform draws per epoch; stops when a check pass finds no example
    /// that would trigger an update.
    Uniform { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronReport {
    pub final_model: Model,
    pub nonzero_updates: usize,
    pub epochs: usize,
    /// True iff a full pass over the data produced no update.
    pub terminated: bool,
    /// `w` before the first epoch and after each epoch.
    pub epoch_iterates: Vec<Vector>,
}

impl PerceptronReport {
    /// One row per entry of `epoch_iterates`, indexed by epoch.
    pub fn trace(&self, s: &Dataset, alpha: f64) -> Result<TrainTrace> {
        let rows = self
            .epoch_iterates
            .iter()
            .enumerate()
            .map(|(t, w)| TraceRow::measure(t, w, s, alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainTrace {
            rows,
            averaged_rows: None,
            final_model: self.final_model.clone(),
            averaged_model: None,
        })
    }
}

/// α-perceptron with cyclic passes.
pub fn run_alpha_perceptron(s: &Dataset, alpha: f64, max_epochs: usize) -> Result<PerceptronReport> {
    run_alpha_perceptron_with(s, alpha, max_epochs, VisitOrder::Cyclic)
}

/// Unit-step α-SGD on the ReLU loss: on a visited example with
/// `y<w,x> - alpha|w| <= 0`, set `w <- w + y x - alpha w/|w|`.
pub fn run_alpha_perceptron_with(
    s: &Dataset,
    alpha: f64,
    max_epochs: usize,
    order: VisitOrder,
) -> Result<PerceptronReport> {
    check_alpha(alpha)?;
    let mut w = vec![0.0; s.dim()];
    let mut updates = 0;
    let needs_update = |w: &[f64], e: &LabeledExample| e.signed_score(w) - alpha * norm(w) <= 0.0;
    let apply = |w: &mut Vec<f64>, e: &LabeledExample| {
        let wn = norm(w);
        let y = e.y.sign();
        for (wi, xi) in w.iter_mut().zip(e.x.iter()) {
            let unit = if wn == 0.0 { 0.0 } else { *wi / wn };
            *wi += y * xi - alpha * unit;
        }
    };
    let mut rng = match order {
        VisitOrder::Uniform { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        VisitOrder::Cyclic => None,
    };
    let mut epoch_iterates = vec![Vector::from_raw(w.clone())];

    for epoch in 1..=max_epochs {
        let clean = match rng.as_mut() {
            None => {
                let mut clean = true;
                for e in s {
                    if needs_update(&w, e) {
                        apply(&mut w, e);
                        updates += 1;
                        clean = false;
                    }
                }
                clean
            }
            Some(rng) => {
                for _ in 0..s.len() {
                    let e = &s.examples()[rng.random_range(0..s.len())];
                    if needs_update(&w, e) {
                        apply(&mut w, e);
                        updates += 1;
                    }
                }
                s.iter().all(|e| !needs_update(&w, e))
            }
        };
        check_finite(&w, epoch)?;
        epoch_iterates.push(Vector::from_raw(w.clone()));
        if clean {
            return Ok(PerceptronReport {
                final_model: Model::new(Vector::from_raw(w)),
                nonzero_updates: updates,
                epochs: epoch,
                terminated: true,
                epoch_iterates,
            });
        }
    }
    Ok(PerceptronReport {
        final_model: Model::new(Vector::from_raw(w)),
        nonzero_updates: updates,
        epochs: max_epochs,
        terminated: false,
        epoch_iterates,
    })
}

/// Plain GD on the single example `((1,0), +1)` from `(0, c)`, alongside the
/// scalar recursion `a_{t+1} = a_t + 1/(1 + e^{a_t})`. Rows carry the
/// alpha-robust risk of each plain-GD iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowGdRun {
    pub trace: TrainTrace,
    /// `a_0, ..., a_T`.
    pub recursion: Vec<f64>,
    /// Largest coordinate gap between `w_t` and `(a_t, c)`.
    pub max_deviation: f64,
}

pub const SLOW_GD_TOLERANCE: f64 = 1e-12;

pub fn run_slow_gd_instance(c: f64, alpha: f64, iterations: usize) -> Result<SlowGdRun> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("offset c must be positive, got {c}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let s = Dataset::new(vec![LabeledExample::from_parts(vec![1.0, 0.0], 1.0)?])?;
    let mut w = Model::new(Vector::new(vec![0.0, c])?);
    let mut a = 0.0f64;
    let mut recursion = Vec::with_capacity(iterations + 1);
    let mut rows = Vec::with_capacity(iterations + 1);
    let mut max_deviation = 0.0f64;
    for t in 0..=iterations {
        recursion.push(a);
        rows.push(TraceRow::measure(t, &w.w, &s, alpha)?);
        let dev = (w.w[0] - a).abs().max((w.w[1] - c).abs());
        max_deviation = max_deviation.max(dev);
        if dev > SLOW_GD_TOLERANCE {
            return Err(Error::invalid(format!(
                "iterate left the scalar recursion at t={t} by {dev:e}"
            )));
        }
        if t == iterations {
            break;
        }
        // Plain GD: no perturbation, unit step.
        w = alpha_gd_step(&w, &s, 0.0, 1.0)?;
        check_finite(&w.w, t)?;
        a += 1.0 / (1.0 + a.exp());
    }
    Ok(SlowGdRun {
        trace: TrainTrace {
            rows,
            averaged_rows: None,
            final_model: w,
            averaged_model: None,
        },
        recursion,
        max_deviation,
    })
}

/// Picks the indices `S_t` used at iteration `t`.
pub trait SubsetSelector {
    fn select(&mut self, t: usize, n: usize) -> Vec<usize>;
}

/// `S_t = S` every iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullBatch;

impl SubsetSelector for FullBatch {
    fn select(&mut self, _t: usize, n: usize) -> Vec<usize> {
        (0..n).collect()
    }
}

/// A single uniformly drawn index per iteration.
#[derive(Debug, Clone)]
pub struct UniformSingle {
    rng: ChaCha8Rng,
}

impl UniformSingle {
    pub fn new(seed: u64) -> Self {
        UniformSingle {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SubsetSelector for UniformSingle {
    fn select(&mut self, _t: usize, n: usize) -> Vec<usize> {
        vec![self.rng.random_range(0..n)]
    }
}

/// The update `w_{t+1} = A(w_t, S, S')`. `current` holds the adversarial
/// examples built at iteration `t`; `history` holds all earlier ones when the
/// loop keeps them.
pub trait UpdateRule {
    fn update(
        &mut self,
        t: usize,
        w: &Vector,
        s: &Dataset,
        current: &[LabeledExample],
        history: &[LabeledExample],
    ) -> Result<Vector>;
}

/// Mini-batch gradient step on the newest adversarial examples.
#[derive(Debug, Clone, Copy)]
pub struct MiniBatchGradient {
    pub schedule: StepSchedule,
}

impl UpdateRule for MiniBatchGradient {
    fn update(
        &mut self,
        t: usize,
        w: &Vector,
        _s: &Dataset,
        current: &[LabeledExample],
        _history: &[LabeledExample],
    ) -> Result<Vector> {
        Ok(Vector::from_raw(minibatch_step(w, current, self.schedule.step(t))?))
    }
}

/// Generic adversarial training from `w_0 = 0`: select `S_t`, perturb each
/// selected example against `w_t`, optionally accumulate the perturbed set,
/// and apply the update rule. Returns the trace and the accumulated set
/// (empty unless `keep_history`).
pub fn run_generic_adversarial_training(
    s: &Dataset,
    alpha: f64,
    rule: &mut dyn UpdateRule,
    selector: &mut dyn SubsetSelector,
    iterations: usize,
    keep_history: bool,
) -> Result<(TrainTrace, Vec<LabeledExample>)> {
    check_alpha(alpha)?;
    let mut w = Vector::zeros(s.dim());
    let mut history = Vec::new();
    let mut rows = Vec::with_capacity(iterations + 1);
    for t in 0..=iterations {
        rows.push(TraceRow::measure(t, &w, s, alpha)?);
        if t == iterations {
            break;
        }
        let chosen = selector.select(t, s.len());
        let current = adversarial_batch(&w, chosen.iter().map(|&i| &s.examples()[i]), alpha)?;
        if keep_history {
            history.extend(current.iter().cloned());
        }
        let next = rule.update(t, &w, s, &current, &history)?;
        check_dims(s.dim(), next.dim())?;
        check_finite(&next, t)?;
        w = next;
    }
    Ok((
        TrainTrace {
            rows,
            averaged_rows: None,
            final_model: Model::new(w),
            averaged_model: None,
        },
        history,
    ))
}
