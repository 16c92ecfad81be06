//! Margins, the hard-margin solver, closed-form bound calculators and
//! log-log rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{check_dims, dot, norm, Dataset, Vector};
use crate::trainers::{Model, StepSchedule, TraceMetric, TraceRow, TrainTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub margin: f64,
    /// `max(0, margin)`.
    pub truncated: f64,
    /// Index of the example attaining the minimum.
    pub argmin_index: usize,
}

/// `min_i y_i <w, x_i> / |w|`. Undefined (an error) for `w = 0`.
pub fn margin(w: &Vector, s: &Dataset) -> Result<MarginReport> {
    check_dims(s.dim(), w.dim())?;
    let wn = w.norm();
    if wn == 0.0 {
        return Err(Error::UndefinedMargin);
    }
    let (argmin_index, min_score) =
        s.iter()
            .map(|e| e.signed_score(w))
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, m)| if m < best.1 { (i, m) } else { best },
            );
    let margin = min_score / wn;
    Ok(MarginReport {
        margin,
        truncated: margin.max(0.0),
        argmin_index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMarginSolution {
    pub gamma: f64,
    /// Unit-norm maximizer.
    pub w_star: Model,
    pub sweeps: usize,
    /// Certified upper bound minus `gamma` at termination.
    pub gap: f64,
}

/// Max-margin separator through the origin, by dual coordinate ascent on
///
/// ```text
/// max_{a >= 0}  sum_i a_i - 1/2 |sum_i a_i y_i x_i|^2
/// ```
///
/// Any dual point with objective `D > 0` certifies `gamma <= 1/sqrt(2D)`, and
/// the primal iterate `w = sum a_i y_i x_i` certifies `gamma >= margin(w)`.
/// The loop stops once the two agree to `tol`.
pub fn max_margin(s: &Dataset, tol: f64, max_iters: usize) -> Result<MaxMarginSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let sq_norms: Vec<f64> = s.iter().map(|e| dot(&e.x, &e.x)).collect();
    if sq_norms.contains(&0.0) {
        return Err(Error::NotSeparable);
    }
    let n = s.len();
    let d = s.dim();
    let mut dual = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut gap = f64::INFINITY;

    for sweep in 1..=max_iters {
        for (i, e) in s.iter().enumerate() {
            let y = e.y.sign();
            let grad = 1.0 - y * dot(&w, &e.x);
            let updated = (dual[i] + grad / sq_norms[i]).max(0.0);
            let step = updated - dual[i];
            if step != 0.0 {
                dual[i] = updated;
                for (wj, xj) in w.iter_mut().zip(e.x.iter()) {
                    *wj += step * y * xj;
                }
            }
        }

        let wn = norm(&w);
        let objective = dual.iter().sum::<f64>() - 0.5 * wn * wn;
        if objective <= 0.0 || wn == 0.0 {
            continue;
        }
        let upper = (2.0 * objective).sqrt().recip();
        let min_score = s.iter().map(|e| e.signed_score(&w)).fold(f64::INFINITY, f64::min);
        if min_score <= 0.0 {
            // |w| / sum(a) bounds the best achievable margin from above; it
            // tends to zero when no separator through the origin exists.
            let dual_mass: f64 = dual.iter().sum();
            if wn / dual_mass < tol {
                return Err(Error::NotSeparable);
            }
            continue;
        }
        let lower = min_score / wn;
        gap = upper - lower;
        if gap <= tol {
            let w_star = Vector::from_raw(w.iter().map(|c| c / wn).collect());
            let gamma = margin(&w_star, s)?.margin;
            return Ok(MaxMarginSolution {
                gamma,
                w_star: Model::new(w_star),
                sweeps: sweep,
                gap,
            });
        }
    }
    Err(Error::SolverNoConvergence {
        iterations: max_iters,
        gap,
    })
}

/// Inputs shared by the bound calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub eta: f64,
    pub delta_conf: f64,
    pub q: f64,
    /// Universal constant of the SGD iteration count and the ERM lower bound.
    pub c: f64,
    /// Initial offset of the slow plain-GD instance.
    pub c_init: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        check_gap(self.gamma, self.alpha)?;
        if !(self.q > 1.0) {
            return Err(Error::invalid(format!("q must exceed 1, got {}", self.q)));
        }
        if !(self.delta_conf > 0.0 && self.delta_conf < 1.0) {
            return Err(Error::invalid(format!(
                "confidence delta must lie in (0,1), got {}",
                self.delta_conf
            )));
        }
        if !(self.eta > 0.0) || self.n == 0 {
            return Err(Error::invalid("eta must be positive and n at least 1"));
        }
        Ok(())
    }
}

fn check_gap(gamma: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha < gamma) {
        return Err(Error::invalid(format!(
            "need 0 <= alpha < gamma, got alpha={alpha}, gamma={gamma}"
        )));
    }
    Ok(gamma - alpha)
}

/// Largest admissible α-GD step after the warm-up step:
/// `(2α/(γ-α) + (1+α)^2)^-1`.
pub fn gd_step_cap(gamma: f64, alpha: f64) -> Result<f64> {
    let gap = check_gap(gamma, alpha)?;
    Ok((2.0 * alpha / gap + (1.0 + alpha).powi(2)).recip())
}

/// Largest step size covered by the α-SGD guarantee: `min(1, 2/(1+α)^2)`.
pub fn sgd_step_cap(alpha: f64) -> f64 {
    (2.0 / (1.0 + alpha).powi(2)).min(1.0)
}

/// Robust-risk envelope for α-GD at iteration `t >= 2`:
/// `1/t + (1/4 + ln(t)^2/(γ-α)^2) / sum_{j=1}^{t-1} η_j`.
pub fn gd_bound(t: u64, gamma: f64, alpha: f64, schedule: &StepSchedule) -> Result<f64> {
    if t < 2 {
        return Err(Error::invalid(format!("gd_bound needs t >= 2, got {t}")));
    }
    let gap = check_gap(gamma, alpha)?;
    let step_sum = schedule.sum_from_one(t - 1);
    let log_t = (t as f64).ln();
    Ok(1.0 / t as f64 + (0.25 + log_t * log_t / (gap * gap)) / step_sum)
}

/// High-probability robust-risk bound for the averaged α-SGD iterate.
pub fn sgd_bound(t: u64, gamma: f64, alpha: f64, eta: f64, delta_conf: f64) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("sgd_bound needs t >= 1"));
    }
    if !(delta_conf > 0.0 && delta_conf < 1.0) {
        return Err(Error::invalid(format!(
            "confidence delta must lie in (0,1), got {delta_conf}"
        )));
    }
    let gap = check_gap(gamma, alpha)?;
    let log_t = (t as f64).ln();
    let first = 4.0 * log_t / gap + 6.0;
    let second = 8.0 * log_t / (gap * gap) + 8.0 / gap + 4.0 * (1.0 / delta_conf).ln();
    Ok(first * second / (eta * t as f64))
}

/// Mistake bound of the α-perceptron on data in the unit ball:
/// `((1+α)/(γ-α))^2`.
pub fn perceptron_update_bound(gamma: f64, alpha: f64) -> Result<f64> {
    let gap = check_gap(gamma, alpha)?;
    Ok(((1.0 + alpha) / gap).powi(2))
}

/// Robust-risk level `ln(2)/n` below which the margin is at least α.
pub fn margin_trigger_level(n: usize) -> f64 {
    std::f64::consts::LN_2 / n as f64
}

/// `5/4 + ln(t)^2 <= (t-1) t^(-1/q)`.
pub fn c_q_predicate(t: u64, q: f64) -> bool {
    let tf = t as f64;
    let log_t = tf.ln();
    1.25 + log_t * log_t <= (tf - 1.0) * tf.powf(-1.0 / q)
}

/// Smallest `t >= 2` satisfying [`c_q_predicate`], by linear scan.
pub fn c_q_constant(q: f64, scan_limit: u64) -> Result<u64> {
    if !(q > 1.0) {
        return Err(Error::invalid(format!("q must exceed 1, got {q}")));
    }
    (2..scan_limit)
        .find(|&t| c_q_predicate(t, q))
        .ok_or(Error::ScanExhausted { q, limit: scan_limit })
}

pub const DEFAULT_C_Q_SCAN_LIMIT: u64 = 10_000_000;

/// Iteration count after which α-GD has margin at least α:
/// `max(C_q, (n / (η (γ-α)^2 ln 2))^q)`.
pub fn gd_margin_iters(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let gap = inputs.gamma - inputs.alpha;
    let c_q = c_q_constant(inputs.q, DEFAULT_C_Q_SCAN_LIMIT)? as f64;
    let power = (inputs.n as f64 / (inputs.eta * gap * gap * std::f64::consts::LN_2)).powf(inputs.q);
    Ok(c_q.max(power))
}

/// Iteration count after which the averaged α-SGD iterate has margin at
/// least α with probability `1 - δ`, for the supplied universal constant `c`.
pub fn sgd_margin_iters(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let gap = inputs.gamma - inputs.alpha;
    let c_q = c_q_constant(inputs.q, DEFAULT_C_Q_SCAN_LIMIT)? as f64;
    let bracket = inputs.c * inputs.n as f64 / inputs.eta * (gap.powi(-3) + (1.0 / inputs.delta_conf).ln() / gap);
    Ok(c_q.max(bracket.powf(inputs.q)))
}

/// `exp(c/(1-α))`, the iteration threshold claimed for plain GD on the
/// single-example instance started at `(0, c)`.
///
/// Note: this overstates the threshold. The iterate is `(a_t, c)` with
/// `a_t <= ln(t+1)`, so the margin stays below α only up to
/// [`slow_gd_margin_threshold`], which is far smaller.
pub fn exp_gd_threshold(c_init: f64, alpha: f64) -> f64 {
    (c_init / (1.0 - alpha)).exp()
}

/// `exp(α c / sqrt(1-α^2)) - 1`: for every `t` below this, plain GD on the
/// single-example instance started at `(0, c)` has margin below α.
pub fn slow_gd_margin_threshold(c_init: f64, alpha: f64) -> f64 {
    (alpha * c_init / (1.0 - alpha * alpha).sqrt()).exp() - 1.0
}

/// Least-squares slope of `ln(metric)` against `ln(t)` over rows with
/// `t_min <= t <= t_max`.
pub fn rate_slope(trace: &TrainTrace, metric: TraceMetric, t_min: usize, t_max: usize) -> Result<f64> {
    rate_slope_rows(&trace.rows, metric, t_min, t_max)
}

/// [`rate_slope`] over a bare slice of rows.
pub fn rate_slope_rows(rows: &[TraceRow], metric: TraceMetric, t_min: usize, t_max: usize) -> Result<f64> {
    if t_min < 1 || t_max <= t_min {
        return Err(Error::invalid(format!(
            "need 1 <= t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    let mut points = Vec::new();
    for row in rows.iter().filter(|r| r.t >= t_min && r.t <= t_max) {
        let value = row.get(metric);
        if !(value > 0.0) {
            return Err(Error::invalid(format!(
                "{metric:?} must be positive to fit a log-log slope, got {value} at t={}",
                row.t
            )));
        }
        points.push(((row.t as f64).ln(), value.ln()));
    }
    log_log_slope(&points)
}

fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("need at least two rows to fit a slope"));
    }
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        (sxy + (x - mean_x) * (y - mean_y), sxx + (x - mean_x) * (x - mean_x))
    });
    Ok(sxy / sxx)
}
