//! CSV renderings: traces, multi-trial aggregates and bound tables. Floats use
//! 17 significant digits so every value reloads bit for bit.

use std::fmt::Write as _;

use crate::data::format_float;
use crate::error::{Error, Result};
use crate::metrics::{gd_bound, gd_margin_iters, margin_trigger_level, sgd_bound, sgd_margin_iters, BoundInputs};
use crate::trainers::{StepSchedule, TraceMetric, TraceRow};

pub const TRACE_HEADER: &str = "t,empirical_risk,robust_risk,margin,truncated_margin,weight_norm";

/// Metrics summarized across trials. The raw margin is left out: it is
/// undefined at the zero model.
pub const AGGREGATE_METRICS: [TraceMetric; 4] = [
    TraceMetric::EmpiricalRisk,
    TraceMetric::RobustRisk,
    TraceMetric::TruncatedMargin,
    TraceMetric::WeightNorm,
];

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 128);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let margin = r.margin.map_or_else(|| "NaN".to_string(), format_float);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            format_float(r.empirical_risk),
            format_float(r.robust_risk),
            margin,
            format_float(r.truncated_margin),
            format_float(r.weight_norm)
        );
    }
    out
}

pub fn parse_trace_csv(text: &str, origin: &str) -> Result<Vec<TraceRow>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        other => {
            return Err(err(
                1,
                format!("expected header {TRACE_HEADER:?}, found {:?}", other.map(|o| o.1)),
            ));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(i + 1, format!("expected 6 fields, found {}", fields.len())));
        }
        let t = fields[0]
            .parse::<usize>()
            .map_err(|_| err(i + 1, format!("bad iteration {:?}", fields[0])))?;
        let num = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|_| err(i + 1, format!("not a number: {:?}", fields[k])))
        };
        let margin = num(3)?;
        rows.push(TraceRow {
            t,
            empirical_risk: num(1)?,
            robust_risk: num(2)?,
            margin: if margin.is_nan() { None } else { Some(margin) },
            truncated_margin: num(4)?,
            weight_norm: num(5)?,
        });
    }
    Ok(rows)
}

/// Per-iteration mean and sample standard deviation across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub metrics: Vec<TraceMetric>,
    pub t: Vec<usize>,
    /// `stats[row][metric] = (mean, std)`.
    pub stats: Vec<Vec<(f64, f64)>>,
}

impl Aggregate {
    pub fn new(trials: &[&[TraceRow]], metrics: &[TraceMetric]) -> Result<Self> {
        let first = trials.first().ok_or_else(|| Error::invalid("no trials to aggregate"))?;
        if trials.iter().any(|tr| tr.len() != first.len()) {
            return Err(Error::invalid("trials have different lengths"));
        }
        let k = trials.len() as f64;
        let mut t = Vec::with_capacity(first.len());
        let mut stats = Vec::with_capacity(first.len());
        for (i, row) in first.iter().enumerate() {
            if trials.iter().any(|tr| tr[i].t != row.t) {
                return Err(Error::invalid("trials are not aligned on t"));
            }
            t.push(row.t);
            let cells = metrics
                .iter()
                .map(|&m| {
                    let mean = trials.iter().map(|tr| tr[i].get(m)).sum::<f64>() / k;
                    let std = if trials.len() < 2 {
                        0.0
                    } else {
                        let ss: f64 = trials.iter().map(|tr| (tr[i].get(m) - mean).powi(2)).sum();
                        (ss / (k - 1.0)).sqrt()
                    };
                    (mean, std)
                })
                .collect();
            stats.push(cells);
        }
        Ok(Aggregate {
            metrics: metrics.to_vec(),
            t,
            stats,
        })
    }

    /// `(t, mean)` pairs for one metric.
    pub fn mean_series(&self, metric: TraceMetric) -> Option<Vec<(usize, f64)>> {
        let k = self.metrics.iter().position(|&m| m == metric)?;
        Some(self.t.iter().zip(&self.stats).map(|(&t, row)| (t, row[k].0)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for m in &self.metrics {
            let _ = write!(out, ",mean_{0},std_{0}", m.name());
        }
        out.push('\n');
        for (t, row) in self.t.iter().zip(&self.stats) {
            out.push_str(&t.to_string());
            for (mean, std) in row {
                let _ = write!(out, ",{},{}", format_float(*mean), format_float(*std));
            }
            out.push('\n');
        }
        out
    }
}

/// One row per `t` with the α-GD envelope (warm-up step 1, then `eta`), the
/// α-SGD bound and the `ln(2)/n` trigger; the margin iteration counts go
/// in `#` footer lines. Cells a formula does not cover (`gd_bound` at
/// `t < 2`) read `NaN`.
pub fn emit_bound_table(inputs: &BoundInputs, t_grid: &[u64]) -> Result<String> {
    inputs.validate()?;
    let schedule = StepSchedule::ConstantWithWarmup {
        first: 1.0,
        rest: inputs.eta,
    };
    let cell = |v: Result<f64>| v.map_or_else(|_| "NaN".to_string(), format_float);
    let mut out = String::from("t,gd_bound,sgd_bound,margin_trigger_level\n");
    for &t in t_grid {
        let _ = writeln!(
            out,
            "{t},{},{},{}",
            cell(gd_bound(t, inputs.gamma, inputs.alpha, &schedule)),
            cell(sgd_bound(t, inputs.gamma, inputs.alpha, inputs.eta, inputs.delta_conf)),
            format_float(margin_trigger_level(inputs.n))
        );
    }
    let _ = writeln!(out, "# gd_margin_iters={}", cell(gd_margin_iters(inputs)));
    let _ = writeln!(out, "# sgd_margin_iters={}", cell(sgd_margin_iters(inputs)));
    Ok(out)
}
