//! Dataset construction and file formats.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, which produces the
//! same stream on every platform.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{dot, norm, Dataset, Label, LabeledExample, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_per_circle: usize,
    pub seed: u64,
    /// Adds `((1,0),+1)` and `((-1,0),-1)`, which pin the max-margin at 1.
    pub include_anchor_points: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_per_circle: 50,
            seed: 0,
            include_anchor_points: true,
        }
    }
}

pub const CIRCLE_CENTER: f64 = 2.0;
pub const CIRCLE_RADIUS: f64 = 1.0;

/// Points drawn with uniform angle on the unit circles around `(2,0)` (label
/// +1) and `(-2,0)` (label -1). Anchors come first, then alternating draws.
pub fn synth_two_circles(spec: &SyntheticSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::with_capacity(2 * spec.n_per_circle + 2);
    if spec.include_anchor_points {
        examples.push(LabeledExample::new(Vector::from_raw(vec![1.0, 0.0]), Label::Positive));
        examples.push(LabeledExample::new(Vector::from_raw(vec![-1.0, 0.0]), Label::Negative));
    }
    for _ in 0..spec.n_per_circle {
        for (center, label) in [(CIRCLE_CENTER, Label::Positive), (-CIRCLE_CENTER, Label::Negative)] {
            let angle = rng.random::<f64>() * TAU;
            let x = vec![center + CIRCLE_RADIUS * angle.cos(), CIRCLE_RADIUS * angle.sin()];
            examples.push(LabeledExample::new(Vector::from_raw(x), label));
        }
    }
    Dataset::new(examples)
}

/// `{(gamma v, +1), (-gamma v, -1)}`.
pub fn two_point_dataset(gamma: f64, d: usize, direction: &Vector) -> Result<Dataset> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0,1], got {gamma}")));
    }
    if direction.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: direction.dim(),
        });
    }
    if (direction.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("direction must be a unit vector"));
    }
    let pos = direction.scaled(gamma);
    let neg = direction.scaled(-gamma);
    Dataset::new(vec![
        LabeledExample::new(pos, Label::Positive),
        LabeledExample::new(neg, Label::Negative),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrisSpec {
    pub path: PathBuf,
    pub positive_class: String,
    pub negative_class: String,
}

/// Reads the UCI Iris format: four numeric fields and a class name per line,
/// no header. Rows of other classes are dropped.
pub fn load_iris(spec: &IrisSpec) -> Result<Dataset> {
    if spec.positive_class == spec.negative_class {
        return Err(Error::invalid("positive and negative classes must differ"));
    }
    let text = fs::read_to_string(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
    let shown = spec.path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: shown.clone(),
        line,
        message,
    };

    let mut classes: Vec<String> = Vec::new();
    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(parse_err(i + 1, format!("expected 5 fields, found {}", fields.len())));
        }
        let x = fields[..4]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(i + 1, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let class = fields[4].to_string();
        if !classes.contains(&class) {
            classes.push(class.clone());
        }
        rows.push((x, class));
    }

    for name in [&spec.positive_class, &spec.negative_class] {
        if !classes.contains(name) {
            return Err(Error::UnknownClass {
                name: name.clone(),
                available: classes,
            });
        }
    }
    let examples = rows
        .into_iter()
        .filter_map(|(x, class)| {
            let y = if class == spec.positive_class {
                Label::Positive
            } else if class == spec.negative_class {
                Label::Negative
            } else {
                return None;
            };
            Some(LabeledExample::new(Vector::from_raw(x), y))
        })
        .collect();
    Dataset::new(examples)
}

/// Divides every input by the largest norm. Returns the scaled set and the
/// factor `1/max_norm`.
pub fn scale_to_unit_ball(s: &Dataset) -> Result<(Dataset, f64)> {
    let m = s.max_norm();
    if m == 0.0 {
        return Err(Error::invalid("cannot rescale: every input is zero"));
    }
    let examples = s
        .iter()
        .map(|e| {
            let x = e.x.iter().map(|c| c / m).collect();
            LabeledExample::new(Vector::from_raw(x), e.y)
        })
        .collect();
    Ok((Dataset::new(examples)?, 1.0 / m))
}

/// Random separable data in the unit ball: a uniform unit direction `u`,
/// inputs drawn uniformly from the ball and kept only when
/// `|<u,x>| >= gamma`, labelled by the sign of `<u,x>`. The max-margin is at
/// least `gamma`.
pub fn planted_margin_dataset(d: usize, n: usize, gamma: f64, seed: u64) -> Result<(Dataset, Vector)> {
    if d < 1 || n < 1 {
        return Err(Error::invalid("need d >= 1 and n >= 1"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction = Vector::from_raw(random_unit(&mut rng, d));
    let mut examples = Vec::with_capacity(n);
    while examples.len() < n {
        let dir = random_unit(&mut rng, d);
        let radius = rng.random::<f64>().powf(1.0 / d as f64);
        let x: Vec<f64> = dir.iter().map(|c| c * radius).collect();
        let score = dot(&x, &direction);
        if score.abs() < gamma {
            continue;
        }
        let y = if score > 0.0 { Label::Positive } else { Label::Negative };
        examples.push(LabeledExample::new(Vector::from_raw(x), y));
    }
    Ok((Dataset::new(examples)?, direction))
}

/// Normalized standard Gaussian draw.
pub(crate) fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 0.0 {
            return g.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Renders with 17 significant digits, enough to reload the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `x1,...,xd,y`; labels are written as `1` and `-1`.
pub fn dataset_to_csv(s: &Dataset) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=s.dim()).map(|i| format!("x{i}")).collect();
    let _ = writeln!(out, "{},y", header.join(","));
    for e in s {
        for c in e.x.iter() {
            out.push_str(&format_float(*c));
            out.push(',');
        }
        let _ = writeln!(out, "{}", e.y.sign() as i32);
    }
    out
}

pub fn write_dataset_csv(s: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_csv(s)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_csv(&text, &path.display().to_string())
}

pub fn parse_dataset_csv(text: &str, origin: &str) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let d = cols.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    if d == 0 || cols != expected {
        return Err(err(1, format!("header must be x1,...,xd,y, found {header:?}")));
    }
    let mut examples = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| err(i + 1, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != d + 1 {
            return Err(err(i + 1, format!("expected {} fields, found {}", d + 1, values.len())));
        }
        let y = values[d];
        let x = values[..d].to_vec();
        examples.push(LabeledExample::from_parts(x, y).map_err(|e| err(i + 1, e.to_string()))?);
    }
    Dataset::new(examples)
}
