//! Minimal standalone SVG line charts. Output depends only on the inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

impl Default for ChartLabels {
    fn default() -> Self {
        ChartLabels {
            title: String::new(),
            x: "t".into(),
            y: "value".into(),
        }
    }
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    log_log: bool,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x, y) = if self.log_log { (x.log10(), y.log10()) } else { (x, y) };
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        (
            LEFT + (x - self.x_min) / (self.x_max - self.x_min) * pw,
            TOP + ph - (y - self.y_min) / (self.y_max - self.y_min) * ph,
        )
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

fn frame(series: &[Series], log_log: bool) -> Result<Frame> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::invalid("every chart series needs at least one point"));
    }
    let (mut x_min, mut x_max, mut y_min, mut y_max) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::invalid(format!("non-finite point in series {:?}", s.name)));
            }
            if log_log && !(x > 0.0 && y > 0.0) {
                return Err(Error::invalid(format!(
                    "log-log chart needs positive values; series {:?} has ({x}, {y})",
                    s.name
                )));
            }
            let (x, y) = if log_log { (x.log10(), y.log10()) } else { (x, y) };
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    let (x_min, x_max) = padded(x_min, x_max);
    let (y_min, y_max) = padded(y_min, y_max);
    Ok(Frame {
        x_min,
        x_max,
        y_min,
        y_max,
        log_log,
    })
}

/// Chart-space (pixel) coordinates of every point, per series.
pub fn chart_coordinates(series: &[Series], log_log: bool) -> Result<Vec<Vec<(f64, f64)>>> {
    let f = frame(series, log_log)?;
    Ok(series
        .iter()
        .map(|s| s.points.iter().map(|&(x, y)| f.map(x, y)).collect())
        .collect())
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Ticks as (position in plotted units, label).
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    if log {
        let decades: Vec<(f64, String)> = ((lo.ceil() as i64)..=(hi.floor() as i64))
            .map(|k| (k as f64, format!("1e{k}")))
            .collect();
        if decades.len() >= 2 {
            return decades;
        }
        return vec![(lo, tick_label(10f64.powf(lo))), (hi, tick_label(10f64.powf(hi)))];
    }
    (0..=4)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / 4.0;
            (v, tick_label(v))
        })
        .collect()
}

pub fn render_svg_chart(series: &[Series], log_log: bool, labels: &ChartLabels) -> Result<String> {
    let f = frame(series, log_log)?;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    if !labels.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&labels.title)
        );
    }

    for (v, label) in ticks(f.x_min, f.x_max, log_log) {
        let x = LEFT + (v - f.x_min) / (f.x_max - f.x_min) * pw;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.4}" y1="{0}" x2="{x:.4}" y2="{1}" stroke="black"/><text x="{x:.4}" y="{2}" text-anchor="middle">{3}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            escape(&label)
        );
    }
    for (v, label) in ticks(f.y_min, f.y_max, log_log) {
        let y = TOP + ph - (v - f.y_min) / (f.y_max - f.y_min) * ph;
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{y:.4}" x2="{LEFT}" y2="{y:.4}" stroke="black"/><text x="{1}" y="{2:.4}" text-anchor="end">{3}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            escape(&label)
        );
    }
    let axis = |name: &str| {
        if log_log {
            format!("{name} (log scale)")
        } else {
            name.to_string()
        }
    };
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&axis(&labels.x))
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&axis(&labels.y))
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = String::with_capacity(s.points.len() * 20);
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let (cx, cy) = f.map(x, y);
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{cx:.4},{cy:.4}");
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>"#
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{0}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{1}" y="{2}">{3}</text>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg_chart(series: &[Series], log_log: bool, labels: &ChartLabels, path: &Path) -> Result<()> {
    let svg = render_svg_chart(series, log_log, labels)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
