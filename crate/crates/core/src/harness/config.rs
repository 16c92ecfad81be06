use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{IrisSpec, SyntheticSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticSpec),
    Iris(IrisSpec),
    TwoPoint { gamma: f64, d: usize },
}

impl DatasetConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetConfig::Synthetic(_) => "synthetic",
            DatasetConfig::Iris(_) => "iris",
            DatasetConfig::TwoPoint { .. } => "two_point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Agd,
    Asgd,
    Aperceptron,
    SlowGd,
    ErmGame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSizeConfig {
    Explicit(f64),
    /// Grid search over `0.1 / 2^k`, `k < 10`.
    Tune,
    /// The largest step the convergence guarantees allow.
    TheoryCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    Zero,
    /// `(0, 1)` on synthetic data, standard normal entries (seeded from the
    /// config seed) on Iris, zero otherwise.
    Preset,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScale {
    Absolute,
    /// Each listed alpha is multiplied by the dataset's max-margin.
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub algorithm: Algorithm,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_alpha_scale")]
    pub alpha_scale: AlphaScale,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_step_size")]
    pub step_size: StepSizeConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_init")]
    pub init: InitConfig,
    /// Clean-set margin the ERM adversary holds (erm_game only).
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Start offset `(0, c_init)` of the slow plain-GD instance.
    #[serde(default = "default_c_init")]
    pub c_init: f64,
    #[serde(default)]
    pub charts: bool,
    #[serde(default = "default_delta_conf")]
    pub delta_conf: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Universal constant used by the SGD iteration count and the ERM lower bound.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75]
}
fn default_alpha_scale() -> AlphaScale {
    AlphaScale::Absolute
}
fn default_iterations() -> usize {
    1000
}
fn default_step_size() -> StepSizeConfig {
    StepSizeConfig::Tune
}
fn default_trials() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_init() -> InitConfig {
    InitConfig::Zero
}
fn default_c_init() -> f64 {
    5.0
}
fn default_delta_conf() -> f64 {
    0.1
}
fn default_q() -> f64 {
    2.0
}
fn default_c() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(dataset: DatasetConfig, algorithm: Algorithm) -> Self {
        ExperimentConfig {
            dataset,
            algorithm,
            alphas: default_alphas(),
            alpha_scale: default_alpha_scale(),
            iterations: default_iterations(),
            step_size: default_step_size(),
            trials: default_trials(),
            seed: 0,
            normalize: false,
            output_dir: default_output_dir(),
            init: default_init(),
            epsilon: None,
            c_init: default_c_init(),
            charts: false,
            delta_conf: default_delta_conf(),
            q: default_q(),
            c: default_c(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative Iris path is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let DatasetConfig::Iris(spec) = &mut cfg.dataset {
            if spec.path.is_relative() {
                if let Some(base) = path.parent() {
                    spec.path = base.join(&spec.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return bad(format!("alphas must be finite and nonnegative, got {a}"));
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if let StepSizeConfig::Explicit(eta) = self.step_size {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("explicit step size must be positive, got {eta}"));
            }
        }
        if !(self.delta_conf > 0.0 && self.delta_conf < 1.0) {
            return bad(format!("delta_conf must lie in (0,1), got {}", self.delta_conf));
        }
        if !(self.q > 1.0) {
            return bad(format!("q must exceed 1, got {}", self.q));
        }
        if !(self.c > 0.0 && self.c_init > 0.0) {
            return bad("c and c_init must be positive".into());
        }
        if self.algorithm == Algorithm::ErmGame {
            if !matches!(self.dataset, DatasetConfig::TwoPoint { .. }) {
                return bad("erm_game runs on the two_point dataset".into());
            }
            if self.epsilon.is_none() {
                return bad("erm_game needs epsilon".into());
            }
        }
        Ok(())
    }
}
