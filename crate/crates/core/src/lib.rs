//! Adversarial training of linear classifiers on separable data.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod erm_game;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod trainers;

pub use error::{Error, Result};
pub use losses::{Dataset, Label, LabeledExample, LinkFunction, Vector};
pub use trainers::{Model, StepSchedule, TraceMetric, TraceRow, TrainTrace};
