//! Sequential multiple testing with gap and gap-intersection rules.
//!
//! `J` data streams are observed in parallel, each generated under a simple
//! null or a simple alternative. The procedures here sample all streams
//! until the ordered log-likelihood ratios separate and then reject the
//! streams above the separation. Fixed-sample Benjamini-Hochberg and top-`m`
//! procedures are provided as baselines, together with a Monte Carlo engine
//! that estimates error metrics and expected sample sizes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rules;
pub mod stats;
pub mod tables;
pub mod thresholds;

pub use calibration::{
    calibrate_bh_n, calibrate_gap_c, calibrate_topm_n, CalibrationResult, CalibrationSettings,
    SearchMode,
};
pub use engine::{
    Engine, ExperimentConfig, ExperimentReport, MetricRecord, ResolvedRule, RuleSpec, SweepReport,
    SweepRow, Threshold, TrialRecord, DEFAULT_HORIZON,
};
pub use error::{Error, Result};
pub use metrics::{ConfusionCounts, MetricEstimate, MetricKind};
pub use model::{eta, Family, SignalSet, StreamModel, StreamProfile};
pub use rules::{
    Decision, FixedSampleRule, GapIntersectionRule, GapRule, IntersectionRule, SequentialRule,
    StopTag,
};
pub use stats::{LlrState, OrderView};
pub use tables::{Table, TableReport};
pub use thresholds::{ErrorBudget, GiThresholds};
