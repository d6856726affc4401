//! TOML experiment configuration.
//!
//! ```toml
//! [streams]
//! family = "gaussian-mean"   # or "bernoulli"
//! null = 0.0
//! alt = 0.5
//! j = 10
//!
//! [truth]
//! count = 5                  # the first 5 streams; or indices = [1, 4] (1-based)
//!
//! [rule]
//! type = "gap"
//! m = 5
//! c = 2.1                    # or "auto"
//!
//! [budget]
//! alpha = 0.05
//! beta = 0.05
//!
//! [run]
//! replications = 10000
//! seed = 1
//! metrics = ["fdr", "fnr"]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use seqmt::engine::ExperimentConfig;
use seqmt::metrics::MetricKind;
use seqmt::model::{Family, SignalSet, StreamModel, StreamProfile};
use seqmt::{CalibrationSettings, ErrorBudget, RuleSpec, SearchMode, DEFAULT_HORIZON};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub streams: Streams,
    pub truth: Truth,
    pub rule: RuleSpec,
    pub budget: ErrorBudget,
    #[serde(default)]
    pub run: Run,
    #[serde(default, skip_serializing_if = "Output::is_empty")]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Streams {
    pub family: Family,
    pub null: f64,
    pub alt: f64,
    pub j: usize,
}

/// Signal streams: a count of leading streams or explicit 1-based indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
}

fn default_replications() -> usize {
    1000
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::Fdr, MetricKind::Fnr]
}

impl Default for Run {
    fn default() -> Self {
        Run {
            replications: default_replications(),
            seed: 0,
            horizon: default_horizon(),
            metrics: default_metrics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Output {
    fn is_empty(&self) -> bool {
        self.format.is_none() && self.path.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_c_cap")]
    pub c_cap: f64,
    #[serde(default = "default_n_cap")]
    pub n_cap: u64,
    /// FNR target for calibrating the BH sample size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_fnr: Option<f64>,
    #[serde(default = "default_search")]
    pub search: SearchMode,
}

fn default_grid_step() -> f64 {
    CalibrationSettings::default().grid_step
}

fn default_c_cap() -> f64 {
    CalibrationSettings::default().c_cap
}

fn default_n_cap() -> u64 {
    CalibrationSettings::default().n_cap
}

fn default_search() -> SearchMode {
    CalibrationSettings::default().search
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            grid_step: default_grid_step(),
            c_cap: default_c_cap(),
            n_cap: default_n_cap(),
            target_fnr: None,
            search: default_search(),
        }
    }
}

impl Calibration {
    pub fn settings(&self, horizon: u64) -> CalibrationSettings {
        CalibrationSettings {
            grid_step: self.grid_step,
            c_cap: self.c_cap,
            n_cap: self.n_cap,
            horizon,
            search: self.search,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn profile(&self) -> Result<StreamProfile, CliError> {
        let s = self.streams;
        let model = StreamModel::new(s.family, s.null, s.alt)
            .map_err(|e| CliError::config(format!("[streams]: {e}")))?;
        StreamProfile::homogeneous(model, s.j)
            .map_err(|e| CliError::config(format!("[streams]: {e}")))
    }

    pub fn truth(&self) -> Result<SignalSet, CliError> {
        let j = self.streams.j;
        let set = match (&self.truth.count, &self.truth.indices) {
            (Some(count), None) => SignalSet::first(*count, j),
            (None, Some(indices)) => {
                if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > j) {
                    return Err(CliError::config(format!(
                        "[truth]: index {bad} is outside 1..={j}"
                    )));
                }
                SignalSet::new(indices.iter().map(|i| i - 1), j)
            }
            _ => {
                return Err(CliError::config(
                    "[truth]: give exactly one of `count` or `indices`",
                ))
            }
        };
        set.map_err(|e| CliError::config(format!("[truth]: {e}")))
    }

    /// The experiment described by the file, with structural checks done.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let config = ExperimentConfig {
            profile: self.profile()?,
            truth: self.truth()?,
            rule: self.rule,
            budget: self.budget,
            replications: self.run.replications,
            master_seed: self.run.seed,
            horizon: self.run.horizon,
            metrics: self.run.metrics.clone(),
        };
        config
            .validate()
            .map_err(|e| CliError::config(format!("[run]: {e}")))?;
        Ok(config)
    }

    /// A file reproducing `config` exactly, with the given rule.
    pub fn describe(config: &ExperimentConfig, rule: RuleSpec) -> Result<Self, CliError> {
        let model = config.profile.as_homogeneous().ok_or_else(|| {
            CliError::config("only homogeneous stream profiles can be written as a config file")
        })?;
        Ok(ConfigFile {
            streams: Streams {
                family: model.family(),
                null: model.null_param(),
                alt: model.alt_param(),
                j: config.j(),
            },
            truth: Truth {
                count: None,
                indices: Some(config.truth.iter().map(|i| i + 1).collect()),
            },
            rule,
            budget: config.budget,
            run: Run {
                replications: config.replications,
                seed: config.master_seed,
                horizon: config.horizon,
                metrics: config.metrics.clone(),
            },
            output: Output::default(),
            calibration: None,
        })
    }
}
