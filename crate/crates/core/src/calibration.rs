//! Monte Carlo calibration of thresholds and fixed sample sizes.
//!
//! Every grid point is evaluated with the same search seed, so neighbouring
//! points share their random numbers and the estimated error curves are
//! close to monotone. The chosen point is then re-evaluated with a fresh
//! seed to report its achieved error rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{
    derive_seed, Engine, ExperimentConfig, ExperimentReport, MetricRecord, RuleSpec, Threshold,
    DEFAULT_HORIZON,
};
use crate::error::{Error, Result};
use crate::metrics::{MetricEstimate, MetricKind};
use crate::model::{SignalSet, StreamProfile};
use crate::thresholds::ErrorBudget;

/// Salt for the evaluation seed of a calibration run.
const EVALUATION_PURPOSE: u64 = 0xCA11_B8A7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Doubling bracket followed by bisection; assumes monotone feasibility.
    Bisection,
    /// Every grid point in increasing order until the first feasible one.
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub grid_step: f64,
    pub c_cap: f64,
    pub n_cap: u64,
    pub horizon: u64,
    pub search: SearchMode,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            grid_step: 0.1,
            c_cap: 50.0,
            n_cap: 10_000,
            horizon: DEFAULT_HORIZON,
            search: SearchMode::Bisection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibrated {
    GapThreshold,
    BhSampleSize,
    TopMSampleSize,
}

/// The searched grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub target: Calibrated,
    pub step: f64,
    pub cap: f64,
    pub search: SearchMode,
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub value: f64,
    pub fdr: MetricEstimate,
    pub fnr: MetricEstimate,
    pub mean_stopping_time: MetricEstimate,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Threshold `c`, or sample size `n`.
    pub chosen: f64,
    /// Error rates of the chosen point on fresh data.
    pub achieved: Vec<MetricRecord>,
    pub achieved_stopping_time: MetricEstimate,
    pub replications: usize,
    pub grid: GridSpec,
    /// Evaluated points in evaluation order.
    pub trace: Vec<GridPoint>,
    pub search_seed: u64,
    pub evaluation_seed: u64,
}

impl CalibrationResult {
    pub fn achieved(&self, kind: MetricKind) -> Option<MetricEstimate> {
        self.achieved
            .iter()
            .find(|r| r.metric == kind)
            .map(|r| r.estimate)
    }
}

/// Shared setup of a calibration: profile, truth, replication count, seed.
struct Calibrator<'a> {
    engine: &'a Engine,
    profile: &'a StreamProfile,
    truth: &'a SignalSet,
    budget: ErrorBudget,
    reps: usize,
    seed: u64,
    horizon: u64,
    trace: Vec<GridPoint>,
    memo: BTreeMap<u64, GridPoint>,
}

impl<'a> Calibrator<'a> {
    fn config(&self, rule: RuleSpec, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            profile: self.profile.clone(),
            truth: self.truth.clone(),
            rule,
            budget: self.budget,
            replications: self.reps,
            master_seed: seed,
            horizon: self.horizon,
            metrics: vec![MetricKind::Fdr, MetricKind::Fnr],
        }
    }

    fn run(&self, rule: RuleSpec, seed: u64) -> Result<ExperimentReport> {
        let report = self.engine.run_experiment(&self.config(rule, seed))?;
        if report.horizon_hits > 0 {
            return Err(Error::Calibration(format!(
                "{} of {} trials reached the horizon at {:?}",
                report.horizon_hits, self.reps, rule
            )));
        }
        Ok(report)
    }

    /// Evaluates grid index `k` (memoized), recording it in the trace.
    fn point(
        &mut self,
        k: u64,
        value: f64,
        rule: RuleSpec,
        accept: impl Fn(f64, f64) -> bool,
    ) -> Result<GridPoint> {
        if let Some(p) = self.memo.get(&k) {
            return Ok(*p);
        }
        let report = self.run(rule, self.seed)?;
        let fdr = report.metric(MetricKind::Fdr).expect("fdr requested");
        let fnr = report.metric(MetricKind::Fnr).expect("fnr requested");
        let p = GridPoint {
            value,
            fdr,
            fnr,
            mean_stopping_time: report.mean_stopping_time,
            accepted: accept(fdr.value, fnr.value),
        };
        self.memo.insert(k, p);
        self.trace.push(p);
        Ok(p)
    }

    /// Smallest `k` in `1..=cap` whose point is accepted.
    fn smallest_accepted(
        &mut self,
        cap: u64,
        mode: SearchMode,
        eval: &mut dyn FnMut(&mut Self, u64) -> Result<GridPoint>,
    ) -> Result<Option<u64>> {
        match mode {
            SearchMode::Scan => {
                for k in 1..=cap {
                    if eval(self, k)?.accepted {
                        return Ok(Some(k));
                    }
                }
                Ok(None)
            }
            SearchMode::Bisection => {
                let mut lo = 0u64;
                let mut hi = 1u64;
                loop {
                    if eval(self, hi)?.accepted {
                        break;
                    }
                    if hi == cap {
                        return Ok(None);
                    }
                    lo = hi;
                    hi = (hi * 2).min(cap);
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if eval(self, mid)?.accepted {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(Some(hi))
            }
        }
    }

    fn finish(self, chosen: f64, rule: RuleSpec, grid: GridSpec) -> Result<CalibrationResult> {
        let evaluation_seed = derive_seed(self.seed, EVALUATION_PURPOSE);
        let report = self.run(rule, evaluation_seed)?;
        Ok(CalibrationResult {
            chosen,
            achieved: report.metrics.clone(),
            achieved_stopping_time: report.mean_stopping_time,
            replications: self.reps,
            grid,
            trace: self.trace,
            search_seed: self.seed,
            evaluation_seed,
        })
    }

    fn failure(&self, what: String) -> Error {
        let trace: Vec<String> = self
            .trace
            .iter()
            .map(|p| format!("{}: fdr={:.4} fnr={:.4}", p.value, p.fdr.value, p.fnr.value))
            .collect();
        Error::Calibration(format!("{what}; evaluated [{}]", trace.join(", ")))
    }
}

fn grid_value(k: u64, step: f64) -> f64 {
    // keep decimal grids such as 0.1 free of accumulated error
    let v = k as f64 * step;
    (v * 1e9).round() / 1e9
}

#[allow(clippy::too_many_arguments)]
fn calibrator<'a>(
    engine: &'a Engine,
    profile: &'a StreamProfile,
    truth: &'a SignalSet,
    budget: ErrorBudget,
    reps: usize,
    seed: u64,
    horizon: u64,
) -> Calibrator<'a> {
    Calibrator {
        engine,
        profile,
        truth,
        budget,
        reps,
        seed,
        horizon,
        trace: Vec::new(),
        memo: BTreeMap::new(),
    }
}

/// Smallest gap threshold on the grid `{step, 2·step, ...} ∩ (0, c_cap]`
/// whose estimated FDR and FNR do not exceed `alpha` and `beta`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_gap_c(
    engine: &Engine,
    profile: &StreamProfile,
    truth: &SignalSet,
    m: usize,
    targets: ErrorBudget,
    reps: usize,
    settings: &CalibrationSettings,
    seed: u64,
) -> Result<CalibrationResult> {
    if !(settings.grid_step > 0.0) {
        return Err(Error::invalid("grid_step", "must be positive"));
    }
    if reps < 1000 {
        return Err(Error::invalid(
            "replications",
            "calibration needs at least 1000",
        ));
    }
    let cap = (settings.c_cap / settings.grid_step + 1e-9).floor() as u64;
    if cap == 0 {
        return Err(Error::invalid(
            "c_cap",
            "cap lies below the first grid point",
        ));
    }
    let step = settings.grid_step;
    let rule_at = |k: u64| RuleSpec::Gap {
        m,
        c: Threshold::Value(grid_value(k, step)),
    };
    let (alpha, beta) = (targets.alpha(), targets.beta());
    let mut cal = calibrator(
        engine,
        profile,
        truth,
        targets,
        reps,
        seed,
        settings.horizon,
    );
    let mut eval = |cal: &mut Calibrator, k: u64| {
        cal.point(k, grid_value(k, step), rule_at(k), |fdr, fnr| {
            fdr <= alpha && fnr <= beta
        })
    };
    let Some(k) = cal.smallest_accepted(cap, settings.search, &mut eval)? else {
        return Err(cal.failure(format!(
            "no threshold up to {} meets fdr <= {alpha} and fnr <= {beta}",
            settings.c_cap
        )));
    };
    let grid = GridSpec {
        target: Calibrated::GapThreshold,
        step,
        cap: settings.c_cap,
        search: settings.search,
    };
    cal.finish(grid_value(k, step), rule_at(k), grid)
}

/// Sample size of the BH procedure whose estimated FNR is closest to
/// `target_fnr`; ties go to the smaller `n`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_bh_n(
    engine: &Engine,
    profile: &StreamProfile,
    truth: &SignalSet,
    alpha: f64,
    target_fnr: f64,
    reps: usize,
    settings: &CalibrationSettings,
    seed: u64,
) -> Result<CalibrationResult> {
    if !(target_fnr > 0.0 && target_fnr < 1.0) {
        return Err(Error::invalid(
            "target_fnr",
            format!("{target_fnr} must lie in (0, 1)"),
        ));
    }
    let budget = ErrorBudget::new(alpha, target_fnr)?;
    let rule_at = |n: u64| RuleSpec::Bh { n, alpha };
    let mut cal = calibrator(engine, profile, truth, budget, reps, seed, settings.horizon);
    let mut eval = |cal: &mut Calibrator, n: u64| {
        cal.point(n, n as f64, rule_at(n), |_, fnr| fnr <= target_fnr)
    };
    let Some(first_below) = cal.smallest_accepted(settings.n_cap, settings.search, &mut eval)?
    else {
        return Err(cal.failure(format!(
            "fnr stays above {target_fnr} up to n = {}",
            settings.n_cap
        )));
    };
    // the curve is only approximately monotone; look around the crossing
    let lo = first_below.saturating_sub(2).max(1);
    let hi = (first_below + 2).min(settings.n_cap);
    let mut best: Option<(f64, u64)> = None;
    for n in lo..=hi {
        let dist = (eval(&mut cal, n)?.fnr.value - target_fnr).abs();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, n));
        }
    }
    let n = best.expect("nonempty window").1;
    let grid = GridSpec {
        target: Calibrated::BhSampleSize,
        step: 1.0,
        cap: settings.n_cap as f64,
        search: settings.search,
    };
    cal.finish(n as f64, rule_at(n), grid)
}

/// Smallest sample size of the top-`m` rule whose estimated FDR and FNR do
/// not exceed `alpha` and `beta`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_topm_n(
    engine: &Engine,
    profile: &StreamProfile,
    truth: &SignalSet,
    m: usize,
    targets: ErrorBudget,
    reps: usize,
    settings: &CalibrationSettings,
    seed: u64,
) -> Result<CalibrationResult> {
    let rule_at = |n: u64| RuleSpec::TopM { n, m };
    let (alpha, beta) = (targets.alpha(), targets.beta());
    let mut cal = calibrator(
        engine,
        profile,
        truth,
        targets,
        reps,
        seed,
        settings.horizon,
    );
    let mut eval = |cal: &mut Calibrator, n: u64| {
        cal.point(n, n as f64, rule_at(n), |fdr, fnr| {
            fdr <= alpha && fnr <= beta
        })
    };
    let Some(n) = cal.smallest_accepted(settings.n_cap, settings.search, &mut eval)? else {
        return Err(cal.failure(format!(
            "no sample size up to {} meets fdr <= {alpha} and fnr <= {beta}",
            settings.n_cap
        )));
    };
    let grid = GridSpec {
        target: Calibrated::TopMSampleSize,
        step: 1.0,
        cap: settings.n_cap as f64,
        search: settings.search,
    };
    cal.finish(n as f64, rule_at(n), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StreamModel;

    fn setup(j: usize, m: usize) -> (StreamProfile, SignalSet) {
        let model = StreamModel::gaussian(0.0, 0.5).unwrap();
        (
            StreamProfile::homogeneous(model, j).unwrap(),
            SignalSet::first(m, j).unwrap(),
        )
    }

    #[test]
    fn grid_values_are_decimal() {
        assert_eq!(grid_value(21, 0.1), 2.1);
        assert_eq!(grid_value(3, 0.1), 0.3);
    }

    #[test]
    fn vacuous_targets_pick_first_grid_point() {
        let (profile, truth) = setup(10, 5);
        let engine = Engine::default();
        let targets = ErrorBudget::symmetric(0.999).unwrap();
        let settings = CalibrationSettings::default();
        let r = calibrate_gap_c(&engine, &profile, &truth, 5, targets, 1000, &settings, 1).unwrap();
        assert_eq!(r.chosen, 0.1);
        let r =
            calibrate_topm_n(&engine, &profile, &truth, 5, targets, 1000, &settings, 1).unwrap();
        assert_eq!(r.chosen, 1.0);
    }

    #[test]
    fn cap_exceeded_is_an_error_with_trace() {
        let (profile, truth) = setup(10, 5);
        let settings = CalibrationSettings {
            c_cap: 3.0,
            ..Default::default()
        };
        let targets = ErrorBudget::symmetric(1e-9).unwrap();
        let err = calibrate_gap_c(
            &Engine::default(),
            &profile,
            &truth,
            5,
            targets,
            1000,
            &settings,
            1,
        )
        .unwrap_err();
        match err {
            Error::Calibration(msg) => assert!(msg.contains("evaluated [")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn scan_and_bisection_agree_on_monotone_curve() {
        let (profile, truth) = setup(10, 5);
        let engine = Engine::default();
        let targets = ErrorBudget::symmetric(0.1).unwrap();
        let bis = CalibrationSettings {
            grid_step: 0.5,
            ..Default::default()
        };
        let scan = CalibrationSettings {
            search: SearchMode::Scan,
            ..bis
        };
        let a = calibrate_gap_c(&engine, &profile, &truth, 5, targets, 2000, &bis, 4).unwrap();
        let b = calibrate_gap_c(&engine, &profile, &truth, 5, targets, 2000, &scan, 4).unwrap();
        assert_eq!(a.chosen, b.chosen);
        assert_eq!(a.achieved, b.achieved);
    }

    #[test]
    fn rejects_bad_arguments() {
        let (profile, truth) = setup(10, 5);
        let engine = Engine::default();
        let t = ErrorBudget::symmetric(0.05).unwrap();
        let bad_step = CalibrationSettings {
            grid_step: 0.0,
            ..Default::default()
        };
        assert!(calibrate_gap_c(&engine, &profile, &truth, 5, t, 1000, &bad_step, 1).is_err());
        let ok = CalibrationSettings::default();
        assert!(calibrate_gap_c(&engine, &profile, &truth, 5, t, 999, &ok, 1).is_err());
        assert!(calibrate_bh_n(&engine, &profile, &truth, 0.05, 0.0, 1000, &ok, 1).is_err());
    }
}
