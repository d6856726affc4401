//! Replicated Monte Carlo experiments.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with the master seed and the stream number is the trial index. A trial's
//! outcome is therefore a pure function of `(master_seed, trial_index)`,
//! whatever the number of worker threads. Results are aggregated in trial
//! order.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, bound_constants, confusion, ConfusionCounts, MetricEstimate, MetricKind,
    ProblemShape, RuleClass,
};
use crate::model::{eta, SignalSet, StreamProfile};
use crate::rules::{
    run_sequential, FixedSampleKind, FixedSampleRule, GapIntersectionRule, GapRule,
    IntersectionRule, StopTag,
};
use crate::thresholds::{gap_threshold, gi_thresholds, kappa_gap, kappa_gi, ErrorBudget};

pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// A threshold given explicitly or derived from the error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Value(f64),
    #[serde(with = "auto_keyword")]
    Auto,
}

mod auto_keyword {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(de::Error::custom(format!(
                "expected a number or \"auto\", got \"{s}\""
            )))
        }
    }
}

impl Threshold {
    fn or_else(self, auto: f64) -> f64 {
        match self {
            Threshold::Value(v) => v,
            Threshold::Auto => auto,
        }
    }

    pub fn is_auto(self) -> bool {
        matches!(self, Threshold::Auto)
    }
}

/// Rule selection with possibly unresolved thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RuleSpec {
    Gap {
        m: usize,
        c: Threshold,
    },
    GapIntersection {
        l: usize,
        u: usize,
        a: Threshold,
        b: Threshold,
        c: Threshold,
        d: Threshold,
    },
    Intersection {
        a: Threshold,
        b: Threshold,
    },
    Bh {
        n: u64,
        alpha: f64,
    },
    TopM {
        n: u64,
        m: usize,
    },
}

impl RuleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RuleSpec::Gap { .. } => "gap",
            RuleSpec::GapIntersection { .. } => "gap-intersection",
            RuleSpec::Intersection { .. } => "intersection",
            RuleSpec::Bh { .. } => "bh",
            RuleSpec::TopM { .. } => "top-m",
        }
    }

    /// The same rule with every threshold set to `auto`.
    pub fn with_auto_thresholds(self) -> Self {
        use Threshold::Auto;
        match self {
            RuleSpec::Gap { m, .. } => RuleSpec::Gap { m, c: Auto },
            RuleSpec::GapIntersection { l, u, .. } => RuleSpec::GapIntersection {
                l,
                u,
                a: Auto,
                b: Auto,
                c: Auto,
                d: Auto,
            },
            RuleSpec::Intersection { .. } => RuleSpec::Intersection { a: Auto, b: Auto },
            fixed => fixed,
        }
    }
}

/// A rule with every threshold fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ResolvedRule {
    Gap(GapRule),
    GapIntersection(GapIntersectionRule),
    Intersection(IntersectionRule),
    Fixed(FixedSampleRule),
}

impl ResolvedRule {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedRule::Gap(_) => "gap",
            ResolvedRule::GapIntersection(_) => "gap-intersection",
            ResolvedRule::Intersection(_) => "intersection",
            ResolvedRule::Fixed(f) => match f.kind {
                FixedSampleKind::Bh { .. } => "bh",
                FixedSampleKind::TopM { .. } => "top-m",
            },
        }
    }

    pub fn class(&self) -> Option<RuleClass> {
        match self {
            ResolvedRule::Gap(_) => Some(RuleClass::Gap),
            ResolvedRule::GapIntersection(_) => Some(RuleClass::GapIntersection),
            _ => None,
        }
    }

    /// Threshold values (`c`; `a, b, c, d`; `a, b`; or `n` for fixed rules).
    pub fn thresholds(&self) -> Vec<f64> {
        match self {
            ResolvedRule::Gap(g) => vec![g.c],
            ResolvedRule::GapIntersection(r) => vec![r.a, r.b, r.c, r.d],
            ResolvedRule::Intersection(r) => vec![r.a, r.b],
            ResolvedRule::Fixed(f) => vec![f.n as f64],
        }
    }

    /// `m`, `l..u`, or `-` for rules without a prior on the signal count.
    pub fn bounds_label(&self) -> String {
        match self {
            ResolvedRule::Gap(g) => g.m.to_string(),
            ResolvedRule::GapIntersection(r) => format!("{}..{}", r.l, r.u),
            ResolvedRule::Fixed(FixedSampleRule {
                kind: FixedSampleKind::TopM { m },
                ..
            }) => m.to_string(),
            _ => "-".to_string(),
        }
    }
}

impl From<ResolvedRule> for RuleSpec {
    fn from(rule: ResolvedRule) -> Self {
        use Threshold::Value;
        match rule {
            ResolvedRule::Gap(g) => RuleSpec::Gap {
                m: g.m,
                c: Value(g.c),
            },
            ResolvedRule::GapIntersection(r) => RuleSpec::GapIntersection {
                l: r.l,
                u: r.u,
                a: Value(r.a),
                b: Value(r.b),
                c: Value(r.c),
                d: Value(r.d),
            },
            ResolvedRule::Intersection(r) => RuleSpec::Intersection {
                a: Value(r.a),
                b: Value(r.b),
            },
            ResolvedRule::Fixed(f) => match f.kind {
                FixedSampleKind::Bh { alpha } => RuleSpec::Bh { n: f.n, alpha },
                FixedSampleKind::TopM { m } => RuleSpec::TopM { n: f.n, m },
            },
        }
    }
}

/// Everything a replicated experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub profile: StreamProfile,
    pub truth: SignalSet,
    pub rule: RuleSpec,
    pub budget: ErrorBudget,
    pub replications: usize,
    pub master_seed: u64,
    pub horizon: u64,
    pub metrics: Vec<MetricKind>,
}

impl ExperimentConfig {
    pub fn j(&self) -> usize {
        self.profile.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        if self.truth.universe() != self.j() {
            return Err(Error::invalid(
                "truth",
                format!(
                    "signal set is over {} streams, profile has {}",
                    self.truth.universe(),
                    self.j()
                ),
            ));
        }
        Ok(())
    }

    fn shape(&self) -> ProblemShape {
        let (m, l, u) = match self.rule {
            RuleSpec::Gap { m, .. } => (m, m, m),
            RuleSpec::GapIntersection { l, u, .. } => (self.truth.len(), l, u),
            _ => (self.truth.len(), 0, self.j()),
        };
        ProblemShape {
            j: self.j(),
            m,
            l,
            u,
        }
    }

    fn check_metric_bounds(&self, class: RuleClass) -> Result<f64> {
        let shape = self.shape();
        let mut c1: f64 = 1.0;
        let mut any = false;
        for &kind in &self.metrics {
            // fpr is undefined without signals; the aggregate reports that
            if kind == MetricKind::Fpr && (shape.m == 0 || shape.m >= shape.j) {
                continue;
            }
            let bc = bound_constants(kind, class, shape)?;
            c1 = if any { c1.max(bc.c1()) } else { bc.c1() };
            any = true;
        }
        Ok(c1)
    }

    /// Fixes all thresholds. `auto` thresholds use the closed-form formulas
    /// with `C1` the largest upper-bound constant among the requested metrics
    /// (1 when none is requested).
    pub fn resolve_rule(&self) -> Result<ResolvedRule> {
        self.validate()?;
        let j = self.j();
        let rule = match self.rule {
            RuleSpec::Gap { m, c } => {
                let c1 = self.check_metric_bounds(RuleClass::Gap)?;
                let c = match c {
                    Threshold::Value(v) => v,
                    Threshold::Auto => gap_threshold(self.budget, m, j, c1)?,
                };
                ResolvedRule::Gap(GapRule::new(m, c)?)
            }
            RuleSpec::GapIntersection { l, u, a, b, c, d } => {
                let c1 = self.check_metric_bounds(RuleClass::GapIntersection)?;
                let t = gi_thresholds(self.budget, j, l, u, c1)?;
                ResolvedRule::GapIntersection(GapIntersectionRule::new(
                    l,
                    u,
                    a.or_else(t.a),
                    b.or_else(t.b),
                    c.or_else(t.c),
                    d.or_else(t.d),
                )?)
            }
            RuleSpec::Intersection { a, b } => {
                let t = gi_thresholds(self.budget, j, 0, j, 1.0)?;
                ResolvedRule::Intersection(IntersectionRule::new(a.or_else(t.a), b.or_else(t.b))?)
            }
            RuleSpec::Bh { n, alpha } => ResolvedRule::Fixed(FixedSampleRule::bh(n, alpha)?),
            RuleSpec::TopM { n, m } => ResolvedRule::Fixed(FixedSampleRule::top_m(n, m)?),
        };
        match &rule {
            ResolvedRule::Gap(r) => crate::rules::SequentialRule::validate(r, j)?,
            ResolvedRule::GapIntersection(r) => crate::rules::SequentialRule::validate(r, j)?,
            ResolvedRule::Intersection(_) => {}
            ResolvedRule::Fixed(f) => f.validate(j)?,
        }
        Ok(rule)
    }
}

/// The random source of one trial.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// A seed derived from `seed` for an independent purpose (e.g. evaluating
/// a calibrated threshold on fresh data).
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub stopping_time: u64,
    pub counts: ConfusionCounts,
    pub stopped_by: StopTag,
    pub horizon_hit: bool,
}

fn execute(
    config: &ExperimentConfig,
    rule: &ResolvedRule,
    trial_index: u64,
) -> Result<TrialRecord> {
    let mut rng = trial_rng(config.master_seed, trial_index);
    let (profile, truth, horizon) = (&config.profile, &config.truth, config.horizon);
    let decision = match rule {
        ResolvedRule::Gap(r) => run_sequential(r, profile, truth, horizon, &mut rng)?,
        ResolvedRule::GapIntersection(r) => run_sequential(r, profile, truth, horizon, &mut rng)?,
        ResolvedRule::Intersection(r) => run_sequential(r, profile, truth, horizon, &mut rng)?,
        ResolvedRule::Fixed(f) => f.run(profile, truth, &mut rng)?,
    };
    Ok(TrialRecord {
        index: trial_index,
        stopping_time: decision.stopping_time,
        counts: confusion(&decision.rejected, truth, config.j())?,
        stopped_by: decision.stopped_by,
        horizon_hit: decision.horizon_hit(),
    })
}

/// Runs the trial with the given index.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    if trial_index >= config.replications as u64 {
        return Err(Error::IndexOutOfRange {
            index: trial_index as usize,
            len: config.replications,
        });
    }
    let rule = config.resolve_rule()?;
    execute(config, &rule, trial_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: MetricKind,
    #[serde(flatten)]
    pub estimate: MetricEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rule: ResolvedRule,
    pub mean_stopping_time: MetricEstimate,
    pub metrics: Vec<MetricRecord>,
    pub horizon_hits: usize,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn metric(&self, kind: MetricKind) -> Option<MetricEstimate> {
        self.metrics
            .iter()
            .find(|r| r.metric == kind)
            .map(|r| r.estimate)
    }

    /// True when every field other than the wall time matches.
    pub fn same_results(&self, other: &ExperimentReport) -> bool {
        self.config == other.config
            && self.rule == other.rule
            && self.mean_stopping_time == other.mean_stopping_time
            && self.metrics == other.metrics
            && self.horizon_hits == other.horizon_hits
    }
}

/// Aggregates trial records (already in index order) into a report.
pub fn summarize(
    config: &ExperimentConfig,
    rule: ResolvedRule,
    trials: &[TrialRecord],
    wall_time_secs: f64,
) -> Result<ExperimentReport> {
    let times: Vec<f64> = trials.iter().map(|t| t.stopping_time as f64).collect();
    let mean_stopping_time = MetricEstimate::from_samples(&times)
        .ok_or_else(|| Error::invalid("replications", "no trials to summarize"))?;
    let counts: Vec<ConfusionCounts> = trials.iter().map(|t| t.counts).collect();
    let metrics = config
        .metrics
        .iter()
        .map(|&kind| {
            aggregate(kind, &counts, config.truth.len())
                .map(|estimate| MetricRecord {
                    metric: kind,
                    estimate,
                })
                .map_err(|e| {
                    e.context(format!(
                        "{} rule, J={}, |A|={}, {} replications, seed {}",
                        rule.name(),
                        config.j(),
                        config.truth.len(),
                        config.replications,
                        config.master_seed
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        config: config.clone(),
        rule,
        mean_stopping_time,
        metrics,
        horizon_hits: trials.iter().filter(|t| t.horizon_hit).count(),
        wall_time_secs,
    })
}

/// Runs trials on a thread pool of a chosen size (or rayon's global pool).
#[derive(Default)]
pub struct Engine {
    pool: Option<rayon::ThreadPool>,
}

impl Engine {
    /// `workers = None` uses the global rayon pool.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let pool = match workers {
            None => None,
            Some(0) => return Err(Error::invalid("workers", "must be at least 1")),
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Pool(e.to_string()))?,
            ),
        };
        Ok(Engine { pool })
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// All trials of an experiment, in index order.
    pub fn run_trials(
        &self,
        config: &ExperimentConfig,
    ) -> Result<(ResolvedRule, Vec<TrialRecord>)> {
        let rule = config.resolve_rule()?;
        let n = config.replications as u64;
        let trials = self.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| execute(config, &rule, i))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok((rule, trials))
    }

    pub fn run_experiment(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let start = Instant::now();
        let (rule, trials) = self.run_trials(config)?;
        summarize(config, rule, &trials, start.elapsed().as_secs_f64())
    }

    /// Runs a rule at formula thresholds for each budget and compares the
    /// mean stopping time with its first-order approximation.
    pub fn asymptotic_sweep(
        &self,
        base: &ExperimentConfig,
        budgets: &[ErrorBudget],
        reps_per_point: usize,
    ) -> Result<SweepReport> {
        let ab = eta(&base.profile, &base.truth);
        let rows = budgets
            .iter()
            .map(|&budget| {
                let config = ExperimentConfig {
                    rule: base.rule.with_auto_thresholds(),
                    budget,
                    replications: reps_per_point,
                    ..base.clone()
                };
                let report = self.run_experiment(&config)?;
                let kappa = match report.rule {
                    ResolvedRule::Gap(_) => kappa_gap(budget, ab.eta0, ab.eta1)?,
                    ResolvedRule::GapIntersection(r) => {
                        kappa_gi(budget, ab.eta0, ab.eta1, base.truth.len(), r.l, r.u)?
                    }
                    other => {
                        return Err(Error::invalid(
                            "rule",
                            format!("no first-order benchmark for the {} rule", other.name()),
                        ))
                    }
                };
                let et = report.mean_stopping_time;
                Ok(SweepRow {
                    alpha: budget.alpha(),
                    beta: budget.beta(),
                    thresholds: report.rule.thresholds(),
                    mean_stopping_time: et,
                    kappa,
                    ratio: et.value / kappa,
                    horizon_hits: report.horizon_hits,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepReport {
            rule: base.rule.name().to_string(),
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub thresholds: Vec<f64>,
    pub mean_stopping_time: MetricEstimate,
    pub kappa: f64,
    /// Mean stopping time over `kappa`.
    pub ratio: f64,
    /// Nonzero marks a row whose mean stopping time is truncated.
    pub horizon_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rule: String,
    pub rows: Vec<SweepRow>,
}
