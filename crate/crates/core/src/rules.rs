//! Stopping and decision rules.
//!
//! Sequential rules sample every stream once per time step and stop the
//! first time their condition holds on the order statistics of the running
//! LLR vector:
//!
//! * [`GapRule`]: `m` signals known exactly. Stops once the gap between
//!   the `m`-th and `(m+1)`-th largest LLR reaches `c` and rejects the top `m`.
//! * [`GapIntersectionRule`]: between `l` and `u` signals. Stops at the
//!   first of three conditions (`tau1`, `tau2`, `tau3`) and rejects the top
//!   `p'` streams, where `p'` is the positive count clamped into `[l, u]`.
//! * [`IntersectionRule`]: stops once every LLR has left `(-a, b)`, rejects
//!   the positive streams. No prior on the number of signals.
//!
//! [`FixedSampleRule`] covers the fixed-sample baselines (Benjamini-Hochberg
//! step-up and "reject the `m` smallest p-values").

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{Family, Hypothesis, SignalSet, StreamModel, StreamProfile};
use crate::stats::{LlrState, OrderView};

/// What ended a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopTag {
    Gap,
    Tau1,
    Tau2,
    Tau3,
    Intersection,
    FixedSample,
    /// The horizon was reached before the rule fired.
    Horizon,
}

impl StopTag {
    pub fn name(self) -> &'static str {
        match self {
            StopTag::Gap => "gap",
            StopTag::Tau1 => "tau1",
            StopTag::Tau2 => "tau2",
            StopTag::Tau3 => "tau3",
            StopTag::Intersection => "intersection",
            StopTag::FixedSample => "fixed-sample",
            StopTag::Horizon => "horizon",
        }
    }
}

impl fmt::Display for StopTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stopping time and rejected set of one run of a procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub stopping_time: u64,
    pub rejected: SignalSet,
    pub stopped_by: StopTag,
}

impl Decision {
    pub fn horizon_hit(&self) -> bool {
        self.stopped_by == StopTag::Horizon
    }
}

/// A rule that decides when to stop from the current order statistics.
pub trait SequentialRule: Sync {
    /// Checks the rule's parameters against the number of streams.
    fn validate(&self, j: usize) -> Result<()>;

    /// The reason to stop now, if any.
    fn should_stop(&self, view: &OrderView) -> Option<StopTag>;

    /// Streams rejected when stopping at this view, in rank order.
    fn decide<'v>(&self, view: &'v OrderView) -> &'v [usize];
}

/// Gap rule for exactly `m` signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRule {
    pub m: usize,
    pub c: f64,
}

impl GapRule {
    pub fn new(m: usize, c: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "gap rule needs at least one signal"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(
                "c",
                format!("threshold {c} must be positive"),
            ));
        }
        Ok(GapRule { m, c })
    }
}

impl SequentialRule for GapRule {
    fn validate(&self, j: usize) -> Result<()> {
        if self.m == 0 || self.m >= j {
            return Err(Error::invalid(
                "m",
                format!("need 1 <= m <= J-1, got m={} with J={j}", self.m),
            ));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid("c", "threshold must be positive"));
        }
        Ok(())
    }

    #[inline]
    fn should_stop(&self, view: &OrderView) -> Option<StopTag> {
        (view.gap(self.m) >= self.c).then_some(StopTag::Gap)
    }

    fn decide<'v>(&self, view: &'v OrderView) -> &'v [usize] {
        view.top(self.m)
    }
}

/// Gap-intersection rule for between `l` and `u` signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapIntersectionRule {
    pub l: usize,
    pub u: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GapIntersectionRule {
    pub fn new(l: usize, u: usize, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let rule = GapIntersectionRule { l, u, a, b, c, d };
        rule.check_thresholds()?;
        if l >= u {
            return Err(Error::invalid("l", format!("need l < u, got l={l}, u={u}")));
        }
        Ok(rule)
    }

    fn check_thresholds(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("threshold {v} must be positive"),
                ));
            }
        }
        Ok(())
    }

    /// `(p ∨ l) ∧ u`.
    pub fn clamp_count(&self, p: usize) -> usize {
        p.max(self.l).min(self.u)
    }

    fn outside_band(&self, view: &OrderView) -> bool {
        view.sorted().iter().all(|&x| x <= -self.a || x >= self.b)
    }
}

impl SequentialRule for GapIntersectionRule {
    fn validate(&self, j: usize) -> Result<()> {
        if self.l >= self.u || self.u > j {
            return Err(Error::invalid(
                "bounds",
                format!(
                    "need 0 <= l < u <= J, got l={}, u={}, J={j}",
                    self.l, self.u
                ),
            ));
        }
        self.check_thresholds()
    }

    /// Lowest-numbered of `tau1`, `tau2`, `tau3` whose condition holds.
    fn should_stop(&self, view: &OrderView) -> Option<StopTag> {
        let (l, u) = (self.l, self.u);
        if view.stat(l + 1) <= -self.a && view.gap(l) >= self.c {
            return Some(StopTag::Tau1);
        }
        let p = view.positive_count();
        if l <= p && p <= u && self.outside_band(view) {
            return Some(StopTag::Tau2);
        }
        if view.stat(u) >= self.b && view.gap(u) >= self.d {
            return Some(StopTag::Tau3);
        }
        None
    }

    fn decide<'v>(&self, view: &'v OrderView) -> &'v [usize] {
        view.top(self.clamp_count(view.positive_count()))
    }
}

/// Intersection rule: stop once no LLR lies in `(-a, b)`, reject positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRule {
    pub a: f64,
    pub b: f64,
}

impl IntersectionRule {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let rule = IntersectionRule { a, b };
        rule.validate(2)?;
        Ok(rule)
    }
}

impl SequentialRule for IntersectionRule {
    fn validate(&self, _j: usize) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("threshold {v} must be positive"),
                ));
            }
        }
        Ok(())
    }

    fn should_stop(&self, view: &OrderView) -> Option<StopTag> {
        view.sorted()
            .iter()
            .all(|&x| x <= -self.a || x >= self.b)
            .then_some(StopTag::Intersection)
    }

    fn decide<'v>(&self, view: &'v OrderView) -> &'v [usize] {
        view.top(view.positive_count())
    }
}

/// Runs a sequential rule on freshly sampled data until it fires or the
/// horizon is reached.
///
/// At each time step every stream draws one observation, in stream order.
/// On horizon exhaustion the rule's decision at the horizon state is
/// returned, tagged [`StopTag::Horizon`].
pub fn run_sequential<S, R>(
    rule: &S,
    profile: &StreamProfile,
    truth: &SignalSet,
    horizon: u64,
    rng: &mut R,
) -> Result<Decision>
where
    S: SequentialRule + ?Sized,
    R: Rng + ?Sized,
{
    let j = profile.len();
    rule.validate(j)?;
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    check_truth(truth, j)?;

    let states: Vec<Hypothesis> = (0..j).map(|i| truth.state_of(i)).collect();
    let models = profile.models();
    let mut state = LlrState::new(j);
    let mut increments = vec![0.0; j];
    let mut view = OrderView::default();

    loop {
        for ((inc, model), &h) in increments.iter_mut().zip(models).zip(&states) {
            *inc = model.sample_with_llr(h, rng).1;
        }
        state.advance(&increments)?;
        view.refresh(state.lambda());
        let tag = match rule.should_stop(&view) {
            Some(tag) => tag,
            None if state.n() >= horizon => StopTag::Horizon,
            None => continue,
        };
        return Ok(Decision {
            stopping_time: state.n(),
            rejected: SignalSet::new(rule.decide(&view).iter().copied(), j)?,
            stopped_by: tag,
        });
    }
}

fn check_truth(truth: &SignalSet, j: usize) -> Result<()> {
    if truth.universe() != j {
        return Err(Error::invalid(
            "truth",
            format!(
                "signal set is over {} streams, profile has {j}",
                truth.universe()
            ),
        ));
    }
    Ok(())
}

/// Upper-tail standard normal probability `1 - Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// One-sided z-test p-value for a Gaussian-mean stream.
///
/// `sum` is the total of `n` observations. The test is in the direction of
/// the alternative mean: `1 - Φ((sum - n·μ0)/√n)` when `μ1 > μ0`.
pub fn p_value(sum: f64, n: u64, model: &StreamModel) -> Result<f64> {
    if model.family() != Family::GaussianMean {
        return Err(Error::Unsupported {
            family: model.family().name(),
            what: "z-test p-values",
        });
    }
    if n == 0 {
        return Err(Error::invalid(
            "n",
            "p-value needs at least one observation",
        ));
    }
    let nf = n as f64;
    let z = (sum - nf * model.null_param()) / nf.sqrt();
    Ok(if model.alt_param() > model.null_param() {
        normal_sf(z)
    } else {
        normal_sf(-z)
    })
}

fn ascending_p(pvalues: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pvalues.len()).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    order
}

/// Benjamini-Hochberg step-up at level `alpha`.
///
/// Rejects the `k` smallest p-values, `k = max{i : p_(i) <= i·alpha/J}`.
pub fn bh_decide(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let j = pvalues.len() as f64;
    let order = ascending_p(pvalues);
    let k = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank, &idx)| pvalues[idx] <= (rank + 1) as f64 * alpha / j)
        .map_or(0, |(rank, _)| rank + 1);
    order[..k].to_vec()
}

/// Indices of the `m` smallest p-values, ties to the lower index.
pub fn top_m_decide(pvalues: &[f64], m: usize) -> Vec<usize> {
    let mut order = ascending_p(pvalues);
    order.truncate(m);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FixedSampleKind {
    Bh { alpha: f64 },
    TopM { m: usize },
}

/// Fixed-sample baseline with `n` observations per stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedSampleRule {
    pub kind: FixedSampleKind,
    pub n: u64,
}

impl FixedSampleRule {
    pub fn bh(n: u64, alpha: f64) -> Result<Self> {
        let rule = FixedSampleRule {
            kind: FixedSampleKind::Bh { alpha },
            n,
        };
        rule.check()?;
        Ok(rule)
    }

    pub fn top_m(n: u64, m: usize) -> Result<Self> {
        let rule = FixedSampleRule {
            kind: FixedSampleKind::TopM { m },
            n,
        };
        rule.check()?;
        Ok(rule)
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "sample size must be at least 1"));
        }
        match self.kind {
            FixedSampleKind::Bh { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(Error::invalid(
                "alpha",
                format!("BH level {alpha} must lie in (0, 1)"),
            )),
            FixedSampleKind::TopM { m: 0 } => Err(Error::invalid("m", "top-m rule needs m >= 1")),
            _ => Ok(()),
        }
    }

    pub fn validate(&self, j: usize) -> Result<()> {
        self.check()?;
        if let FixedSampleKind::TopM { m } = self.kind {
            if m >= j {
                return Err(Error::invalid(
                    "m",
                    format!("need 1 <= m <= J-1, got m={m} with J={j}"),
                ));
            }
        }
        Ok(())
    }

    /// Per-stream sums of `n` observations, drawn time-major.
    pub fn sample_sums<R: Rng + ?Sized>(
        &self,
        profile: &StreamProfile,
        truth: &SignalSet,
        rng: &mut R,
    ) -> Vec<f64> {
        let states: Vec<Hypothesis> = (0..profile.len()).map(|i| truth.state_of(i)).collect();
        let mut sums = vec![0.0; profile.len()];
        for _ in 0..self.n {
            for ((sum, model), &h) in sums.iter_mut().zip(profile.models()).zip(&states) {
                *sum += model.sample(h, rng);
            }
        }
        sums
    }

    pub fn decide(&self, pvalues: &[f64]) -> Vec<usize> {
        match self.kind {
            FixedSampleKind::Bh { alpha } => bh_decide(pvalues, alpha),
            FixedSampleKind::TopM { m } => top_m_decide(pvalues, m),
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        profile: &StreamProfile,
        truth: &SignalSet,
        rng: &mut R,
    ) -> Result<Decision> {
        let j = profile.len();
        self.validate(j)?;
        check_truth(truth, j)?;
        let sums = self.sample_sums(profile, truth, rng);
        let pvalues = sums
            .iter()
            .zip(profile.models())
            .map(|(&s, model)| p_value(s, self.n, model))
            .collect::<Result<Vec<_>>>()?;
        Ok(Decision {
            stopping_time: self.n,
            rejected: SignalSet::new(self.decide(&pvalues), j)?,
            stopped_by: StopTag::FixedSample,
        })
    }
}
