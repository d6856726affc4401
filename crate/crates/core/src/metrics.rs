//! Multiple-testing error metrics.
//!
//! Per-trial contributions are computed from [`ConfusionCounts`] and averaged
//! over replications in trial order. Conditional metrics (pFDR, pFNR) only
//! average over trials in their conditioning event.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SignalSet;

/// False positives `v`, false negatives `w`, and rejections `r` among `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    v: usize,
    w: usize,
    r: usize,
    j: usize,
}

impl ConfusionCounts {
    pub fn new(v: usize, w: usize, r: usize, j: usize) -> Result<Self> {
        if v > r || r > j {
            return Err(Error::invalid(
                "counts",
                format!("need v <= r <= j, got v={v}, r={r}, j={j}"),
            ));
        }
        if w > j - r {
            return Err(Error::invalid(
                "counts",
                format!("need w <= j - r, got w={w}, r={r}, j={j}"),
            ));
        }
        Ok(ConfusionCounts { v, w, r, j })
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Number of accepted nulls, `j - r`.
    pub fn accepted(&self) -> usize {
        self.j - self.r
    }
}

/// Confusion counts of a rejected set against the true signal set.
pub fn confusion(rejected: &SignalSet, truth: &SignalSet, j: usize) -> Result<ConfusionCounts> {
    for set in [rejected, truth] {
        if set.universe() != j {
            return Err(Error::LengthMismatch {
                expected: j,
                got: set.universe(),
            });
        }
        if let Some(bad) = set.iter().find(|&i| i >= j) {
            return Err(Error::IndexOutOfRange { index: bad, len: j });
        }
    }
    let r = rejected.len();
    let v = rejected.iter().filter(|&i| !truth.contains(i)).count();
    let w = truth.iter().filter(|&i| !rejected.contains(i)).count();
    ConfusionCounts::new(v, w, r, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// `P(V >= 1)`
    Fwe1,
    /// `P(W >= 1)`
    Fwe2,
    /// `E[V / (R ∨ 1)]`
    Fdr,
    /// `E[W / ((J - R) ∨ 1)]`
    Fnr,
    /// `E[V / R | R >= 1]`
    Pfdr,
    /// `E[W / (J - R) | J - R >= 1]`
    Pfnr,
    /// `E[V / J]`
    Pcer,
    /// `E[V / m]`, `m` the number of signals
    Fpr,
    /// `E[V]`
    Pfer,
    /// `E[W]`
    Pfer2,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::Fwe1,
        MetricKind::Fwe2,
        MetricKind::Fdr,
        MetricKind::Fnr,
        MetricKind::Pfdr,
        MetricKind::Pfnr,
        MetricKind::Pcer,
        MetricKind::Fpr,
        MetricKind::Pfer,
        MetricKind::Pfer2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Fwe1 => "fwe1",
            MetricKind::Fwe2 => "fwe2",
            MetricKind::Fdr => "fdr",
            MetricKind::Fnr => "fnr",
            MetricKind::Pfdr => "pfdr",
            MetricKind::Pfnr => "pfnr",
            MetricKind::Pcer => "pcer",
            MetricKind::Fpr => "fpr",
            MetricKind::Pfer => "pfer",
            MetricKind::Pfer2 => "pfer2",
        }
    }

    pub fn is_conditional(self) -> bool {
        matches!(self, MetricKind::Pfdr | MetricKind::Pfnr)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("metric", format!("unknown metric `{s}`")))
    }
}

/// Contribution of one trial to a metric; `None` when a conditional metric's
/// event fails (or `fpr` has a zero divisor).
pub fn per_trial(kind: MetricKind, c: &ConfusionCounts, fpr_divisor: usize) -> Option<f64> {
    let v = c.v as f64;
    let w = c.w as f64;
    let indicator = |x: usize| if x >= 1 { 1.0 } else { 0.0 };
    match kind {
        MetricKind::Fwe1 => Some(indicator(c.v)),
        MetricKind::Fwe2 => Some(indicator(c.w)),
        MetricKind::Fdr => Some(v / c.r.max(1) as f64),
        MetricKind::Fnr => Some(w / c.accepted().max(1) as f64),
        MetricKind::Pfdr => (c.r >= 1).then(|| v / c.r as f64),
        MetricKind::Pfnr => (c.accepted() >= 1).then(|| w / c.accepted() as f64),
        MetricKind::Pcer => Some(v / c.j as f64),
        MetricKind::Fpr => (fpr_divisor >= 1).then(|| v / fpr_divisor as f64),
        MetricKind::Pfer => Some(v),
        MetricKind::Pfer2 => Some(w),
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub value: f64,
    /// Sample standard deviation over `sqrt(n_effective)`.
    pub se: f64,
    /// Number of trials that entered the mean.
    pub n_effective: usize,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl MetricEstimate {
    /// Mean and standard error of a sample, summed in the order given.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mut total = CompensatedSum::default();
        samples.iter().for_each(|&x| total.add(x));
        let mean = total.total() / n as f64;
        let se = if n > 1 {
            let mut ss = CompensatedSum::default();
            samples
                .iter()
                .for_each(|&x| ss.add((x - mean) * (x - mean)));
            (ss.total() / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Some(MetricEstimate {
            value: mean,
            se,
            n_effective: n,
        })
    }
}

/// Averages a metric over trials in order.
pub fn aggregate(
    kind: MetricKind,
    trials: &[ConfusionCounts],
    fpr_divisor: usize,
) -> Result<MetricEstimate> {
    if trials.is_empty() {
        return Err(Error::invalid(
            "trials",
            "cannot aggregate an empty trial set",
        ));
    }
    let samples: Vec<f64> = trials
        .iter()
        .filter_map(|c| per_trial(kind, c, fpr_divisor))
        .collect();
    MetricEstimate::from_samples(&samples).ok_or(Error::EmptyConditioning {
        metric: kind.name(),
        event: match kind {
            MetricKind::Pfdr => "R >= 1",
            MetricKind::Pfnr => "J - R >= 1",
            MetricKind::Fpr => "m >= 1",
            _ => "always",
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleClass {
    Gap,
    GapIntersection,
}

impl RuleClass {
    pub fn name(self) -> &'static str {
        match self {
            RuleClass::Gap => "gap",
            RuleClass::GapIntersection => "gap-intersection",
        }
    }
}

/// Constants with `MTE_i <= C1_i · FWE_i` on the rule and
/// `MTE_i >= C2 · FWE_i` on every procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1_type1: f64,
    pub c1_type2: f64,
    pub c2: f64,
}

impl BoundConstants {
    /// The larger of the two upper-bound constants, used to rescale both
    /// error levels of a threshold formula.
    pub fn c1(&self) -> f64 {
        self.c1_type1.max(self.c1_type2)
    }
}

/// Sizes a bound-constant lookup needs. `m` is the number of signals for the
/// gap rule (and the `fpr` divisor for either class).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemShape {
    pub j: usize,
    pub m: usize,
    pub l: usize,
    pub u: usize,
}

/// Bound constants of a metric pair for a rule class.
///
/// Type 1 and type 2 versions of a metric share constants; `fwe1`/`fwe2`,
/// `fdr`/`fnr`, `pfdr`/`pfnr`, and `pfer`/`pfer2` each name the pair.
pub fn bound_constants(
    kind: MetricKind,
    class: RuleClass,
    shape: ProblemShape,
) -> Result<BoundConstants> {
    let ProblemShape { j, m, l, u } = shape;
    let jf = j as f64;
    let (max_rejected, max_accepted) = match class {
        RuleClass::Gap => {
            if m == 0 || m >= j {
                return Err(Error::invalid(
                    "m",
                    format!("gap rule needs 1 <= m <= J-1, got m={m}, J={j}"),
                ));
            }
            (m as f64, (j - m) as f64)
        }
        RuleClass::GapIntersection => {
            if l >= u || u > j {
                return Err(Error::invalid(
                    "bounds",
                    format!("need 0 <= l < u <= J, got l={l}, u={u}, J={j}"),
                ));
            }
            (u as f64, (j - l) as f64)
        }
    };
    let bc = |c1_type1, c1_type2, c2| BoundConstants {
        c1_type1,
        c1_type2,
        c2,
    };
    Ok(match kind {
        MetricKind::Fwe1 | MetricKind::Fwe2 => bc(1.0, 1.0, 1.0),
        MetricKind::Fdr | MetricKind::Fnr => bc(1.0, 1.0, 1.0 / jf),
        MetricKind::Pfdr | MetricKind::Pfnr => {
            if class == RuleClass::GapIntersection && (l == 0 || u == j) {
                return Err(Error::Restricted {
                    metric: kind.name(),
                    rule: class.name(),
                    reason: "conditional metrics need prior bounds 1 <= l < u <= J-1 \
                             (P(R = 0) or P(R = J) may be positive otherwise)",
                });
            }
            bc(1.0, 1.0, 1.0 / jf)
        }
        MetricKind::Pfer | MetricKind::Pfer2 => bc(max_rejected, max_accepted, 1.0),
        MetricKind::Pcer => bc(max_rejected / jf, max_accepted / jf, 1.0 / jf),
        MetricKind::Fpr => {
            if m == 0 || m >= j {
                return Err(Error::invalid(
                    "m",
                    format!("fpr needs a signal count 1 <= m <= J-1, got m={m}, J={j}"),
                ));
            }
            let (mf, rest) = (m as f64, (j - m) as f64);
            bc(
                max_rejected / mf,
                max_accepted / rest,
                (1.0 / mf).min(1.0 / rest),
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(v: usize, w: usize, r: usize, j: usize) -> ConfusionCounts {
        ConfusionCounts::new(v, w, r, j).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let truth = SignalSet::new([0, 1], 4).unwrap();
        let rej = SignalSet::new([1, 2], 4).unwrap();
        assert_eq!(confusion(&rej, &truth, 4).unwrap(), cc(1, 1, 2, 4));
        assert_eq!(confusion(&truth, &truth, 4).unwrap(), cc(0, 0, 2, 4));
        let inverted = SignalSet::new([2, 3], 4).unwrap();
        assert_eq!(confusion(&inverted, &truth, 4).unwrap(), cc(2, 2, 2, 4));
        assert!(confusion(&rej, &truth, 3).is_err());
    }

    #[test]
    fn counts_invariants() {
        assert!(ConfusionCounts::new(2, 0, 1, 4).is_err());
        assert!(ConfusionCounts::new(0, 0, 5, 4).is_err());
        // w = 2 with r = j leaves no accepted nulls
        assert!(ConfusionCounts::new(0, 2, 4, 4).is_err());
    }

    #[test]
    fn per_trial_examples() {
        assert_eq!(per_trial(MetricKind::Fdr, &cc(1, 0, 2, 4), 2), Some(0.5));
        assert_eq!(per_trial(MetricKind::Pfdr, &cc(0, 0, 0, 4), 2), None);
        assert_eq!(per_trial(MetricKind::Fdr, &cc(0, 0, 0, 4), 2), Some(0.0));
        assert_eq!(per_trial(MetricKind::Fnr, &cc(0, 1, 2, 4), 2), Some(0.5));
        assert_eq!(per_trial(MetricKind::Pfnr, &cc(0, 0, 4, 4), 2), None);
        assert_eq!(per_trial(MetricKind::Pcer, &cc(1, 0, 2, 4), 2), Some(0.25));
        assert_eq!(per_trial(MetricKind::Fpr, &cc(1, 0, 2, 4), 2), Some(0.5));
        assert_eq!(per_trial(MetricKind::Pfer, &cc(2, 1, 3, 4), 2), Some(2.0));
        assert_eq!(per_trial(MetricKind::Pfer2, &cc(2, 1, 3, 4), 2), Some(1.0));
        assert_eq!(per_trial(MetricKind::Fwe2, &cc(0, 1, 2, 4), 2), Some(1.0));
    }

    #[test]
    fn aggregate_examples() {
        let trials = [cc(1, 0, 2, 4), cc(0, 0, 1, 4), cc(1, 0, 1, 4)];
        let fdr = aggregate(MetricKind::Fdr, &trials, 2).unwrap();
        assert!((fdr.value - 0.5).abs() < 1e-15);
        assert_eq!(fdr.n_effective, 3);

        let trials = [cc(1, 0, 2, 4), cc(0, 0, 0, 4), cc(1, 0, 1, 4)];
        let pfdr = aggregate(MetricKind::Pfdr, &trials, 2).unwrap();
        assert!((pfdr.value - 0.75).abs() < 1e-15);
        assert_eq!(pfdr.n_effective, 2);

        let zeros = [cc(0, 0, 1, 4); 5];
        let fwe = aggregate(MetricKind::Fwe1, &zeros, 2).unwrap();
        assert_eq!((fwe.value, fwe.se), (0.0, 0.0));
    }

    #[test]
    fn aggregate_empty_conditioning_names_metric() {
        let trials = [cc(0, 0, 0, 4); 3];
        let err = aggregate(MetricKind::Pfdr, &trials, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::EmptyConditioning { metric: "pfdr", .. }
        ));
        assert!(err.to_string().contains("pfdr"));
        assert!(aggregate(MetricKind::Fdr, &[], 2).is_err());
    }

    #[test]
    fn standard_error_is_sd_over_root_n() {
        let trials = [
            cc(1, 0, 1, 2),
            cc(0, 0, 1, 2),
            cc(1, 0, 1, 2),
            cc(0, 0, 1, 2),
        ];
        let e = aggregate(MetricKind::Fwe1, &trials, 1).unwrap();
        // sample sd of (1,0,1,0) is sqrt(1/3)
        assert!((e.se - (1.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bound_constant_examples() {
        let shape = ProblemShape {
            j: 10,
            m: 5,
            l: 0,
            u: 0,
        };
        let fdr = bound_constants(MetricKind::Fdr, RuleClass::Gap, shape).unwrap();
        assert_eq!((fdr.c1_type1, fdr.c1_type2, fdr.c2), (1.0, 1.0, 0.1));
        let pfer = bound_constants(MetricKind::Pfer, RuleClass::Gap, shape).unwrap();
        assert_eq!((pfer.c1_type1, pfer.c1_type2, pfer.c2), (5.0, 5.0, 1.0));

        let gi = ProblemShape {
            j: 10,
            m: 4,
            l: 0,
            u: 7,
        };
        let err = bound_constants(MetricKind::Pfdr, RuleClass::GapIntersection, gi).unwrap_err();
        assert!(matches!(err, Error::Restricted { .. }));
        assert!(err.to_string().contains("1 <= l < u <= J-1"));
        let gi = ProblemShape {
            j: 10,
            m: 4,
            l: 2,
            u: 10,
        };
        assert!(bound_constants(MetricKind::Pfnr, RuleClass::GapIntersection, gi).is_err());
        let gi = ProblemShape {
            j: 10,
            m: 4,
            l: 2,
            u: 7,
        };
        let p = bound_constants(MetricKind::Pfdr, RuleClass::GapIntersection, gi).unwrap();
        assert_eq!((p.c1_type1, p.c2), (1.0, 0.1));
        let pfer = bound_constants(MetricKind::Pfer2, RuleClass::GapIntersection, gi).unwrap();
        assert_eq!((pfer.c1_type1, pfer.c1_type2), (7.0, 8.0));
    }

    #[test]
    fn metric_names_round_trip() {
        for k in MetricKind::ALL {
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
        assert!("fdrx".parse::<MetricKind>().is_err());
    }
}
