//! Per-stream hypothesis pairs.
//!
//! Each stream carries a simple null `P0` and a simple alternative `P1` from
//! a family with closed-form densities. Observations are scalar. The
//! log-likelihood ratio of a stream after `n` i.i.d. observations is the sum
//! of the per-observation increments returned by [`StreamModel::llr_increment`].

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution family of a stream. Gaussian streams have unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianMean,
    Bernoulli,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianMean => "gaussian-mean",
            Family::Bernoulli => "bernoulli",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which hypothesis generates the data of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Null,
    Alt,
}

/// A null/alternative pair for one stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct StreamModel {
    family: Family,
    null: f64,
    alt: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: Family,
    null: f64,
    alt: f64,
}

impl TryFrom<RawModel> for StreamModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        StreamModel::new(raw.family, raw.null, raw.alt)
    }
}

impl From<StreamModel> for RawModel {
    fn from(m: StreamModel) -> Self {
        RawModel {
            family: m.family,
            null: m.null,
            alt: m.alt,
        }
    }
}

impl StreamModel {
    pub fn new(family: Family, null: f64, alt: f64) -> Result<Self> {
        if !null.is_finite() || !alt.is_finite() {
            return Err(Error::invalid("model", "parameters must be finite"));
        }
        if null == alt {
            return Err(Error::invalid(
                "model",
                format!(
                    "null and alternative parameters are both {null}; distributions must differ"
                ),
            ));
        }
        if family == Family::Bernoulli {
            for p in [null, alt] {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::invalid(
                        "model",
                        format!("bernoulli parameter {p} must lie strictly inside (0, 1)"),
                    ));
                }
            }
        }
        Ok(StreamModel { family, null, alt })
    }

    /// `N(null, 1)` against `N(alt, 1)`.
    pub fn gaussian(null: f64, alt: f64) -> Result<Self> {
        Self::new(Family::GaussianMean, null, alt)
    }

    pub fn bernoulli(null: f64, alt: f64) -> Result<Self> {
        Self::new(Family::Bernoulli, null, alt)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn null_param(&self) -> f64 {
        self.null
    }

    pub fn alt_param(&self) -> f64 {
        self.alt
    }

    /// The same pair with the roles of null and alternative exchanged.
    pub fn swapped(&self) -> Self {
        StreamModel {
            family: self.family,
            null: self.alt,
            alt: self.null,
        }
    }

    /// `log f1(x) - log f0(x)` for one observation.
    pub fn llr_increment(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::GaussianMean if x.is_finite() => Ok(self.llr_unchecked(x)),
            Family::Bernoulli if x == 0.0 || x == 1.0 => Ok(self.llr_unchecked(x)),
            family => Err(Error::Domain {
                family: family.name(),
                value: x,
            }),
        }
    }

    #[inline]
    fn llr_unchecked(&self, x: f64) -> f64 {
        match self.family {
            Family::GaussianMean => {
                (self.alt - self.null) * x - 0.5 * (self.alt * self.alt - self.null * self.null)
            }
            Family::Bernoulli => {
                if x == 1.0 {
                    (self.alt / self.null).ln()
                } else {
                    ((1.0 - self.alt) / (1.0 - self.null)).ln()
                }
            }
        }
    }

    /// One draw from `P0` or `P1`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, state: Hypothesis, rng: &mut R) -> f64 {
        let param = match state {
            Hypothesis::Null => self.null,
            Hypothesis::Alt => self.alt,
        };
        match self.family {
            Family::GaussianMean => {
                let z: f64 = rng.sample(StandardNormal);
                param + z
            }
            Family::Bernoulli => {
                if rng.random_bool(param) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Draws one observation and returns `(x, llr increment)`.
    #[inline]
    pub fn sample_with_llr<R: Rng + ?Sized>(&self, state: Hypothesis, rng: &mut R) -> (f64, f64) {
        let x = self.sample(state, rng);
        (x, self.llr_unchecked(x))
    }

    /// Closed-form Kullback-Leibler numbers and LLR variances.
    pub fn info_numbers(&self) -> InfoNumbers {
        match self.family {
            Family::GaussianMean => {
                let d2 = (self.alt - self.null).powi(2);
                InfoNumbers {
                    i0: 0.5 * d2,
                    i1: 0.5 * d2,
                    v0: d2,
                    v1: d2,
                }
            }
            Family::Bernoulli => {
                let (p0, p1) = (self.null, self.alt);
                let up = (p1 / p0).ln();
                let down = ((1.0 - p1) / (1.0 - p0)).ln();
                let spread = (up - down).powi(2);
                InfoNumbers {
                    i0: -(p0 * up + (1.0 - p0) * down),
                    i1: p1 * up + (1.0 - p1) * down,
                    v0: p0 * (1.0 - p0) * spread,
                    v1: p1 * (1.0 - p1) * spread,
                }
            }
        }
    }
}

/// Per-observation information numbers of a stream, in nats.
///
/// `i0 = E0[-llr]`, `i1 = E1[llr]`, and `v0`, `v1` the matching variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoNumbers {
    pub i0: f64,
    pub i1: f64,
    pub v0: f64,
    pub v1: f64,
}

/// The ordered collection of stream models, `J >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<StreamModel>", into = "Vec<StreamModel>")]
pub struct StreamProfile {
    models: Vec<StreamModel>,
}

impl TryFrom<Vec<StreamModel>> for StreamProfile {
    type Error = Error;

    fn try_from(models: Vec<StreamModel>) -> Result<Self> {
        StreamProfile::new(models)
    }
}

impl From<StreamProfile> for Vec<StreamModel> {
    fn from(p: StreamProfile) -> Self {
        p.models
    }
}

impl StreamProfile {
    pub fn new(models: Vec<StreamModel>) -> Result<Self> {
        if models.len() < 2 {
            return Err(Error::invalid(
                "J",
                format!("need at least 2 streams, got {}", models.len()),
            ));
        }
        Ok(StreamProfile { models })
    }

    pub fn homogeneous(model: StreamModel, j: usize) -> Result<Self> {
        Self::new(vec![model; j])
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[StreamModel] {
        &self.models
    }

    pub fn model(&self, j: usize) -> &StreamModel {
        &self.models[j]
    }

    /// The common model when every stream shares one.
    pub fn as_homogeneous(&self) -> Option<&StreamModel> {
        let first = &self.models[0];
        self.models.iter().all(|m| m == first).then_some(first)
    }
}

/// Set of stream indices (0-based) whose alternative is true.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalSet {
    members: BTreeSet<usize>,
    j: usize,
}

impl SignalSet {
    /// Builds a set over `j` streams; indices must be distinct and below `j`.
    pub fn new<I: IntoIterator<Item = usize>>(indices: I, j: usize) -> Result<Self> {
        let mut members = BTreeSet::new();
        for idx in indices {
            if idx >= j {
                return Err(Error::IndexOutOfRange { index: idx, len: j });
            }
            if !members.insert(idx) {
                return Err(Error::invalid(
                    "signal set",
                    format!("duplicate stream index {idx}"),
                ));
            }
        }
        Ok(SignalSet { members, j })
    }

    /// The first `count` streams.
    pub fn first(count: usize, j: usize) -> Result<Self> {
        if count > j {
            return Err(Error::invalid(
                "signal count",
                format!("{count} signals requested for {j} streams"),
            ));
        }
        Self::new(0..count, j)
    }

    pub fn empty(j: usize) -> Self {
        SignalSet {
            members: BTreeSet::new(),
            j,
        }
    }

    pub fn universe(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.contains(&idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn complement(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.j).filter(move |i| !self.members.contains(i))
    }

    pub fn state_of(&self, idx: usize) -> Hypothesis {
        if self.contains(idx) {
            Hypothesis::Alt
        } else {
            Hypothesis::Null
        }
    }
}

/// Worst-case information numbers over the noise and signal streams of a
/// signal set. An empty side is reported as `+inf` and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta {
    pub eta0: f64,
    pub eta1: f64,
    pub noise_empty: bool,
    pub signal_empty: bool,
}

pub fn eta(profile: &StreamProfile, a: &SignalSet) -> Eta {
    let mut eta0 = f64::INFINITY;
    let mut eta1 = f64::INFINITY;
    for (j, model) in profile.models().iter().enumerate() {
        let info = model.info_numbers();
        if a.contains(j) {
            eta1 = eta1.min(info.i1);
        } else {
            eta0 = eta0.min(info.i0);
        }
    }
    Eta {
        eta0,
        eta1,
        noise_empty: a.len() == profile.len(),
        signal_empty: a.is_empty(),
    }
}
