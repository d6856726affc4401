//! Closed-form thresholds and first-order expected sample sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target levels for the type 1 (`alpha`) and type 2 (`beta`) metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct ErrorBudget {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawBudget> for ErrorBudget {
    type Error = Error;

    fn try_from(raw: RawBudget) -> Result<Self> {
        ErrorBudget::new(raw.alpha, raw.beta)
    }
}

impl ErrorBudget {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(
                    name,
                    format!("{v} must lie strictly in (0, 1)"),
                ));
            }
        }
        Ok(ErrorBudget { alpha, beta })
    }

    pub fn symmetric(level: f64) -> Result<Self> {
        Self::new(level, level)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

fn check_c1(c1: f64) -> Result<()> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::invalid("C1", format!("{c1} must be positive")));
    }
    Ok(())
}

/// Gap-rule threshold `|log((α/C1) ∧ (β/C1))| + log(m(J - m))`.
pub fn gap_threshold(budget: ErrorBudget, m: usize, j: usize, c1: f64) -> Result<f64> {
    if m == 0 || m >= j {
        return Err(Error::invalid(
            "m",
            format!("need 1 <= m <= J-1, got m={m}, J={j}"),
        ));
    }
    check_c1(c1)?;
    let level = (budget.alpha / c1).min(budget.beta / c1);
    Ok(level.ln().abs() + ((m * (j - m)) as f64).ln())
}

/// The four gap-intersection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiThresholds {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Gap-intersection thresholds for bounds `l < u` on the number of signals:
///
/// ```text
/// a = |log(β/C1)| + log J          b = |log(α/C1)| + log J
/// c = |log(α/C1)| + log((J-l)J)    d = |log(β/C1)| + log(uJ)
/// ```
pub fn gi_thresholds(
    budget: ErrorBudget,
    j: usize,
    l: usize,
    u: usize,
    c1: f64,
) -> Result<GiThresholds> {
    if l >= u || u > j {
        return Err(Error::invalid(
            "bounds",
            format!("need 0 <= l < u <= J, got l={l}, u={u}, J={j}"),
        ));
    }
    check_c1(c1)?;
    let la = (budget.alpha / c1).ln().abs();
    let lb = (budget.beta / c1).ln().abs();
    let jf = j as f64;
    Ok(GiThresholds {
        a: lb + jf.ln(),
        b: la + jf.ln(),
        c: la + ((j - l) as f64 * jf).ln(),
        d: lb + (u as f64 * jf).ln(),
    })
}

/// First-order expected sample size of the gap rule,
/// `|log(α ∧ β)| / (η0 + η1)`.
pub fn kappa_gap(budget: ErrorBudget, eta0: f64, eta1: f64) -> Result<f64> {
    if !(eta0 + eta1 > 0.0) {
        return Err(Error::invalid("eta", "eta0 + eta1 must be positive"));
    }
    Ok(budget.alpha.min(budget.beta).ln().abs() / (eta0 + eta1))
}

/// First-order expected sample size of the gap-intersection rule for a
/// signal set of size `size_a` in `[l, u]`.
pub fn kappa_gi(
    budget: ErrorBudget,
    eta0: f64,
    eta1: f64,
    size_a: usize,
    l: usize,
    u: usize,
) -> Result<f64> {
    if size_a < l || size_a > u {
        return Err(Error::invalid(
            "signal count",
            format!("|A| = {size_a} lies outside [{l}, {u}]"),
        ));
    }
    if !(eta0 > 0.0 && eta1 > 0.0) {
        return Err(Error::invalid("eta", "eta0 and eta1 must be positive"));
    }
    let la = budget.alpha.ln().abs();
    let lb = budget.beta.ln().abs();
    let both = eta0 + eta1;
    Ok(if size_a == l {
        (lb / eta0).max(la / both)
    } else if size_a < u {
        (lb / eta0).max(la / eta1)
    } else {
        (la / eta1).max(lb / both)
    })
}
