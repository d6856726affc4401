//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqmt::model::StreamModel;

/// Step-up procedure in its counting form: the largest `k` with at least `k`
/// p-values at or below `k alpha / J`, then every such p-value is rejected.
pub fn bh_oracle(p: &[f64], alpha: f64) -> Vec<usize> {
    let j = p.len();
    for k in (1..=j).rev() {
        let cut = k as f64 * alpha / j as f64;
        let below: Vec<usize> = (0..j).filter(|&i| p[i] <= cut).collect();
        if below.len() >= k {
            return below;
        }
    }
    Vec::new()
}

/// Random p-vectors of length 1..=30; a third use a coarse grid so ties and
/// exact boundary hits occur.
pub fn random_pvectors(count: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|trial| {
            let j = rng.random_range(1..=30);
            let alpha = [0.01, 0.05, 0.1, 0.2, 0.5][trial % 5];
            let p = (0..j)
                .map(|_| {
                    let u: f64 = rng.random();
                    match trial % 3 {
                        0 => (u * 20.0).floor() / 200.0,
                        1 => u * u * u,
                        _ => u,
                    }
                })
                .collect();
            (p, alpha)
        })
        .collect()
}

/// Composite Simpson rule on `[lo, hi]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + k as f64 * h);
    }
    acc * h / 3.0
}

pub fn normal_pdf(x: f64, mean: f64) -> f64 {
    (-(x - mean) * (x - mean) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mean and variance of the LLR increment under `N(mean, 1)` by quadrature.
pub fn gaussian_moments(model: &StreamModel, mean: f64) -> (f64, f64) {
    let llr = |x: f64| model.llr_increment(x).unwrap();
    let (lo, hi) = (mean - 14.0, mean + 14.0);
    let m1 = simpson(|x| llr(x) * normal_pdf(x, mean), lo, hi, 40_000);
    let var = simpson(
        |x| (llr(x) - m1).powi(2) * normal_pdf(x, mean),
        lo,
        hi,
        40_000,
    );
    (m1, var)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

/// `-ln(x)` for `x <= 1`, else `ln(x)`.
pub fn abs_log(x: f64) -> f64 {
    if x <= 1.0 {
        -x.ln()
    } else {
        x.ln()
    }
}

pub fn gap_c(alpha: f64, beta: f64, m: usize, j: usize, c1: f64) -> f64 {
    let level = if alpha < beta { alpha } else { beta } / c1;
    abs_log(level) + (m as f64).ln() + ((j - m) as f64).ln()
}

/// `(a, b, c, d)` of the gap-intersection rule.
pub fn gi_abcd(alpha: f64, beta: f64, j: usize, l: usize, u: usize, c1: f64) -> [f64; 4] {
    let la = abs_log(alpha / c1);
    let lb = abs_log(beta / c1);
    let lj = (j as f64).ln();
    [
        lb + lj,
        la + lj,
        la + ((j - l) as f64).ln() + lj,
        lb + (u as f64).ln() + lj,
    ]
}

pub fn kappa_gap(alpha: f64, beta: f64, eta0: f64, eta1: f64) -> f64 {
    abs_log(alpha).max(abs_log(beta)) / (eta0 + eta1)
}

pub fn kappa_gi(
    alpha: f64,
    beta: f64,
    eta0: f64,
    eta1: f64,
    size: usize,
    l: usize,
    u: usize,
) -> f64 {
    let la = abs_log(alpha);
    let lb = abs_log(beta);
    if size == l {
        f64::max(lb / eta0, la / (eta0 + eta1))
    } else if size == u {
        f64::max(la / eta1, lb / (eta0 + eta1))
    } else {
        f64::max(lb / eta0, la / eta1)
    }
}

pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub j: usize,
    pub c1: f64,
    pub eta0: f64,
    pub eta1: f64,
}

/// 100 random parameter points spanning many orders of magnitude.
pub fn parameter_grid() -> Vec<GridPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..100)
        .map(|_| GridPoint {
            alpha: 10f64.powf(-rng.random_range(0.5..12.0)),
            beta: 10f64.powf(-rng.random_range(0.5..12.0)),
            j: rng.random_range(2..500),
            c1: if rng.random_bool(0.5) {
                1.0
            } else {
                rng.random_range(1.0..50.0)
            },
            eta0: rng.random_range(0.01..3.0),
            eta1: rng.random_range(0.01..3.0),
        })
        .collect()
}
