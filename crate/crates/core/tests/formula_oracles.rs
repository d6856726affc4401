//! Closed-form thresholds and sample-size approximations against
//! independently written arithmetic on a 100-point parameter grid.

mod common;

use common::{parameter_grid, GridPoint};
use seqmt::thresholds::{gap_threshold, gi_thresholds, kappa_gap, kappa_gi, ErrorBudget};

const TOL: f64 = 1e-9;

fn budget(p: &GridPoint) -> ErrorBudget {
    ErrorBudget::new(p.alpha, p.beta).unwrap()
}

#[test]
fn gap_threshold_oracle() {
    for p in parameter_grid() {
        for m in [1, p.j / 2, p.j - 1]
            .into_iter()
            .filter(|&m| m >= 1 && m < p.j)
        {
            let expected = common::gap_c(p.alpha, p.beta, m, p.j, p.c1);
            let got = gap_threshold(budget(&p), m, p.j, p.c1).unwrap();
            assert!(
                (got - expected).abs() < TOL,
                "m={m} J={}: {got} vs {expected}",
                p.j
            );
        }
    }
}

#[test]
fn gi_thresholds_oracle() {
    for p in parameter_grid() {
        let j = p.j;
        for (l, u) in [(0, j), (1, j - 1), (j / 3, j / 3 + 1), (0, 1)] {
            if l >= u || u > j {
                continue;
            }
            let t = gi_thresholds(budget(&p), j, l, u, p.c1).unwrap();
            let e = common::gi_abcd(p.alpha, p.beta, j, l, u, p.c1);
            for (got, want) in [t.a, t.b, t.c, t.d].into_iter().zip(e) {
                assert!(
                    (got - want).abs() < TOL,
                    "l={l} u={u} J={j}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn kappa_gap_oracle() {
    for p in parameter_grid() {
        let expected = common::kappa_gap(p.alpha, p.beta, p.eta0, p.eta1);
        let got = kappa_gap(budget(&p), p.eta0, p.eta1).unwrap();
        assert!((got - expected).abs() < TOL * expected.max(1.0));
    }
}

#[test]
fn kappa_gi_oracle() {
    for p in parameter_grid() {
        let (l, u) = (1, p.j - 1);
        if l >= u {
            continue;
        }
        for size in [l, (l + u) / 2, u] {
            let expected = common::kappa_gi(p.alpha, p.beta, p.eta0, p.eta1, size, l, u);
            let got = kappa_gi(budget(&p), p.eta0, p.eta1, size, l, u).unwrap();
            assert!(
                (got - expected).abs() < TOL * expected.max(1.0),
                "size {size} l {l} u {u}"
            );
        }
    }
}

#[test]
fn larger_constants_raise_thresholds() {
    for p in parameter_grid() {
        let b = budget(&p);
        let m = (p.j / 2).max(1);
        let lo = gap_threshold(b, m, p.j, 1.0).unwrap();
        let hi = gap_threshold(b, m, p.j, p.c1 + 1.0).unwrap();
        assert!(hi > lo);
    }
}
