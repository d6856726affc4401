//! Running log-likelihood ratios and their order statistics.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Cumulative LLR of every stream at time `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrState {
    n: u64,
    lambda: Vec<f64>,
}

impl LlrState {
    /// All-zero state at `n = 0`.
    pub fn new(j: usize) -> Self {
        LlrState {
            n: 0,
            lambda: vec![0.0; j],
        }
    }

    pub fn from_parts(n: u64, lambda: Vec<f64>) -> Self {
        LlrState { n, lambda }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Adds one increment per stream and moves time forward by one.
    pub fn advance(&mut self, increments: &[f64]) -> Result<()> {
        if increments.len() != self.lambda.len() {
            return Err(Error::LengthMismatch {
                expected: self.lambda.len(),
                got: increments.len(),
            });
        }
        for (l, inc) in self.lambda.iter_mut().zip(increments) {
            *l += inc;
        }
        self.n += 1;
        Ok(())
    }

    pub fn order_view(&self) -> OrderView {
        OrderView::new(&self.lambda)
    }
}

/// Descending order statistics of an LLR vector.
///
/// Ties are broken by stream index, lower index first. Ranks used by
/// [`OrderView::stat`] are 1-based, with `stat(0) = +inf` and
/// `stat(J + 1) = -inf`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrderView {
    sorted: Vec<f64>,
    index_map: Vec<usize>,
    positive_count: usize,
}

fn descending(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or_else(|| b.total_cmp(&a))
}

impl OrderView {
    pub fn new(lambda: &[f64]) -> Self {
        let mut view = OrderView::default();
        view.refresh(lambda);
        view
    }

    /// Recomputes the view in place, reusing its buffers.
    pub fn refresh(&mut self, lambda: &[f64]) {
        self.index_map.clear();
        self.index_map.extend(0..lambda.len());
        // stable: equal values keep ascending index order
        self.index_map
            .sort_by(|&i, &k| descending(lambda[i], lambda[k]));
        self.sorted.clear();
        self.sorted
            .extend(self.index_map.iter().map(|&i| lambda[i]));
        self.positive_count = lambda.iter().filter(|&&l| l > 0.0).count();
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `index_map[k]` is the stream holding the `(k+1)`-th largest LLR.
    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    /// Number of strictly positive LLRs.
    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    /// `k`-th largest LLR for `0 <= k <= J + 1`, with infinite sentinels at
    /// both ends.
    #[inline]
    pub fn stat(&self, k: usize) -> f64 {
        if k == 0 {
            f64::INFINITY
        } else if k > self.sorted.len() {
            f64::NEG_INFINITY
        } else {
            self.sorted[k - 1]
        }
    }

    /// `stat(k) - stat(k + 1)` for `0 <= k <= J`; `+inf` at both ends.
    pub fn gap_at(&self, k: usize) -> Result<f64> {
        let j = self.sorted.len();
        if k > j {
            return Err(Error::IndexOutOfRange { index: k, len: j });
        }
        Ok(self.gap(k))
    }

    #[inline]
    pub(crate) fn gap(&self, k: usize) -> f64 {
        if k == 0 || k == self.sorted.len() {
            f64::INFINITY
        } else {
            self.sorted[k - 1] - self.sorted[k]
        }
    }

    /// Stream indices of the `count` largest LLRs, in rank order.
    pub fn top(&self, count: usize) -> &[usize] {
        &self.index_map[..count]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advance_accumulates() {
        let mut s = LlrState::new(3);
        s.advance(&[1.0, -0.5, -1.2]).unwrap();
        assert_eq!(s.n(), 1);
        assert_eq!(s.lambda(), &[1.0, -0.5, -1.2]);
        s.advance(&[0.3, 0.0, 0.0]).unwrap();
        s.advance(&[-0.3, 0.0, 0.0]).unwrap();
        assert!((s.lambda()[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.n(), 3);
    }

    #[test]
    fn advance_rejects_wrong_length() {
        let mut s = LlrState::new(3);
        assert_eq!(
            s.advance(&[1.0, 2.0]),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 2
            })
        );
        assert_eq!(s.n(), 0);
    }

    #[test]
    fn order_view_examples() {
        let v = OrderView::new(&[1.0, -0.5, -1.2]);
        assert_eq!(v.sorted(), &[1.0, -0.5, -1.2]);
        assert_eq!(v.index_map(), &[0, 1, 2]);
        assert_eq!(v.positive_count(), 1);

        let v = OrderView::new(&[0.0, 0.0]);
        assert_eq!(v.index_map(), &[0, 1]);
        assert_eq!(v.positive_count(), 0);

        let v = OrderView::new(&[-2.0, 3.0, 3.0, -1.0]);
        assert_eq!(v.sorted(), &[3.0, 3.0, -1.0, -2.0]);
        assert_eq!(v.index_map(), &[1, 2, 3, 0]);
        assert_eq!(v.positive_count(), 2);
    }

    #[test]
    fn gap_examples() {
        let v = OrderView::new(&[-2.0, 3.0, 3.0, -1.0]);
        assert_eq!(v.gap_at(1).unwrap(), 0.0);
        assert_eq!(v.gap_at(2).unwrap(), 4.0);
        assert_eq!(v.gap_at(0).unwrap(), f64::INFINITY);
        assert_eq!(v.gap_at(4).unwrap(), f64::INFINITY);
        assert!(v.gap_at(5).is_err());
    }

    #[test]
    fn sentinels() {
        let v = OrderView::new(&[1.0, 2.0]);
        assert_eq!(v.stat(0), f64::INFINITY);
        assert_eq!(v.stat(1), 2.0);
        assert_eq!(v.stat(3), f64::NEG_INFINITY);
    }
}
