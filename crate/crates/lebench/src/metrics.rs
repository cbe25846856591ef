//! Evaluation metrics: accuracy, balanced accuracy, macro F1, pool accuracy.
//!
//! All metrics are computed in f64 from exact integer counts, never from
//! streamed floats, so repeated evaluation of the same predictions is
//! reproducible to the bit.

use crate::label_state::LabelState;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("y_true has {true_len} entries but y_pred has {pred_len}")]
    LengthMismatch { true_len: usize, pred_len: usize },
}

/// Exact confusion counts; `counts[i][j]` = number of examples with true
/// class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_pairs(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<Self, MetricsError> {
        if y_true.len() != y_pred.len() {
            return Err(MetricsError::LengthMismatch { true_len: y_true.len(), pred_len: y_pred.len() });
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= k {
                return Err(MetricsError::LabelOutOfRange { label: t, k });
            }
            if p >= k {
                return Err(MetricsError::LabelOutOfRange { label: p, k });
            }
            counts[t * k + p] += 1;
        }
        Ok(Self { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self, true_class: usize, pred_class: usize) -> u64 {
        self.counts[true_class * self.k + pred_class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.k..(i + 1) * self.k].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.counts[i * self.k + j]).sum()
    }

    fn diag(&self, i: usize) -> u64 {
        self.counts[i * self.k + i]
    }
}

/// Fraction of examples predicted correctly. 0 on empty input.
pub fn accuracy(c: &ConfusionMatrix) -> f64 {
    let total = c.total();
    if total == 0 {
        return 0.0;
    }
    let hit: u64 = (0..c.k()).map(|i| c.diag(i)).sum();
    hit as f64 / total as f64
}

/// Unweighted mean of per-class recalls over all `k` classes. A class that
/// never appears as a true label contributes recall 0 (zero-division
/// convention for absent classes).
pub fn balanced_accuracy(c: &ConfusionMatrix) -> f64 {
    let k = c.k();
    if k == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..k {
        let row = c.row_sum(i);
        if row > 0 {
            sum += c.diag(i) as f64 / row as f64;
        }
    }
    sum / k as f64
}

/// Unweighted mean of per-class F1 scores. Uses the count identity
/// F1_i = 2*C_ii / (row_i + col_i), with a class contributing 0 when it is
/// neither predicted nor present (row_i + col_i = 0).
pub fn macro_f1(c: &ConfusionMatrix) -> f64 {
    let k = c.k();
    if k == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..k {
        let denom = c.row_sum(i) + c.col_sum(i);
        if denom > 0 {
            sum += 2.0 * c.diag(i) as f64 / denom as f64;
        }
    }
    sum / k as f64
}

/// Fraction of the pool whose label agrees with ground truth, where
/// human-annotated examples count as correct by construction and unlabeled
/// examples are scored by the model's prediction.
///
/// `predictions` must cover every pool index.
pub fn pool_accuracy(ground_truth: &[usize], state: &LabelState, predictions: &[usize]) -> f64 {
    assert_eq!(ground_truth.len(), state.n_pool(), "ground truth must cover the pool");
    assert_eq!(predictions.len(), state.n_pool(), "predictions must cover the pool");
    let n = state.n_pool();
    if n == 0 {
        return 0.0;
    }
    let mut correct = 0usize;
    for i in 0..n {
        if state.is_labeled(i) || predictions[i] == ground_truth[i] {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hand_matrix() -> ConfusionMatrix {
        // C = [[40, 10], [20, 30]]
        let mut y_true = Vec::new();
        let mut y_pred = Vec::new();
        for (t, p, n) in [(0, 0, 40), (0, 1, 10), (1, 0, 20), (1, 1, 30)] {
            y_true.extend(std::iter::repeat(t).take(n));
            y_pred.extend(std::iter::repeat(p).take(n));
        }
        ConfusionMatrix::from_pairs(&y_true, &y_pred, 2).unwrap()
    }

    #[test]
    fn confusion_counts_exactly() {
        let c = ConfusionMatrix::from_pairs(&[0, 0, 1], &[1, 0, 1], 2).unwrap();
        assert_eq!(c.count(0, 0), 1);
        assert_eq!(c.count(0, 1), 1);
        assert_eq!(c.count(1, 0), 0);
        assert_eq!(c.count(1, 1), 1);
    }

    #[test]
    fn confusion_perfect_diag() {
        let c = ConfusionMatrix::from_pairs(&[0, 1, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(c.count(0, 0), 1);
        assert_eq!(c.count(1, 1), 2);
        assert_eq!(accuracy(&c), 1.0);
        assert_eq!(balanced_accuracy(&c), 1.0);
        assert_eq!(macro_f1(&c), 1.0);
    }

    #[test]
    fn confusion_empty_is_all_zero() {
        let c = ConfusionMatrix::from_pairs(&[], &[], 3).unwrap();
        assert_eq!(c.total(), 0);
        assert_eq!(accuracy(&c), 0.0);
    }

    #[test]
    fn confusion_rejects_out_of_range() {
        assert!(matches!(
            ConfusionMatrix::from_pairs(&[2], &[0], 2),
            Err(MetricsError::LabelOutOfRange { label: 2, k: 2 })
        ));
    }

    #[test]
    fn balanced_accuracy_hand_example() {
        // recalls 40/50 = 0.8 and 30/50 = 0.6
        assert!((balanced_accuracy(&hand_matrix()) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn balanced_accuracy_constant_predictor_on_balanced_data() {
        let c = ConfusionMatrix::from_pairs(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        assert!((balanced_accuracy(&c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn macro_f1_hand_example() {
        // P0 = 2/3, R0 = 0.8 -> F1_0 = 8/11; P1 = 0.75, R1 = 0.6 -> F1_1 = 2/3
        let expected = (8.0 / 11.0 + 2.0 / 3.0) / 2.0; // 0.696969...
        assert!((macro_f1(&hand_matrix()) - expected).abs() < 1e-15);
        assert!((macro_f1(&hand_matrix()) - 0.696_969_696_969_697).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_absent_class_contributes_zero() {
        // Class 2 never true and never predicted.
        let c = ConfusionMatrix::from_pairs(&[0, 1], &[0, 1], 3).unwrap();
        assert!((macro_f1(&c) - 2.0 / 3.0).abs() < 1e-15);
        assert!((balanced_accuracy(&c) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pool_accuracy_cases() {
        let truth = vec![0, 1, 0, 1];
        // Everything labeled -> 1.0.
        let mut s = LabelState::new(4, &[4]).unwrap();
        s.annotate(&[0, 1, 2, 3]).unwrap();
        assert_eq!(pool_accuracy(&truth, &s, &[1, 0, 1, 0]), 1.0);

        // 2 labeled, model correct on 1 of 2 unlabeled -> 0.75.
        let mut s = LabelState::new(4, &[2]).unwrap();
        s.annotate(&[0, 1]).unwrap();
        assert_eq!(pool_accuracy(&truth, &s, &[0, 1, 0, 0]), 0.75);

        // 0 labeled -> plain accuracy of the predictions.
        let s = LabelState::new(4, &[1]).unwrap();
        assert_eq!(pool_accuracy(&truth, &s, &[0, 1, 1, 1]), 0.75);
    }

    proptest! {
        // Metrics are invariant under a simultaneous relabeling of classes,
        // and pool accuracy never drops below the labeled fraction.
        #[test]
        fn class_permutation_invariance(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..80),
            shift in 1usize..4,
        ) {
            let k = 4;
            let (y_true, y_pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let perm: Vec<usize> = (0..k).map(|c| (c + shift) % k).collect();
            let yt2: Vec<usize> = y_true.iter().map(|&c| perm[c]).collect();
            let yp2: Vec<usize> = y_pred.iter().map(|&c| perm[c]).collect();
            let c1 = ConfusionMatrix::from_pairs(&y_true, &y_pred, k).unwrap();
            let c2 = ConfusionMatrix::from_pairs(&yt2, &yp2, k).unwrap();
            prop_assert!((balanced_accuracy(&c1) - balanced_accuracy(&c2)).abs() < 1e-12);
            prop_assert!((macro_f1(&c1) - macro_f1(&c2)).abs() < 1e-12);
            prop_assert!((accuracy(&c1) - accuracy(&c2)).abs() < 1e-12);
        }

        #[test]
        fn pool_accuracy_at_least_labeled_fraction(
            n_labeled in 0usize..8,
            preds in proptest::collection::vec(0usize..3, 8),
        ) {
            let truth = vec![0usize; 8];
            let mut s = LabelState::new(8, &[n_labeled.max(1)]).unwrap();
            if n_labeled > 0 {
                let batch: Vec<usize> = (0..n_labeled).collect();
                s.annotate(&batch).unwrap();
            }
            let frac = s.labeled_count() as f64 / 8.0;
            prop_assert!(pool_accuracy(&truth, &s, &preds) >= frac - 1e-15);
        }

        // Growing the labeled set with predictions held fixed never lowers
        // pool accuracy.
        #[test]
        fn pool_accuracy_monotone_in_labeled_set(
            truth in proptest::collection::vec(0usize..3, 10),
            preds in proptest::collection::vec(0usize..3, 10),
        ) {
            let mut s = LabelState::new(10, &[2, 3, 5]).unwrap();
            let mut prev = pool_accuracy(&truth, &s, &preds);
            for batch in [&[0usize, 1][..], &[2, 3, 4], &[5, 6, 7, 8, 9]] {
                s.annotate(batch).unwrap();
                let now = pool_accuracy(&truth, &s, &preds);
                prop_assert!(now >= prev - 1e-15);
                prev = now;
            }
            prop_assert_eq!(prev, 1.0);
        }
    }
}
