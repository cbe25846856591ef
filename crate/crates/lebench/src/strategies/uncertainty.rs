//! Uncertainty scores over predicted class distributions.

use super::{Orientation, PoolScores};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyKind {
    /// Top-class probability; low confidence is informative.
    Confidence,
    /// Shannon entropy of the prediction; high entropy is informative.
    Entropy,
    /// Gap between the top-2 class probabilities; small margins are
    /// informative.
    Margin,
}

/// Scores each probability row for the given kind. `indices` names the pool
/// index of each row; rows must lie on the simplex.
pub fn uncertainty_scores(
    kind: UncertaintyKind,
    probs: ArrayView2<f64>,
    indices: &[usize],
) -> PoolScores {
    assert_eq!(probs.nrows(), indices.len());
    let scores: Vec<f64> = probs
        .rows()
        .into_iter()
        .map(|row| match kind {
            UncertaintyKind::Confidence => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            UncertaintyKind::Entropy => -row
                .iter()
                .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
                .sum::<f64>(),
            UncertaintyKind::Margin => {
                let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for &p in row {
                    if p > top {
                        second = top;
                        top = p;
                    } else if p > second {
                        second = p;
                    }
                }
                top - second
            }
        })
        .collect();
    let orientation = match kind {
        UncertaintyKind::Entropy => Orientation::HigherIsBetter,
        _ => Orientation::LowerIsBetter,
    };
    PoolScores::new(indices.to_vec(), scores, orientation)
}
