//! Greedy k-center (farthest-first) selection over penultimate features.

use super::{SelectionResult, StrategyError, StrategyId};
use ndarray::ArrayView2;

fn sq_dist(a: &[f64], b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Farthest-first traversal: repeatedly picks the unlabeled point whose
/// distance to the nearest center (labeled or already picked) is largest.
/// `features` is the full pool feature matrix, row index = pool index.
///
/// With no labeled centers the first pick is the point farthest from the
/// pool centroid; this cold-start path only guards misuse, the loop always
/// has labeled examples by the time a strategy runs.
pub fn select_coreset(
    features: ArrayView2<f64>,
    labeled: &[usize],
    batch: usize,
) -> Result<SelectionResult, StrategyError> {
    let n = features.nrows();
    let mut eligible = vec![true; n];
    for &c in labeled {
        eligible[c] = false;
    }
    let available = eligible.iter().filter(|&&e| e).count();
    if batch > available {
        return Err(StrategyError::BatchTooLarge { requested: batch, available });
    }

    // Squared distance to the nearest center so far.
    let mut min_d2 = vec![f64::INFINITY; n];
    for &c in labeled {
        let center: Vec<f64> = features.row(c).to_vec();
        for i in 0..n {
            let d2 = sq_dist(&center, features.row(i));
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
    }

    let mut picked = Vec::with_capacity(batch);
    let mut scores = Vec::with_capacity(batch);
    for round in 0..batch {
        let next = if labeled.is_empty() && round == 0 {
            // Cold start: farthest point from the pool centroid.
            let d = features.ncols();
            let mut centroid = vec![0.0f64; d];
            for row in features.rows() {
                for (c, &x) in centroid.iter_mut().zip(row.iter()) {
                    *c += x;
                }
            }
            for c in &mut centroid {
                *c /= n as f64;
            }
            argmax_eligible(&eligible, |i| sq_dist(&centroid, features.row(i)))
        } else {
            argmax_eligible(&eligible, |i| min_d2[i])
        };
        let score = if min_d2[next].is_finite() { min_d2[next].sqrt() } else { 0.0 };
        picked.push(next);
        scores.push(score);
        eligible[next] = false;
        let center: Vec<f64> = features.row(next).to_vec();
        for i in 0..n {
            let d2 = sq_dist(&center, features.row(i));
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
    }
    Ok(SelectionResult::new(StrategyId::Coreset, picked, scores))
}

/// Index of the eligible point maximizing `key`; ties break to the lowest
/// index so selection is deterministic.
fn argmax_eligible(eligible: &[bool], key: impl Fn(usize) -> f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..eligible.len() {
        if !eligible[i] {
            continue;
        }
        let v = key(i);
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.expect("at least one eligible candidate").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn picks_farthest_point_first() {
        let feats = array![[0.0], [1.0], [10.0]];
        let r = select_coreset(feats.view(), &[0], 1).unwrap();
        assert_eq!(r.indices, vec![2]);
        assert!((r.scores[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn second_pick_covers_the_gap() {
        let feats = array![[0.0], [1.0], [10.0]];
        let r = select_coreset(feats.view(), &[0], 2).unwrap();
        assert_eq!(r.indices, vec![2, 1]);
    }

    #[test]
    fn duplicates_of_centers_never_beat_distinct_points() {
        // Point 1 duplicates the center; 2 and 3 are distinct.
        let feats = array![[0.0, 0.0], [0.0, 0.0], [3.0, 0.0], [0.0, 2.0]];
        let r = select_coreset(feats.view(), &[0], 2).unwrap();
        assert_eq!(r.indices, vec![2, 3]);
    }

    #[test]
    fn all_duplicates_still_returns_distinct_indices() {
        let feats = ndarray::Array2::<f64>::zeros((5, 2));
        let r = select_coreset(feats.view(), &[0], 3).unwrap();
        assert_eq!(r.indices.len(), 3);
        let mut sorted = r.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
        assert!(!r.indices.contains(&0));
    }

    #[test]
    fn cold_start_picks_farthest_from_centroid() {
        let feats = array![[0.0], [2.0], [100.0]];
        // centroid = 34; farthest is index 2 (|100−34| = 66 > 34).
        let r = select_coreset(feats.view(), &[], 1).unwrap();
        assert_eq!(r.indices, vec![2]);
    }

    #[test]
    fn oversized_batch_is_rejected() {
        let feats = array![[0.0], [1.0]];
        assert!(matches!(
            select_coreset(feats.view(), &[0], 2),
            Err(StrategyError::BatchTooLarge { .. })
        ));
    }
}
