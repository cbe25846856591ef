//! k-means++ seeding over gradient embeddings, with the factored distance
//! kernel.
//!
//! The gradient embedding of example i is g_i = vec(q_i v_iᵀ), the exact
//! last-layer weight gradient of cross-entropy at the model's own predicted
//! label. Materializing g_i costs K·d per example; the identity
//!
//!   ‖g_i − g_j‖² = ‖q_i‖²‖v_i‖² + ‖q_j‖²‖v_j‖² − 2 (q_iᵀq_j)(v_iᵀv_j)
//!
//! evaluates the squared distance in O(K + d), which is what makes D²
//! sampling over large pools practical. (The decomposition only holds for
//! squared norms, which is also exactly what D² sampling needs.)

use super::{sample_by_weight, SelectionResult, StrategyError, StrategyId};
use crate::models::Classifier;
use crate::rng::StreamRng;
use crate::store::EmbeddingStore;
use ndarray::Array2;

/// Factored gradient-embedding components for a candidate set, with cached
/// squared norms.
#[derive(Debug, Clone)]
pub struct GradFactors {
    q: Array2<f64>, // m×k
    v: Array2<f64>, // m×d
    q_norm2: Vec<f64>,
    v_norm2: Vec<f64>,
}

impl GradFactors {
    /// Computes (q, v) for the given store rows on the canonical view.
    pub fn compute(model: &Classifier, store: &EmbeddingStore, rows: &[usize]) -> Self {
        let (k, d) = (model.k(), model.d());
        let mut q = Array2::<f64>::zeros((rows.len(), k));
        let mut v = Array2::<f64>::zeros((rows.len(), d));
        for (m, &row) in rows.iter().enumerate() {
            let x = store.feature_f64(0, row);
            let (qi, vi) = model.grad_embedding_factors(&x);
            for (dst, src) in q.row_mut(m).iter_mut().zip(&qi) {
                *dst = *src;
            }
            for (dst, src) in v.row_mut(m).iter_mut().zip(&vi) {
                *dst = *src;
            }
        }
        Self::from_parts(q, v)
    }

    pub fn from_parts(q: Array2<f64>, v: Array2<f64>) -> Self {
        assert_eq!(q.nrows(), v.nrows());
        let q_norm2 = q.rows().into_iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
        let v_norm2 = v.rows().into_iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
        Self { q, v, q_norm2, v_norm2 }
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn k(&self) -> usize {
        self.q.ncols()
    }

    pub fn d(&self) -> usize {
        self.v.ncols()
    }

    /// ‖g_i‖² = ‖q_i‖²·‖v_i‖².
    pub fn g_norm2(&self, i: usize) -> f64 {
        self.q_norm2[i] * self.v_norm2[i]
    }

    /// Materializes g_i = vec(q_i v_iᵀ); only the naive oracle and tests
    /// should need this.
    pub fn materialize_row(&self, i: usize) -> Vec<f64> {
        let (k, d) = (self.k(), self.d());
        let mut g = Vec::with_capacity(k * d);
        for a in 0..k {
            for b in 0..d {
                g.push(self.q[[i, a]] * self.v[[i, b]]);
            }
        }
        g
    }
}

/// Squared distance between gradient embeddings i and j in O(K + d).
/// Clamped at zero against rounding in the subtraction.
pub fn factored_sq_dist(i: usize, j: usize, f: &GradFactors) -> f64 {
    let qq: f64 = f.q.row(i).iter().zip(f.q.row(j).iter()).map(|(a, b)| a * b).sum();
    let vv: f64 = f.v.row(i).iter().zip(f.v.row(j).iter()).map(|(a, b)| a * b).sum();
    let d2 = f.q_norm2[i] * f.v_norm2[i] + f.q_norm2[j] * f.v_norm2[j] - 2.0 * qq * vv;
    d2.max(0.0)
}

/// k-means++ seeding over the gradient embeddings: the first center is
/// sampled proportional to ‖g‖² (or uniformly when `first_uniform`), each
/// subsequent center proportional to the squared factored distance to the
/// nearest chosen center. `ids[i]` is the pool index reported for row i.
///
/// Errors with `DegenerateAllZero` when every gradient embedding is exactly
/// zero (a perfectly confident model); callers fall back to random.
pub fn select_badge(
    factors: &GradFactors,
    ids: &[usize],
    batch: usize,
    first_uniform: bool,
    rng: &mut StreamRng,
) -> Result<SelectionResult, StrategyError> {
    let n = factors.len();
    assert_eq!(n, ids.len());
    if batch == 0 {
        return Err(StrategyError::InvalidBatch("batch must be >= 1".into()));
    }
    if batch > n {
        return Err(StrategyError::BatchTooLarge { requested: batch, available: n });
    }
    let g2: Vec<f64> = (0..n).map(|i| factors.g_norm2(i)).collect();
    if g2.iter().all(|&w| w == 0.0) {
        return Err(StrategyError::DegenerateAllZero);
    }

    let mut chosen = Vec::with_capacity(batch);
    let mut scores = Vec::with_capacity(batch);
    let mut is_chosen = vec![false; n];

    let first = if first_uniform {
        sample_by_weight(&vec![1.0; n], rng).expect("nonempty pool")
    } else {
        sample_by_weight(&g2, rng).expect("nonzero norms checked above")
    };
    chosen.push(first);
    scores.push(g2[first]);
    is_chosen[first] = true;

    // Min squared distance to the chosen set; refreshed against the newest
    // center only.
    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| if is_chosen[i] { 0.0 } else { factored_sq_dist(i, first, factors) })
        .collect();

    while chosen.len() < batch {
        let next = match sample_by_weight(&min_d2, rng) {
            Some(i) => i,
            None => {
                // Every remaining point coincides with a center: fall back
                // to a uniform draw over the unchosen ones.
                let uniform: Vec<f64> =
                    (0..n).map(|i| if is_chosen[i] { 0.0 } else { 1.0 }).collect();
                sample_by_weight(&uniform, rng).expect("batch <= n leaves candidates")
            }
        };
        chosen.push(next);
        scores.push(min_d2[next]);
        is_chosen[next] = true;
        min_d2[next] = 0.0;
        for i in 0..n {
            if is_chosen[i] {
                continue;
            }
            let d2 = factored_sq_dist(i, next, factors);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
    }

    let indices = chosen.iter().map(|&r| ids[r]).collect();
    Ok(SelectionResult::new(StrategyId::Badge, indices, scores))
}
