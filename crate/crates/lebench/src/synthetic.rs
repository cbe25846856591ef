//! Synthetic embedding generator and stratified dataset splitting.
//!
//! The generator is a desk-scale stand-in for precomputed encoder
//! embeddings: a Gaussian mixture with one center per class at
//! `separation * u_c` along orthonormal-ish random directions, unit
//! within-class spread, and extra views built as Gaussian perturbations of
//! view 0 (simulating augmented copies of the same example).

use crate::rng::{stream_rng, Stream, StreamRng};
use crate::store::{EmbeddingStore, Split, StoreError};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("class {class} too small to keep a pool example (has {available})")]
    ClassTooSmall { class: usize, available: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Parameters of the synthetic Gaussian-mixture store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub count: usize,
    pub dim: usize,
    #[serde(default = "default_views")]
    pub views: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

fn default_views() -> usize {
    1
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SyntheticError> {
        if self.classes < 2 {
            return Err(SyntheticError::InvalidParam("classes must be >= 2".into()));
        }
        if self.dim < 1 {
            return Err(SyntheticError::InvalidParam("dim must be >= 1".into()));
        }
        if self.views < 1 {
            return Err(SyntheticError::InvalidParam("views must be >= 1".into()));
        }
        if self.count < self.classes {
            return Err(SyntheticError::InvalidParam(format!(
                "count {} cannot cover {} classes",
                self.count, self.classes
            )));
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(SyntheticError::InvalidParam("noise must be positive".into()));
        }
        if self.separation < 0.0 || !self.separation.is_finite() {
            return Err(SyntheticError::InvalidParam("separation must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> String {
        format!(
            "synthetic_k{}_n{}_d{}_v{}_seed{}",
            self.classes, self.count, self.dim, self.views, self.seed
        )
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random orthonormal-ish class directions: Gram-Schmidt while dimensions
/// last, plain unit vectors for any classes beyond `d`.
fn class_directions(k: usize, d: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for c in 0..k {
        let mut u: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        if c < d {
            for prev in &dirs[..c.min(dirs.len())] {
                let dot: f64 = u.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (x, p) in u.iter_mut().zip(prev) {
                    *x -= dot * p;
                }
            }
        }
        let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut u {
                *x /= norm;
            }
        } else {
            // Degenerate draw; fall back to a coordinate axis.
            u = vec![0.0; d];
            u[c % d] = 1.0;
        }
        dirs.push(u);
    }
    dirs
}

/// Generates a synthetic store. Deterministic in `spec.seed`: the same spec
/// yields a bit-identical store. All examples start in the pool split; use
/// [`split_dataset`] to carve out val/test.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingStore, SyntheticError> {
    spec.validate()?;
    let (k, n, d, v) = (spec.classes, spec.count, spec.dim, spec.views);
    let mut rng = stream_rng(spec.seed, Stream::Synthetic, 0);

    let dirs = class_directions(k, d, &mut rng);
    let labels: Vec<u32> = (0..n).map(|i| (i % k) as u32).collect();

    let mut view0 = Array2::<f32>::zeros((n, d));
    for i in 0..n {
        let dir = &dirs[labels[i] as usize];
        for j in 0..d {
            let val = spec.separation * dir[j] + normal(&mut rng);
            view0[[i, j]] = val as f32;
        }
    }

    let mut features = Vec::with_capacity(v);
    features.push(view0);
    for _ in 1..v {
        let mut block = Array2::<f32>::zeros((n, d));
        for i in 0..n {
            for j in 0..d {
                block[[i, j]] = features[0][[i, j]] + (spec.noise * normal(&mut rng)) as f32;
            }
        }
        features.push(block);
    }

    let split = vec![Split::Pool; n];
    Ok(EmbeddingStore::new(
        spec.dataset_name(),
        features,
        labels,
        split,
        k,
        Some(spec.seed),
    )?)
}

/// Stratified split: per-class quotas by largest-remainder apportionment so
/// split totals are exactly `round(fraction * n)`, with every class keeping
/// at least one pool example. Membership within a class is chosen by a
/// seeded shuffle.
pub fn split_dataset(
    store: EmbeddingStore,
    val_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<EmbeddingStore, SyntheticError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) || !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SyntheticError::InvalidParam("fractions must lie in (0, 1)".into()));
    }
    if val_fraction + test_fraction >= 1.0 {
        return Err(SyntheticError::InvalidParam("val + test fractions must sum below 1".into()));
    }
    let n = store.n();
    let k = store.k();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        members[store.label(i)].push(i);
    }

    let class_sizes: Vec<usize> = members.iter().map(|m| m.len()).collect();
    let total_val = (val_fraction * n as f64).round() as usize;
    let total_test = (test_fraction * n as f64).round() as usize;

    let mut val_quota = apportion(&class_sizes, val_fraction, total_val);
    let mut test_quota = apportion(&class_sizes, test_fraction, total_test);

    reserve_pool_examples(&class_sizes, &mut val_quota, &mut test_quota)?;

    let mut rng = stream_rng(seed, Stream::DataSplit, 0);
    let mut split = vec![Split::Pool; n];
    for c in 0..k {
        let mut idx = members[c].clone();
        // Fisher-Yates with the split stream.
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        for (pos, &example) in idx.iter().enumerate() {
            split[example] = if pos < val_quota[c] {
                Split::Val
            } else if pos < val_quota[c] + test_quota[c] {
                Split::Test
            } else {
                Split::Pool
            };
        }
    }
    Ok(store.with_splits(split)?)
}

/// Largest-remainder apportionment of `total` across classes proportional
/// to class size. Ties break toward the lower class index.
fn apportion(class_sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let mut quota: Vec<usize> = Vec::with_capacity(class_sizes.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(class_sizes.len());
    let mut assigned = 0usize;
    for (c, &sz) in class_sizes.iter().enumerate() {
        let exact = fraction * sz as f64;
        let base = exact.floor() as usize;
        quota.push(base.min(sz));
        assigned += quota[c];
        remainders.push((exact - base as f64, c));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut leftover = total.saturating_sub(assigned);
    let mut cursor = 0usize;
    while leftover > 0 && cursor < remainders.len() * 2 {
        let c = remainders[cursor % remainders.len()].1;
        if quota[c] < class_sizes[c] {
            quota[c] += 1;
            leftover -= 1;
        }
        cursor += 1;
    }
    quota
}

/// Ensures every class keeps >= 1 pool example by shifting surplus quota to
/// classes with spare capacity; deterministic (largest capacity first).
fn reserve_pool_examples(
    class_sizes: &[usize],
    val_quota: &mut [usize],
    test_quota: &mut [usize],
) -> Result<(), SyntheticError> {
    let k = class_sizes.len();
    let capacity = |c: usize, vq: &[usize], tq: &[usize]| -> isize {
        class_sizes[c] as isize - 1 - vq[c] as isize - tq[c] as isize
    };
    for c in 0..k {
        if class_sizes[c] == 0 {
            return Err(SyntheticError::ClassTooSmall { class: c, available: 0 });
        }
        while capacity(c, val_quota, test_quota) < 0 {
            // Shed one unit from this class (test first, then val) onto the
            // class with the most spare capacity.
            let recipient = (0..k)
                .filter(|&r| r != c && capacity(r, val_quota, test_quota) > 0)
                .max_by_key(|&r| (capacity(r, val_quota, test_quota), std::cmp::Reverse(r)));
            let Some(r) = recipient else {
                return Err(SyntheticError::ClassTooSmall { class: c, available: class_sizes[c] });
            };
            if test_quota[c] > 0 {
                test_quota[c] -= 1;
                test_quota[r] += 1;
            } else if val_quota[c] > 0 {
                val_quota[c] -= 1;
                val_quota[r] += 1;
            } else {
                return Err(SyntheticError::ClassTooSmall { class: c, available: class_sizes[c] });
            }
        }
    }
    Ok(())
}
