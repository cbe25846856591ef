//! Classifiers over embeddings: a linear probe and a one-hidden-layer
//! network (hidden width = embedding dimension), with the prediction and
//! feature surfaces the selection strategies need. Parameters and all math
//! are f64; storage precision (f32) ends at the store boundary.

use crate::rng::{stream_rng, Stream, StreamRng};
use crate::store::EmbeddingStore;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no labeled examples to train on")]
    EmptyLabelSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Model capacity tier. At this scale the proxy tier is the linear probe
/// and the deep tier is the shallow network; the two-tier structure of
/// cheap selector versus expensive final model is what matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Linear,
    Shallow,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Linear => "linear",
            Tier::Shallow => "shallow",
        }
    }

    /// Tier-specific default learning rate.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Tier::Linear => 1e-2,
            Tier::Shallow => 1e-3,
        }
    }
}

/// Linear probe: logits = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub w: Array2<f64>, // k×d
    pub b: Array1<f64>, // k
}

/// One hidden ReLU layer of width d, then a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    pub w1: Array2<f64>, // d×d
    pub b1: Array1<f64>, // d
    pub w2: Array2<f64>, // k×d
    pub b2: Array1<f64>, // k
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Linear(LinearProbe),
    Shallow(ShallowNet),
}

impl Classifier {
    /// Fresh random parameters, uniform in ±1/√fan_in. Deterministic in the
    /// supplied generator.
    pub fn init(tier: Tier, k: usize, d: usize, rng: &mut StreamRng) -> Self {
        let mut uniform = |fan_in: usize, len: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..len).map(|_| rng.random_range(-bound..bound)).collect()
        };
        match tier {
            Tier::Linear => {
                let w = Array2::from_shape_vec((k, d), uniform(d, k * d)).unwrap();
                let b = Array1::from_vec(uniform(d, k));
                Classifier::Linear(LinearProbe { w, b })
            }
            Tier::Shallow => {
                let w1 = Array2::from_shape_vec((d, d), uniform(d, d * d)).unwrap();
                let b1 = Array1::from_vec(uniform(d, d));
                let w2 = Array2::from_shape_vec((k, d), uniform(d, k * d)).unwrap();
                let b2 = Array1::from_vec(uniform(d, k));
                Classifier::Shallow(ShallowNet { w1, b1, w2, b2 })
            }
        }
    }

    pub fn tier(&self) -> Tier {
        match self {
            Classifier::Linear(_) => Tier::Linear,
            Classifier::Shallow(_) => Tier::Shallow,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.w.nrows(),
            Classifier::Shallow(m) => m.w2.nrows(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.w.ncols(),
            Classifier::Shallow(m) => m.w1.ncols(),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Classifier::Linear(m) => affine(&m.w, &m.b, x),
            Classifier::Shallow(m) => {
                let h = relu(affine(&m.w1, &m.b1, x));
                affine(&m.w2, &m.b2, &h)
            }
        }
    }

    /// Softmax of the logits; entries positive and summing to 1. Overflow
    /// is guarded by max-subtraction.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Penultimate representation: the input itself for the linear probe,
    /// the hidden ReLU activations for the shallow network.
    pub fn penultimate(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Classifier::Linear(_) => x.to_vec(),
            Classifier::Shallow(m) => relu(affine(&m.w1, &m.b1, x)),
        }
    }

    /// Predicted class; argmax with ties broken toward the lowest index.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    /// Factored gradient embedding (q, v): v is the penultimate feature and
    /// q is the cross-entropy gradient with respect to the logits at the
    /// model's own predicted label, q_j = 1[j = ŷ] − p_j. The outer product
    /// q vᵀ, vectorized, is the exact last-layer weight gradient at ŷ.
    pub fn grad_embedding_factors(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.predict_proba(x);
        let y_hat = argmax(&p);
        let q = p
            .iter()
            .enumerate()
            .map(|(j, &pj)| if j == y_hat { 1.0 - pj } else { -pj })
            .collect();
        (q, self.penultimate(x))
    }

    /// Logits written into `out`, with `hidden` as scratch for the shallow
    /// tier; avoids per-call allocation in scoring loops.
    fn logits_into(&self, x: &[f64], hidden: &mut Vec<f64>, out: &mut Vec<f64>) {
        match self {
            Classifier::Linear(m) => affine_into(&m.w, &m.b, x, out),
            Classifier::Shallow(m) => {
                affine_into(&m.w1, &m.b1, x, hidden);
                for h in hidden.iter_mut() {
                    if *h < 0.0 {
                        *h = 0.0;
                    }
                }
                affine_into(&m.w2, &m.b2, hidden, out);
            }
        }
    }

    /// Probabilities for rows of a pre-converted f64 feature matrix.
    pub fn proba_rows(&self, feats: &ndarray::ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((rows.len(), self.k()));
        let (mut x, mut hidden, mut logits) = (Vec::new(), Vec::new(), Vec::new());
        for (row, &i) in rows.iter().enumerate() {
            x.clear();
            x.extend(feats.row(i).iter());
            self.logits_into(&x, &mut hidden, &mut logits);
            softmax_in_place(&mut logits);
            for (dst, &src) in out.row_mut(row).iter_mut().zip(&logits) {
                *dst = src;
            }
        }
        out
    }

    /// Probabilities for a set of store rows in the given view.
    pub fn proba_batch(&self, store: &EmbeddingStore, view: usize, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((indices.len(), self.k()));
        let (mut x, mut hidden, mut logits) = (Vec::new(), Vec::new(), Vec::new());
        for (row, &i) in indices.iter().enumerate() {
            store.fill_feature_f64(view, i, &mut x);
            self.logits_into(&x, &mut hidden, &mut logits);
            softmax_in_place(&mut logits);
            for (dst, &src) in out.row_mut(row).iter_mut().zip(&logits) {
                *dst = src;
            }
        }
        out
    }

    /// Predicted classes for a set of store rows.
    pub fn predict_batch(&self, store: &EmbeddingStore, view: usize, indices: &[usize]) -> Vec<usize> {
        let (mut x, mut hidden, mut logits) = (Vec::new(), Vec::new(), Vec::new());
        indices
            .iter()
            .map(|&i| {
                store.fill_feature_f64(view, i, &mut x);
                self.logits_into(&x, &mut hidden, &mut logits);
                argmax(&logits)
            })
            .collect()
    }

    // -- flat parameter access (finite-difference checks, checkpoints) ----

    pub fn params(&self) -> Vec<f64> {
        match self {
            Classifier::Linear(m) => m.w.iter().chain(m.b.iter()).copied().collect(),
            Classifier::Shallow(m) => m
                .w1
                .iter()
                .chain(m.b1.iter())
                .chain(m.w2.iter())
                .chain(m.b2.iter())
                .copied()
                .collect(),
        }
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        match self {
            Classifier::Linear(m) => {
                let (k, d) = (m.w.nrows(), m.w.ncols());
                assert_eq!(flat.len(), k * d + k);
                for (dst, &src) in m.w.iter_mut().chain(m.b.iter_mut()).zip(flat) {
                    *dst = src;
                }
            }
            Classifier::Shallow(m) => {
                let (k, d) = (m.w2.nrows(), m.w1.ncols());
                assert_eq!(flat.len(), d * d + d + k * d + k);
                for (dst, &src) in m
                    .w1
                    .iter_mut()
                    .chain(m.b1.iter_mut())
                    .chain(m.w2.iter_mut())
                    .chain(m.b2.iter_mut())
                    .zip(flat)
                {
                    *dst = src;
                }
            }
        }
    }
}

fn affine(w: &Array2<f64>, b: &Array1<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = b.to_vec();
    for (r, row) in w.rows().into_iter().enumerate() {
        let mut acc = 0.0;
        for (wj, xj) in row.iter().zip(x) {
            acc += wj * xj;
        }
        out[r] += acc;
    }
    out
}

fn affine_into(w: &Array2<f64>, b: &Array1<f64>, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(b.iter());
    for (r, row) in w.rows().into_iter().enumerate() {
        let mut acc = 0.0;
        for (wj, xj) in row.iter().zip(x) {
            acc += wj * xj;
        }
        out[r] += acc;
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    v
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Gradient buffers shaped like the model parameters.
#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub flat: Vec<f64>,
}

/// Mean weighted cross-entropy over a batch, with its gradient.
///
/// `xs` are input rows, `ys` targets, `weights` per-example loss weights.
/// The loss is (1/B) Σ w_i · CE(p_i, y_i).
pub(crate) fn batch_loss_and_grad(
    model: &Classifier,
    xs: &[Vec<f64>],
    ys: &[usize],
    weights: &[f64],
) -> (f64, Gradients) {
    let batch = xs.len() as f64;
    let mut loss = 0.0;
    match model {
        Classifier::Linear(m) => {
            let (k, d) = (m.w.nrows(), m.w.ncols());
            let mut gw = vec![0.0f64; k * d];
            let mut gb = vec![0.0f64; k];
            for ((x, &y), &w) in xs.iter().zip(ys).zip(weights) {
                let p = softmax(&affine(&m.w, &m.b, x));
                loss += -w * p[y].max(1e-300).ln();
                for j in 0..k {
                    let delta = (p[j] - if j == y { 1.0 } else { 0.0 }) * w / batch;
                    gb[j] += delta;
                    for (gwj, xv) in gw[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *gwj += delta * xv;
                    }
                }
            }
            gw.extend_from_slice(&gb);
            (loss / batch, Gradients { flat: gw })
        }
        Classifier::Shallow(m) => {
            let (k, d) = (m.w2.nrows(), m.w1.ncols());
            let mut gw1 = vec![0.0f64; d * d];
            let mut gb1 = vec![0.0f64; d];
            let mut gw2 = vec![0.0f64; k * d];
            let mut gb2 = vec![0.0f64; k];
            for ((x, &y), &w) in xs.iter().zip(ys).zip(weights) {
                let pre = affine(&m.w1, &m.b1, x);
                let h: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
                let p = softmax(&affine(&m.w2, &m.b2, &h));
                loss += -w * p[y].max(1e-300).ln();
                // Output layer.
                let mut dh = vec![0.0f64; d];
                for j in 0..k {
                    let delta = (p[j] - if j == y { 1.0 } else { 0.0 }) * w / batch;
                    gb2[j] += delta;
                    for i in 0..d {
                        gw2[j * d + i] += delta * h[i];
                        dh[i] += delta * m.w2[[j, i]];
                    }
                }
                // Hidden layer through the ReLU gate.
                for i in 0..d {
                    if pre[i] <= 0.0 {
                        continue;
                    }
                    gb1[i] += dh[i];
                    for (g, xv) in gw1[i * d..(i + 1) * d].iter_mut().zip(x) {
                        *g += dh[i] * xv;
                    }
                }
            }
            let mut flat = gw1;
            flat.extend_from_slice(&gb1);
            flat.extend_from_slice(&gw2);
            flat.extend_from_slice(&gb2);
            (loss / batch, Gradients { flat })
        }
    }
}

/// One SGD-with-momentum step, with L2 weight decay applied to the weight
/// matrices (not the biases).
pub(crate) fn sgd_step(
    model: &mut Classifier,
    velocity: &mut Vec<f64>,
    grads: &Gradients,
    lr: f64,
    weight_decay: f64,
    momentum: f64,
) {
    let mut params = model.params();
    if velocity.is_empty() {
        *velocity = vec![0.0; params.len()];
    }
    let decay_mask = weight_decay_mask(model);
    for i in 0..params.len() {
        let g = grads.flat[i] + if decay_mask[i] { weight_decay * params[i] } else { 0.0 };
        velocity[i] = momentum * velocity[i] + g;
        params[i] -= lr * velocity[i];
    }
    model.set_params(&params);
}

fn weight_decay_mask(model: &Classifier) -> Vec<bool> {
    match model {
        Classifier::Linear(m) => {
            let (k, d) = (m.w.nrows(), m.w.ncols());
            let mut mask = vec![true; k * d];
            mask.extend(vec![false; k]);
            mask
        }
        Classifier::Shallow(m) => {
            let (k, d) = (m.w2.nrows(), m.w1.ncols());
            let mut mask = vec![true; d * d];
            mask.extend(vec![false; d]);
            mask.extend(vec![true; k * d]);
            mask.extend(vec![false; k]);
            mask
        }
    }
}

/// Supervised/semi-supervised optimizer settings. `learning_rate = None`
/// picks the tier default. `seed` drives initialization and batch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: Option<f64>,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: None,
            weight_decay: 1e-4,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be positive".into()));
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0) {
                return Err(ModelError::InvalidConfig("learning_rate must be positive".into()));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(ModelError::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(ModelError::InvalidConfig("weight_decay must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn lr_for(&self, tier: Tier) -> f64 {
        self.learning_rate.unwrap_or_else(|| tier.default_learning_rate())
    }

    pub(crate) fn init_rng(&self) -> StreamRng {
        stream_rng(self.seed, Stream::Training, 0)
    }

    pub(crate) fn unsup_rng(&self) -> StreamRng {
        stream_rng(self.seed, Stream::TrainingUnsup, 0)
    }
}

/// Trains the tier on the labeled examples only: plain supervised
/// cross-entropy, fresh random initialization, epochs cycling through the
/// store's augmentation views. Deterministic in `cfg.seed`.
pub fn train_supervised(
    store: &EmbeddingStore,
    labeled: &[usize],
    tier: Tier,
    cfg: &TrainConfig,
) -> Result<Classifier, ModelError> {
    let out = crate::semisl::train_with(store, labeled, &[], crate::semisl::SemiSlMethod::SupervisedOnly, tier, cfg, None)?;
    Ok(out.classifier)
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, tier tag, shape header, f64 parameter block.
// Round-trips are bit-exact so resumed experiments replay identically.
// ---------------------------------------------------------------------------

const CKPT_MAGIC: [u8; 4] = *b"LEBC";
const CKPT_VERSION: u32 = 1;

pub fn checkpoint_to_bytes(model: &Classifier) -> Vec<u8> {
    let params = model.params();
    let mut out = Vec::with_capacity(17 + params.len() * 8);
    out.extend_from_slice(&CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.push(match model.tier() {
        Tier::Linear => 0,
        Tier::Shallow => 1,
    });
    out.extend_from_slice(&(model.k() as u32).to_le_bytes());
    out.extend_from_slice(&(model.d() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn checkpoint_from_bytes(data: &[u8]) -> Result<Classifier, ModelError> {
    if data.len() < 17 {
        return Err(ModelError::CorruptCheckpoint("shorter than header".into()));
    }
    if data[..4] != CKPT_MAGIC {
        return Err(ModelError::CorruptCheckpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(ModelError::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let tier = match data[8] {
        0 => Tier::Linear,
        1 => Tier::Shallow,
        t => return Err(ModelError::CorruptCheckpoint(format!("unknown tier tag {t}"))),
    };
    let k = u32::from_le_bytes(data[9..13].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(data[13..17].try_into().unwrap()) as usize;
    if k == 0 || d == 0 {
        return Err(ModelError::CorruptCheckpoint("zero dimension".into()));
    }
    let n_params: u128 = match tier {
        Tier::Linear => (k as u128) * (d as u128) + k as u128,
        Tier::Shallow => {
            (d as u128) * (d as u128) + d as u128 + (k as u128) * (d as u128) + k as u128
        }
    };
    let expected = 17u128 + n_params * 8;
    if expected != data.len() as u128 {
        return Err(ModelError::CorruptCheckpoint(format!(
            "expected {expected} bytes, found {}",
            data.len()
        )));
    }
    let mut params = Vec::with_capacity(n_params as usize);
    let mut off = 17;
    for _ in 0..n_params {
        let val = f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        if !val.is_finite() {
            return Err(ModelError::CorruptCheckpoint("non-finite parameter".into()));
        }
        params.push(val);
        off += 8;
    }
    let mut rng = stream_rng(0, Stream::Training, 0);
    let mut model = Classifier::init(tier, k, d, &mut rng);
    model.set_params(&params);
    Ok(model)
}

pub fn save_checkpoint(model: &Classifier, path: &std::path::Path) -> Result<(), ModelError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, checkpoint_to_bytes(model))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<Classifier, ModelError> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}
