//! Semi-supervised trainers layered on the supervised loop: fixed-threshold
//! pseudolabeling, adaptive per-class thresholds, and multi-view consistency
//! (augmented embedding views standing in for weak/strong augmentation).
//!
//! All methods minimize
//!   mean CE on labeled examples  +  lambda_u * mean CE on pseudolabeled examples
//! with pseudo-labels recomputed from the current model at every epoch on
//! the canonical view (view 0). The unsupervised loss is evaluated on the
//! method's target view. Streams are arranged so that the supervised draw
//! sequence never depends on the method: with `lambda_u = 0` (or method
//! `supervised_only`) the result is bit-identical to plain supervised
//! training under the same seed.

use crate::models::{
    batch_loss_and_grad, sgd_step, Classifier, ModelError, Tier, TrainConfig,
};
use crate::store::{EmbeddingStore, Split};
use crate::label_state::LabelState;
use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Semi-supervised method selector. `freematch` and `softmatch` ids are
/// reserved for contributors and rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String", into = "String")]
pub enum SemiSlMethod {
    SupervisedOnly,
    Pseudolabel,
    Flexmatch,
    Consistency,
}

impl SemiSlMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SemiSlMethod::SupervisedOnly => "supervised_only",
            SemiSlMethod::Pseudolabel => "pseudolabel",
            SemiSlMethod::Flexmatch => "flexmatch",
            SemiSlMethod::Consistency => "consistency",
        }
    }
}

impl std::str::FromStr for SemiSlMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supervised_only" => Ok(SemiSlMethod::SupervisedOnly),
            "pseudolabel" => Ok(SemiSlMethod::Pseudolabel),
            "flexmatch" => Ok(SemiSlMethod::Flexmatch),
            "consistency" => Ok(SemiSlMethod::Consistency),
            "freematch" | "softmatch" => {
                Err(format!("semi-SL method '{s}' is reserved for contributors and not implemented"))
            }
            other => Err(format!(
                "unknown semi-SL method '{other}' (expected supervised_only, pseudolabel, flexmatch, consistency)"
            )),
        }
    }
}

impl TryFrom<String> for SemiSlMethod {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SemiSlMethod> for String {
    fn from(m: SemiSlMethod) -> String {
        m.as_str().to_string()
    }
}

/// Unsupervised-loss knobs; defaults follow common practice and are
/// tunable through the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemiSlParams {
    /// Base confidence threshold for pseudolabel admission.
    pub base_tau: f64,
    /// Weight of the unsupervised loss term.
    pub lambda_u: f64,
    /// Unsupervised mini-batches per supervised mini-batch in each epoch.
    /// Caps the unsupervised step count so a large unlabeled pool cannot
    /// drown the supervised signal; the admitted set is re-shuffled every
    /// epoch so coverage rotates.
    pub unsup_ratio: f64,
}

impl Default for SemiSlParams {
    fn default() -> Self {
        Self { base_tau: 0.95, lambda_u: 1.0, unsup_ratio: 1.0 }
    }
}

/// Per-class adaptive threshold state (recomputed each epoch).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdState {
    pub base_tau: f64,
    pub per_class_tau: Vec<f64>,
    /// Confident unlabeled predictions per class.
    pub sigma: Vec<usize>,
    /// Unlabeled examples below the base threshold.
    pub unused: usize,
}

/// Model-labeled unlabeled examples admitted for the unsupervised loss.
/// `indices` are positions in whatever index space the probabilities were
/// computed over; weights are per-example loss weights in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoBatch {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PseudoBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Admits example `i` iff `max_c probs[i, c] >= thresholds[argmax_c]`, with
/// the argmax as its label and weight 1. An empty batch is valid.
pub fn assign_pseudolabels(
    probs: ArrayView2<f64>,
    unlabeled: &[bool],
    thresholds: &[f64],
) -> PseudoBatch {
    assert_eq!(probs.nrows(), unlabeled.len());
    assert_eq!(probs.ncols(), thresholds.len());
    let mut batch = PseudoBatch { indices: Vec::new(), labels: Vec::new(), weights: Vec::new() };
    for (i, row) in probs.rows().into_iter().enumerate() {
        if !unlabeled[i] {
            continue;
        }
        let (y_hat, p_max) = row
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bp), (j, &p)| {
                if p > bp {
                    (j, p)
                } else {
                    (bi, bp)
                }
            });
        if p_max >= thresholds[y_hat] {
            batch.indices.push(i);
            batch.labels.push(y_hat);
            batch.weights.push(1.0);
        }
    }
    batch
}

/// Per-class dynamic thresholds: classes that already accumulate many
/// confident predictions keep the base threshold, slow classes get a lower
/// one. The denominator max(max_c sigma_c, unused) is the warm-up guard:
/// while most of the pool is still unconfident, all thresholds shrink.
pub fn update_flexmatch_thresholds(
    probs: ArrayView2<f64>,
    unlabeled: &[bool],
    base_tau: f64,
) -> ThresholdState {
    assert!(base_tau > 0.0 && base_tau < 1.0, "base_tau must lie in (0, 1)");
    let k = probs.ncols();
    let mut sigma = vec![0usize; k];
    let mut unused = 0usize;
    for (i, row) in probs.rows().into_iter().enumerate() {
        if !unlabeled[i] {
            continue;
        }
        let (y_hat, p_max) = row
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bp), (j, &p)| {
                if p > bp {
                    (j, p)
                } else {
                    (bi, bp)
                }
            });
        if p_max >= base_tau {
            sigma[y_hat] += 1;
        } else {
            unused += 1;
        }
    }
    let sigma_max = sigma.iter().copied().max().unwrap_or(0);
    let per_class_tau = if sigma_max == 0 {
        vec![base_tau; k]
    } else {
        let denom = sigma_max.max(unused) as f64;
        sigma.iter().map(|&s| (s as f64 / denom) * base_tau).collect()
    };
    ThresholdState { base_tau, per_class_tau, sigma, unused }
}

/// Diagnostics from a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    /// Mean supervised loss at the start of each epoch's pass.
    pub epoch_losses: Vec<f64>,
    /// Per-epoch threshold states (flexmatch only, else empty).
    pub threshold_log: Vec<ThresholdState>,
    /// Pseudolabeled-set size per epoch (semi methods only, else empty).
    pub pseudo_counts: Vec<usize>,
}

/// Trains on the labeled pool examples of `state` with the chosen method,
/// using the unlabeled pool for the unsupervised term. Fresh random
/// initialization every call; deterministic in `cfg.seed`.
pub fn train_semi_supervised(
    store: &EmbeddingStore,
    state: &LabelState,
    method: SemiSlMethod,
    tier: Tier,
    cfg: &TrainConfig,
    semi: &SemiSlParams,
) -> Result<Classifier, ModelError> {
    Ok(train_semi_supervised_detailed(store, state, method, tier, cfg, semi)?.classifier)
}

/// [`train_semi_supervised`] with the full diagnostics (epoch losses,
/// per-epoch threshold states, pseudolabel counts).
pub fn train_semi_supervised_detailed(
    store: &EmbeddingStore,
    state: &LabelState,
    method: SemiSlMethod,
    tier: Tier,
    cfg: &TrainConfig,
    semi: &SemiSlParams,
) -> Result<TrainOutcome, ModelError> {
    let pool_rows = store.indices_of(Split::Pool);
    assert_eq!(pool_rows.len(), state.n_pool(), "label state must cover the pool");
    let labeled: Vec<usize> = state.labeled_indices().iter().map(|&p| pool_rows[p]).collect();
    let unlabeled: Vec<usize> = state.unlabeled_indices().iter().map(|&p| pool_rows[p]).collect();
    train_with(store, &labeled, &unlabeled, method, tier, cfg, Some(semi))
}

/// Core loop shared by the supervised and semi-supervised entry points.
/// `labeled` and `unlabeled` are store row indices.
pub fn train_with(
    store: &EmbeddingStore,
    labeled: &[usize],
    unlabeled: &[usize],
    method: SemiSlMethod,
    tier: Tier,
    cfg: &TrainConfig,
    semi: Option<&SemiSlParams>,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(ModelError::EmptyLabelSet);
    }
    let default_semi = SemiSlParams::default();
    let semi = semi.unwrap_or(&default_semi);
    let (k, d, v) = (store.k(), store.d(), store.views());
    let lr = cfg.lr_for(tier);
    let use_unsup =
        method != SemiSlMethod::SupervisedOnly && semi.lambda_u > 0.0 && !unlabeled.is_empty();

    if method == SemiSlMethod::Consistency && v == 1 {
        log::warn!("consistency method on a single-view store degrades to pseudolabeling");
    }
    if cfg.batch_size == 1 || labeled.len() % cfg.batch_size == 1 {
        log::warn!(
            "degenerate mini-batch of a single example ({} labeled, batch size {})",
            labeled.len(),
            cfg.batch_size
        );
    }

    let mut init_rng = cfg.init_rng();
    let mut model = Classifier::init(tier, k, d, &mut init_rng);
    let mut unsup_rng = cfg.unsup_rng();
    let mut velocity: Vec<f64> = Vec::new();

    let mut outcome = TrainOutcome {
        classifier: model.clone(),
        epoch_losses: Vec::with_capacity(cfg.epochs),
        threshold_log: Vec::new(),
        pseudo_counts: Vec::new(),
    };

    let mut sup_order: Vec<usize> = labeled.to_vec();
    let all_unlabeled_mask = vec![true; unlabeled.len()];
    // Feature views converted to f64 once; epochs read from these.
    let views: Vec<ndarray::Array2<f64>> = (0..v)
        .map(|w| store.view(w).mapv(|x| x as f64))
        .collect();
    // Reused batch buffers.
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(d); cfg.batch_size];
    let mut ys: Vec<usize> = Vec::with_capacity(cfg.batch_size);
    let mut wts: Vec<f64> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let sup_view = epoch % v;

        // Pseudo-labels from the current model on the canonical view.
        let pseudo = if use_unsup {
            let probs0 = model.proba_rows(&views[0].view(), unlabeled);
            let thresholds = match method {
                SemiSlMethod::Flexmatch => {
                    let ts = update_flexmatch_thresholds(probs0.view(), &all_unlabeled_mask, semi.base_tau);
                    let taus = ts.per_class_tau.clone();
                    outcome.threshold_log.push(ts);
                    taus
                }
                _ => vec![semi.base_tau; k],
            };
            let pb = assign_pseudolabels(probs0.view(), &all_unlabeled_mask, &thresholds);
            outcome.pseudo_counts.push(pb.len());
            Some(pb)
        } else {
            None
        };
        let unsup_view = match method {
            SemiSlMethod::Pseudolabel => 0,
            _ if v > 1 => 1 + (epoch % (v - 1)),
            _ => 0,
        };

        // Supervised pass over the epoch's view.
        sup_order.shuffle(&mut init_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in sup_order.chunks(cfg.batch_size) {
            ys.clear();
            wts.clear();
            for (slot, &i) in xs.iter_mut().zip(chunk) {
                slot.clear();
                slot.extend(views[sup_view].row(i).iter());
                ys.push(store.label(i));
                wts.push(1.0);
            }
            let (loss, grads) = batch_loss_and_grad(&model, &xs[..chunk.len()], &ys, &wts);
            epoch_loss += loss;
            batches += 1;
            sgd_step(&mut model, &mut velocity, &grads, lr, cfg.weight_decay, cfg.momentum);
        }
        outcome.epoch_losses.push(epoch_loss / batches as f64);

        // Unsupervised pass: targets from view 0, loss on the method's view,
        // step count capped at unsup_ratio × the supervised step count.
        if let Some(pb) = pseudo {
            if !pb.is_empty() {
                let max_batches =
                    ((batches as f64 * semi.unsup_ratio).ceil() as usize).max(1);
                let mut order: Vec<usize> = (0..pb.len()).collect();
                order.shuffle(&mut unsup_rng);
                for chunk in order.chunks(cfg.batch_size).take(max_batches) {
                    ys.clear();
                    wts.clear();
                    for (slot, &p) in xs.iter_mut().zip(chunk) {
                        slot.clear();
                        slot.extend(views[unsup_view].row(unlabeled[pb.indices[p]]).iter());
                        ys.push(pb.labels[p]);
                        wts.push(pb.weights[p]);
                    }
                    let (_, mut grads) = batch_loss_and_grad(&model, &xs[..chunk.len()], &ys, &wts);
                    for g in &mut grads.flat {
                        *g *= semi.lambda_u;
                    }
                    sgd_step(&mut model, &mut velocity, &grads, lr, cfg.weight_decay, cfg.momentum);
                }
            }
        }
    }

    outcome.classifier = model;
    Ok(outcome)
}
