//! Active-learning selection strategies: random, the three uncertainty
//! scores, greedy k-center, k-means++ seeding over factored gradient
//! embeddings, and Fisher-design swap selection.
//!
//! All strategies return a [`SelectionResult`] of exactly `B` distinct
//! unlabeled pool indices with per-index audit scores. Scoring always uses
//! the canonical view (view 0); augmented views exist to regularize
//! training, not selection.

mod badge;
mod bait;
mod coreset;
mod uncertainty;

pub use badge::{factored_sq_dist, select_badge, GradFactors};
pub use bait::{
    build_fisher_context, helmert_complement, project_feature, projected_covariance, select_bait,
    select_bait_traced, BaitParams, FisherContext, SwapTraceEvent,
};
pub use coreset::select_coreset;
pub use uncertainty::{uncertainty_scores, UncertaintyKind};

use crate::label_state::LabelState;
use crate::rng::StreamRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("batch of {requested} exceeds {available} available candidates")]
    BatchTooLarge { requested: usize, available: usize },
    #[error("invalid batch request: {0}")]
    InvalidBatch(String),
    #[error("every gradient embedding is exactly zero")]
    DegenerateAllZero,
    #[error("pool covariance rank {rank} below requested projection dimension {requested}")]
    RankDeficiency { rank: usize, requested: usize },
    #[error("incremental inverse update became singular and refactorization failed")]
    SingularUpdate,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Registry of strategy ids. `galaxy` is a reserved id (graph-based
/// selection), rejected at parse time until someone contributes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyId {
    Random,
    Confidence,
    Entropy,
    Margin,
    Coreset,
    Badge,
    Bait,
}

impl StrategyId {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::Random => "random",
            StrategyId::Confidence => "confidence",
            StrategyId::Entropy => "entropy",
            StrategyId::Margin => "margin",
            StrategyId::Coreset => "coreset",
            StrategyId::Badge => "badge",
            StrategyId::Bait => "bait",
        }
    }

    pub const ALL: [StrategyId; 7] = [
        StrategyId::Random,
        StrategyId::Confidence,
        StrategyId::Entropy,
        StrategyId::Margin,
        StrategyId::Coreset,
        StrategyId::Badge,
        StrategyId::Bait,
    ];
}

impl std::str::FromStr for StrategyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(StrategyId::Random),
            "confidence" => Ok(StrategyId::Confidence),
            "entropy" => Ok(StrategyId::Entropy),
            "margin" => Ok(StrategyId::Margin),
            "coreset" => Ok(StrategyId::Coreset),
            "badge" => Ok(StrategyId::Badge),
            "bait" => Ok(StrategyId::Bait),
            "galaxy" => Err("strategy 'galaxy' is reserved but not implemented".into()),
            other => Err(format!(
                "unknown strategy '{other}' (expected random, confidence, entropy, margin, coreset, badge, bait)"
            )),
        }
    }
}

impl TryFrom<String> for StrategyId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<StrategyId> for String {
    fn from(s: StrategyId) -> String {
        s.as_str().to_string()
    }
}

/// Score orientation: whether smaller scores mark more informative examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    LowerIsBetter,
    HigherIsBetter,
}

/// Per-candidate scores over unlabeled pool indices.
#[derive(Debug, Clone)]
pub struct PoolScores {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub orientation: Orientation,
}

impl PoolScores {
    pub fn new(indices: Vec<usize>, scores: Vec<f64>, orientation: Orientation) -> Self {
        assert_eq!(indices.len(), scores.len());
        debug_assert!(scores.iter().all(|s| s.is_finite()), "scores must be finite");
        Self { indices, scores, orientation }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Ordered batch of selected pool indices with audit scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub strategy: StrategyId,
    /// Which rng stream produced any random draws, for audit.
    pub rng_stream: String,
}

impl SelectionResult {
    pub fn new(strategy: StrategyId, indices: Vec<usize>, scores: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), scores.len());
        Self { indices, scores, strategy, rng_stream: String::new() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws an index proportional to `weights` by inverse-CDF walk. Returns
/// `None` when the weights cannot be sampled (zero or non-finite total).
/// Consumes exactly one `f64` from the generator either way, so optimized
/// and oracle selection paths stay draw-for-draw aligned.
pub(crate) fn sample_by_weight(weights: &[f64], rng: &mut StreamRng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Uniform batch without replacement over the unlabeled pool.
pub fn select_random(
    state: &LabelState,
    batch: usize,
    rng: &mut StreamRng,
) -> Result<SelectionResult, StrategyError> {
    let mut pool = state.unlabeled_indices();
    if batch > pool.len() {
        return Err(StrategyError::BatchTooLarge { requested: batch, available: pool.len() });
    }
    // Partial Fisher-Yates: first `batch` slots end up a uniform sample.
    for i in 0..batch {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(batch);
    let scores = vec![0.0; batch];
    Ok(SelectionResult::new(StrategyId::Random, pool, scores))
}

/// Takes the `batch` best-scored candidates per the orientation, breaking
/// ties toward the lower pool index.
pub fn select_top(
    scores: &PoolScores,
    batch: usize,
    strategy: StrategyId,
) -> Result<SelectionResult, StrategyError> {
    if batch > scores.len() {
        return Err(StrategyError::BatchTooLarge { requested: batch, available: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let cmp = match scores.orientation {
            Orientation::LowerIsBetter => scores.scores[a].total_cmp(&scores.scores[b]),
            Orientation::HigherIsBetter => scores.scores[b].total_cmp(&scores.scores[a]),
        };
        cmp.then(scores.indices[a].cmp(&scores.indices[b]))
    });
    order.truncate(batch);
    let indices = order.iter().map(|&p| scores.indices[p]).collect();
    let picked = order.iter().map(|&p| scores.scores[p]).collect();
    Ok(SelectionResult::new(strategy, indices, picked))
}
