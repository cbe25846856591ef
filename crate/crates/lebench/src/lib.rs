//! Benchmark engine for label-efficient learning over precomputed
//! embeddings: a closed annotation loop combining semi-supervised training
//! with active-learning selection, run against embedding stores (real or
//! synthetic) with deterministic, resumable experiments.
//!
//! Modules:
//! - [`label_state`], [`config`], [`rng`]: domain types, budget bookkeeping,
//!   seeded stream randomness.
//! - [`store`], [`synthetic`]: the embedding-store binary format, manifests,
//!   stratified splits, and the synthetic generator.
//! - [`models`]: linear probe and shallow network with the prediction,
//!   penultimate-feature, and gradient-factor surfaces selection needs.
//! - [`semisl`]: pseudolabeling, adaptive per-class thresholds, multi-view
//!   consistency, and the shared training loop.
//! - [`strategies`]: random, confidence/entropy/margin, k-center, k-means++
//!   gradient-embedding selection, and Fisher-design selection.
//! - [`metrics`]: accuracy, balanced accuracy, macro F1, pool accuracy.
//! - [`engine`]: the round loop, persisted records, resume, comparisons.
//! - [`verify`]: oracle-equivalence checks (factored vs. naive distances,
//!   incremental vs. dense objectives, metric brute force, bound checks).

pub mod config;
pub mod engine;
pub mod label_state;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod semisl;
pub mod store;
pub mod strategies;
pub mod synthetic;
pub mod verify;
