//! The annotation loop: train → select → annotate → record, with persisted
//! round records, deterministic resume, and run comparison.
//!
//! Round structure (framing the loop so each record's model was trained on
//! exactly the budget the record reports):
//!
//! - round 0 draws its batch uniformly at random; every later round selects
//!   with the strategy, informed by the previous round's model
//! - the batch is annotated, the configured tier is retrained from scratch
//!   with the configured semi-supervised method, and the freshly trained
//!   model is evaluated (test metrics + pool accuracy) into a RoundRecord
//! - after the schedule is exhausted, the deep tier is trained on the full
//!   labeled set (adaptive-threshold method by default) regardless of the
//!   selection tier, producing the final-model record
//!
//! Every stochastic step draws from a stream keyed by `(seed, consumer,
//! round)`, so resuming from the last completed round replays the exact
//! draws of an uninterrupted run.

mod compare;

pub use compare::{compare_runs, comparison_to_csv, ComparisonRow, ComparisonTable};

use crate::config::{ConfigError, ExperimentConfig, SelectionMode};
use crate::label_state::{LabelState, LabelStateError};
use crate::metrics::{accuracy, balanced_accuracy, macro_f1, pool_accuracy, ConfusionMatrix};
use crate::models::{
    save_checkpoint, Classifier, ModelError, Tier, TrainConfig,
};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::semisl::{train_semi_supervised, train_semi_supervised_detailed, TrainOutcome};
use crate::store::{read_store, EmbeddingStore, Split, StoreError};
use crate::strategies::{
    build_fisher_context, select_badge, select_bait, select_coreset, select_random, select_top,
    uncertainty_scores, GradFactors, SelectionResult, StrategyError, StrategyId, UncertaintyKind,
};
use crate::synthetic::{generate_synthetic, split_dataset, SyntheticError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    LabelState(#[from] LabelStateError),
    #[error("run directory {0} already holds a run; resume it or choose a fresh directory")]
    RunExists(PathBuf),
    #[error("no resumable run in {0}")]
    MissingRun(PathBuf),
    #[error("config snapshot does not match recorded run state (edited config?)")]
    ConfigMismatch,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("corrupt run state: {0}")]
    CorruptState(String),
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("record (de)serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// One line of `rounds.jsonl`. Wall times are measurements and are the only
/// fields excluded from byte-identity comparisons between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub round: u32,
    pub cumulative_budget: usize,
    pub test_accuracy: f64,
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub pool_accuracy: f64,
    pub training_wall_time_seconds: f64,
    pub selection_wall_time_seconds: f64,
    pub strategy: String,
    pub tier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalPayload {
    pub record: RoundRecord,
    pub status: String,
}

/// In-memory result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rounds: Vec<RoundRecord>,
    pub final_record: RoundRecord,
    pub status: String,
}

/// Commit-point state file: written last in each round's persistence
/// sequence. `ckpt_hash` lets resume detect a checkpoint from a round whose
/// commit never landed (the model is then retrained deterministically).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunState {
    config_hash: String,
    completed_rounds: usize,
    ckpt_hash: String,
    label_state: LabelState,
}

pub const ENV_RESULTS_ROOT: &str = "LEBENCH_RESULTS";

/// Output root resolution: config `output_dir`, then `$LEBENCH_RESULTS`,
/// then `./results`. (The CLI's `--out` overrides by rewriting the config.)
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = &cfg.experiment.output_dir {
        return dir.clone();
    }
    if let Ok(root) = std::env::var(ENV_RESULTS_ROOT) {
        if !root.is_empty() {
            return PathBuf::from(root);
        }
    }
    PathBuf::from("results")
}

/// Loads the config's dataset: a store file, or a generated + stratified
/// synthetic store (split seed = generator seed, so the dataset is shared
/// across experiment seeds).
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<EmbeddingStore, EngineError> {
    if let Some(path) = &cfg.dataset.path {
        if !path.exists() {
            return Err(EngineError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("dataset file not found: {}", path.display()),
            )));
        }
        return Ok(read_store(path)?);
    }
    let spec = cfg.dataset.synthetic.as_ref().expect("validated");
    let store = generate_synthetic(spec)?;
    Ok(split_dataset(store, cfg.dataset.val_fraction, cfg.dataset.test_fraction, spec.seed)?)
}

struct RunContext {
    cfg: ExperimentConfig,
    store: EmbeddingStore,
    pool_rows: Vec<usize>,
    test_rows: Vec<usize>,
    dir: PathBuf,
}

impl RunContext {
    fn prepare(cfg: &ExperimentConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let store = load_dataset(cfg)?;
        let pool_rows = store.indices_of(Split::Pool);
        let test_rows = store.indices_of(Split::Test);
        let dir = cfg.run_dir(&output_root(cfg));
        Ok(Self { cfg: cfg.clone(), store, pool_rows, test_rows, dir })
    }

    fn loop_tier(&self) -> Tier {
        match self.cfg.experiment.selection_mode {
            SelectionMode::Proxy => self.cfg.experiment.proxy_tier,
            SelectionMode::EndToEnd => self.cfg.experiment.final_tier,
        }
    }

    fn train_cfg(&self, stream: Stream, round: u64) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.cfg.experiment.seed, stream, round),
            ..self.cfg.trainer.clone()
        }
    }

    /// Penultimate features of every pool example under `model`, view 0.
    fn pool_penultimate(&self, model: &Classifier) -> Array2<f64> {
        let width = model.penultimate(&self.store.feature_f64(0, self.pool_rows[0])).len();
        let mut out = Array2::<f64>::zeros((self.pool_rows.len(), width));
        for (i, &row) in self.pool_rows.iter().enumerate() {
            let h = model.penultimate(&self.store.feature_f64(0, row));
            for (dst, src) in out.row_mut(i).iter_mut().zip(&h) {
                *dst = *src;
            }
        }
        out
    }

    fn select_batch(
        &self,
        state: &LabelState,
        model: &Classifier,
        batch: usize,
        round: u64,
    ) -> Result<SelectionResult, EngineError> {
        let seed = self.cfg.experiment.seed;
        let mut rng = stream_rng(seed, Stream::Selection, round);
        let unlabeled_pool = state.unlabeled_indices();
        let unlabeled_rows: Vec<usize> = unlabeled_pool.iter().map(|&p| self.pool_rows[p]).collect();
        let strategy = self.cfg.experiment.strategy;
        let mut result = match strategy {
            StrategyId::Random => select_random(state, batch, &mut rng)?,
            StrategyId::Confidence | StrategyId::Entropy | StrategyId::Margin => {
                let kind = match strategy {
                    StrategyId::Confidence => UncertaintyKind::Confidence,
                    StrategyId::Entropy => UncertaintyKind::Entropy,
                    _ => UncertaintyKind::Margin,
                };
                let probs = model.proba_batch(&self.store, 0, &unlabeled_rows);
                let scores = uncertainty_scores(kind, probs.view(), &unlabeled_pool);
                select_top(&scores, batch, strategy)?
            }
            StrategyId::Coreset => {
                let feats = self.pool_penultimate(model);
                select_coreset(feats.view(), &state.labeled_indices(), batch)?
            }
            StrategyId::Badge => {
                let factors = GradFactors::compute(model, &self.store, &unlabeled_rows);
                match select_badge(
                    &factors,
                    &unlabeled_pool,
                    batch,
                    self.cfg.strategy_params.badge_first_center_uniform,
                    &mut rng,
                ) {
                    Err(StrategyError::DegenerateAllZero) => {
                        log::warn!(
                            "all gradient embeddings are zero (fully confident model); falling back to random selection"
                        );
                        select_random(state, batch, &mut rng)?
                    }
                    other => other?,
                }
            }
            StrategyId::Bait => {
                let feats = self.pool_penultimate(model);
                let probs = model.proba_batch(&self.store, 0, &self.pool_rows);
                let ctx = build_fisher_context(
                    &feats.view(),
                    &probs.view(),
                    &unlabeled_pool,
                    &state.labeled_indices(),
                    &self.cfg.strategy_params.bait(),
                )?;
                select_bait(
                    &ctx,
                    &unlabeled_pool,
                    batch,
                    self.cfg.strategy_params.bait_sweeps,
                    self.cfg.strategy_params.bait_candidates,
                    &mut rng,
                )?
            }
        };
        result.rng_stream = format!("selection/{round}");
        Ok(result)
    }

    fn evaluate(
        &self,
        state: &LabelState,
        model: &Classifier,
        round: u32,
        train_secs: f64,
        sel_secs: f64,
    ) -> Result<RoundRecord, EngineError> {
        let y_true: Vec<usize> = self.test_rows.iter().map(|&r| self.store.label(r)).collect();
        let y_pred = model.predict_batch(&self.store, 0, &self.test_rows);
        let c = ConfusionMatrix::from_pairs(&y_true, &y_pred, self.store.k())
            .expect("labels validated by the store");
        let truth_pool: Vec<usize> = self.pool_rows.iter().map(|&r| self.store.label(r)).collect();
        let preds_pool = model.predict_batch(&self.store, 0, &self.pool_rows);
        Ok(RoundRecord {
            round,
            cumulative_budget: state.consumed_budget(),
            test_accuracy: accuracy(&c),
            balanced_accuracy: balanced_accuracy(&c),
            macro_f1: macro_f1(&c),
            pool_accuracy: pool_accuracy(&truth_pool, state, &preds_pool),
            training_wall_time_seconds: train_secs,
            selection_wall_time_seconds: sel_secs,
            strategy: self.cfg.experiment.strategy.as_str().to_string(),
            tier: String::new(), // set by the caller
        })
    }

    /// Optional audit dumps: per-round selection scores and per-epoch
    /// flexmatch threshold states, as structured text under `audit/`.
    fn write_audit(
        &self,
        round: usize,
        selection: &SelectionResult,
        outcome: &TrainOutcome,
    ) -> Result<(), EngineError> {
        let audit_dir = self.dir.join("audit");
        std::fs::create_dir_all(&audit_dir)?;
        let mut body = String::new();
        for (i, &index) in selection.indices.iter().enumerate() {
            body.push_str(&serde_json::to_string(&serde_json::json!({
                "round": round,
                "index": index,
                "score": selection.scores[i],
                "strategy": selection.strategy.as_str(),
                "rng_stream": selection.rng_stream,
            }))?);
            body.push('\n');
        }
        write_atomic(&audit_dir.join(format!("round_{round:04}_selection.jsonl")), body.as_bytes())?;
        if !outcome.threshold_log.is_empty() {
            let mut body = String::new();
            for state in &outcome.threshold_log {
                body.push_str(&serde_json::to_string(state)?);
                body.push('\n');
            }
            write_atomic(
                &audit_dir.join(format!("round_{round:04}_thresholds.jsonl")),
                body.as_bytes(),
            )?;
        }
        Ok(())
    }

    /// Persists one completed round. The state file rename is the commit
    /// point; everything before it can be redone deterministically.
    fn persist_round(
        &self,
        records: &[RoundRecord],
        model: &Classifier,
        state: &LabelState,
    ) -> Result<(), EngineError> {
        save_checkpoint(model, &self.dir.join("model.ckpt"))?;
        write_rounds(&self.dir.join("rounds.jsonl"), records)?;
        let run_state = RunState {
            config_hash: self.cfg.hash(),
            completed_rounds: records.len(),
            ckpt_hash: hash_bytes(&crate::models::checkpoint_to_bytes(model)),
            label_state: state.clone(),
        };
        write_atomic(&self.dir.join("label_state.json"), &serde_json::to_vec_pretty(&run_state)?)?;
        Ok(())
    }

    /// Runs rounds `start..schedule.len()` and the final training, given
    /// the state as of round `start` and the model that produced it.
    fn run_from(
        &self,
        mut state: LabelState,
        mut model: Option<Classifier>,
        mut records: Vec<RoundRecord>,
    ) -> Result<ExperimentResult, EngineError> {
        let schedule = self.cfg.experiment.budget_schedule.clone();
        let seed = self.cfg.experiment.seed;
        let loop_tier = self.loop_tier();

        for round in records.len()..schedule.len() {
            let batch = schedule[round];
            let sel_start = std::time::Instant::now();
            let selection = if round == 0 {
                let mut rng = stream_rng(seed, Stream::InitialBatch, 0);
                let mut s = select_random(&state, batch, &mut rng)?;
                s.rng_stream = "initial-batch".into();
                s
            } else {
                let prev = model.as_ref().expect("model exists after round 0");
                self.select_batch(&state, prev, batch, round as u64)?
            };
            let sel_secs = sel_start.elapsed().as_secs_f64();
            state.annotate(&selection.indices)?;

            let train_start = std::time::Instant::now();
            let outcome = train_semi_supervised_detailed(
                &self.store,
                &state,
                self.cfg.experiment.semi_sl,
                loop_tier,
                &self.train_cfg(Stream::Training, round as u64),
                &self.cfg.semi_sl_params,
            )?;
            let train_secs = train_start.elapsed().as_secs_f64();

            let mut record =
                self.evaluate(&state, &outcome.classifier, round as u32, train_secs, sel_secs)?;
            record.tier = loop_tier.as_str().to_string();
            records.push(record);
            if self.cfg.experiment.audit {
                self.write_audit(round, &selection, &outcome)?;
            }
            model = Some(outcome.classifier);
            self.persist_round(&records, model.as_ref().unwrap(), &state)?;
        }

        // Final deep-tier training on the full labeled set, regardless of
        // the tier used for selection.
        let train_start = std::time::Instant::now();
        let final_model = train_semi_supervised(
            &self.store,
            &state,
            self.cfg.experiment.final_semi_sl,
            self.cfg.experiment.final_tier,
            &self.train_cfg(Stream::FinalTraining, 0),
            &self.cfg.semi_sl_params,
        )?;
        let train_secs = train_start.elapsed().as_secs_f64();
        let mut final_record =
            self.evaluate(&state, &final_model, schedule.len() as u32, train_secs, 0.0)?;
        final_record.tier = self.cfg.experiment.final_tier.as_str().to_string();

        save_checkpoint(&final_model, &self.dir.join("model.ckpt"))?;
        let payload = FinalPayload { record: final_record.clone(), status: "completed".into() };
        write_atomic(&self.dir.join("final.json"), &serde_json::to_vec_pretty(&payload)?)?;

        Ok(ExperimentResult {
            config: self.cfg.clone(),
            rounds: records,
            final_record,
            status: "completed".into(),
        })
    }
}

/// Runs a fresh experiment into the config's run directory. Fails if the
/// directory already holds run artifacts (resume instead).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, EngineError> {
    let ctx = RunContext::prepare(cfg)?;
    if ctx.dir.join("label_state.json").exists() || ctx.dir.join("rounds.jsonl").exists() {
        return Err(EngineError::RunExists(ctx.dir.clone()));
    }
    std::fs::create_dir_all(&ctx.dir)?;
    std::fs::write(ctx.dir.join("config.snapshot"), ctx.cfg.to_toml_string())?;

    let n_pool = ctx.pool_rows.len();
    let state = LabelState::new(n_pool, &cfg.experiment.budget_schedule)?;
    ctx.run_from(state, None, Vec::new())
}

/// Resumes a run from its results directory. A completed run is returned
/// as-is; a partial run continues from the last committed round and ends
/// bit-identical to an uninterrupted run with the same config.
pub fn resume_experiment(dir: &Path) -> Result<ExperimentResult, EngineError> {
    let snapshot_path = dir.join("config.snapshot");
    if !snapshot_path.exists() {
        return Err(EngineError::MissingRun(dir.to_path_buf()));
    }
    let cfg = ExperimentConfig::from_toml_str(&std::fs::read_to_string(&snapshot_path)?)?;

    let state_path = dir.join("label_state.json");
    if !state_path.exists() {
        return Err(EngineError::MissingRun(dir.to_path_buf()));
    }
    let run_state: RunState = serde_json::from_str(&std::fs::read_to_string(&state_path)?)
        .map_err(|e| EngineError::CorruptState(e.to_string()))?;
    if run_state.config_hash != cfg.hash() {
        return Err(EngineError::ConfigMismatch);
    }
    run_state
        .label_state
        .validate()
        .map_err(|e| EngineError::CorruptState(format!("label state invariant violated: {e}")))?;

    let mut records = read_rounds(&dir.join("rounds.jsonl"))?;
    if records.len() < run_state.completed_rounds {
        return Err(EngineError::CorruptState(format!(
            "state claims {} committed rounds but only {} records exist",
            run_state.completed_rounds,
            records.len()
        )));
    }
    // Records past the commit point belong to an interrupted round.
    records.truncate(run_state.completed_rounds);
    if run_state.label_state.current_round() != run_state.completed_rounds {
        return Err(EngineError::CorruptState(
            "label state round does not match committed records".into(),
        ));
    }

    let mut ctx = RunContext::prepare(&cfg)?;
    ctx.dir = dir.to_path_buf();

    // Completed run: hand back the stored result without recomputing.
    let final_path = dir.join("final.json");
    if final_path.exists() {
        let payload: FinalPayload = serde_json::from_str(&std::fs::read_to_string(&final_path)?)
            .map_err(|e| EngineError::CorruptState(e.to_string()))?;
        return Ok(ExperimentResult {
            config: cfg,
            rounds: records,
            final_record: payload.record,
            status: payload.status,
        });
    }

    // Model behind the last committed round: from the checkpoint when it
    // matches the commit, otherwise retrained deterministically. Only the
    // loop needs it; a run that already finished its rounds goes straight
    // to final training.
    let schedule_len = cfg.experiment.budget_schedule.len();
    let model = if run_state.completed_rounds == 0 || run_state.completed_rounds >= schedule_len {
        None
    } else {
        let ckpt_path = dir.join("model.ckpt");
        let bytes = std::fs::read(&ckpt_path)
            .map_err(|e| EngineError::CorruptCheckpoint(format!("{}: {e}", ckpt_path.display())))?;
        if hash_bytes(&bytes) == run_state.ckpt_hash {
            Some(
                crate::models::checkpoint_from_bytes(&bytes)
                    .map_err(|e| EngineError::CorruptCheckpoint(e.to_string()))?,
            )
        } else {
            // A newer checkpoint from an uncommitted round; reproduce the
            // committed round's model from its seed and label state.
            log::warn!("checkpoint does not match commit point; retraining the last committed model");
            let round = run_state.completed_rounds - 1;
            Some(train_semi_supervised(
                &ctx.store,
                &run_state.label_state,
                ctx.cfg.experiment.semi_sl,
                ctx.loop_tier(),
                &ctx.train_cfg(Stream::Training, round as u64),
                &ctx.cfg.semi_sl_params,
            )?)
        }
    };

    ctx.run_from(run_state.label_state, model, records)
}

fn write_rounds(path: &Path, records: &[RoundRecord]) -> Result<(), EngineError> {
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(r)?);
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

/// Parses a rounds.jsonl payload; used by resume, reporting, and the fuzz
/// harness.
pub fn parse_rounds(text: &str) -> Result<Vec<RoundRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str::<RoundRecord>)
        .collect()
}

fn read_rounds(path: &Path) -> Result<Vec<RoundRecord>, EngineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(parse_rounds(&std::fs::read_to_string(path)?)?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn hash_bytes(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads a completed or partial run for reporting.
pub fn load_run(dir: &Path) -> Result<(ExperimentConfig, Vec<RoundRecord>, Option<FinalPayload>), EngineError> {
    let cfg = ExperimentConfig::from_toml_str(&std::fs::read_to_string(dir.join("config.snapshot"))?)?;
    let records = read_rounds(&dir.join("rounds.jsonl"))?;
    let final_path = dir.join("final.json");
    let final_payload = if final_path.exists() {
        Some(
            serde_json::from_str(&std::fs::read_to_string(&final_path)?)
                .map_err(|e| EngineError::CorruptState(e.to_string()))?,
        )
    } else {
        None
    };
    Ok((cfg, records, final_payload))
}

/// Recursively finds run directories (those holding `rounds.jsonl`).
pub fn discover_runs(root: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join("rounds.jsonl").exists() {
            found.push(dir);
            continue;
        }
        if let Ok(entries) = std::fs::read_dir(&dir) {
            for entry in entries.flatten() {
                let p = entry.path();
                if p.is_dir() {
                    stack.push(p);
                }
            }
        }
    }
    found.sort();
    found
}
