//! Experiment configuration: the structured-text schema binding datasets,
//! strategies, trainers, and budgets. Configs are complete records of a
//! run — unknown keys are hard errors, and the engine snapshots the
//! resolved config (plus its hash) into the results directory so a results
//! tree is always self-describing.

use crate::models::{Tier, TrainConfig};
use crate::semisl::{SemiSlMethod, SemiSlParams};
use crate::strategies::{BaitParams, StrategyId};
use crate::synthetic::SyntheticSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether the loop retrains the proxy tier or the deep tier for selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Proxy,
    EndToEnd,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Proxy => "proxy",
            SelectionMode::EndToEnd => "end_to_end",
        }
    }
}

/// Dataset source: a store file on disk, or an inline synthetic spec that
/// is generated and stratified-split at run start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Val/test fractions for splitting a synthetic store.
    #[serde(default = "default_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
}

fn default_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub strategy: StrategyId,
    pub semi_sl: SemiSlMethod,
    #[serde(default = "default_proxy_tier")]
    pub proxy_tier: Tier,
    #[serde(default = "default_selection_mode")]
    pub selection_mode: SelectionMode,
    #[serde(default = "default_final_tier")]
    pub final_tier: Tier,
    /// Method for the final deep-tier training; adaptive thresholds by
    /// default regardless of the loop's method.
    #[serde(default = "default_final_semi_sl")]
    pub final_semi_sl: SemiSlMethod,
    pub budget_schedule: Vec<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Dump per-round selection scores and per-epoch threshold states into
    /// `audit/` under the run directory.
    #[serde(default)]
    pub audit: bool,
}

fn default_proxy_tier() -> Tier {
    Tier::Linear
}

fn default_selection_mode() -> SelectionMode {
    SelectionMode::Proxy
}

fn default_final_tier() -> Tier {
    Tier::Shallow
}

fn default_final_semi_sl() -> SemiSlMethod {
    SemiSlMethod::Flexmatch
}

/// Per-strategy hyperparameters, all config-exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyParams {
    /// Sample the first k-means++ center uniformly instead of ∝ ‖g‖².
    pub badge_first_center_uniform: bool,
    pub bait_pca_dim: Option<usize>,
    pub bait_lambda: f64,
    pub bait_sweeps: usize,
    pub bait_candidates: usize,
    pub bait_include_labeled: bool,
}

impl Default for StrategyParams {
    fn default() -> Self {
        let bait = BaitParams::default();
        Self {
            badge_first_center_uniform: false,
            bait_pca_dim: bait.pca_dim,
            bait_lambda: bait.lambda,
            bait_sweeps: bait.sweeps,
            bait_candidates: bait.candidates,
            bait_include_labeled: bait.include_labeled,
        }
    }
}

impl StrategyParams {
    pub fn bait(&self) -> BaitParams {
        BaitParams {
            pca_dim: self.bait_pca_dim,
            lambda: self.bait_lambda,
            sweeps: self.bait_sweeps,
            candidates: self.bait_candidates,
            include_labeled: self.bait_include_labeled,
        }
    }
}

/// Complete experiment description. `trainer.seed` is managed by the
/// engine (derived per round from `experiment.seed`); a value in the file
/// is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub semi_sl_params: SemiSlParams,
    #[serde(default)]
    pub strategy_params: StrategyParams,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of the canonical serialization; persisted with run state so a
    /// resume can detect edited configs.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.dataset.path, &self.dataset.synthetic) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "dataset.path and dataset.synthetic are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "dataset needs either a path or a synthetic spec".into(),
                ))
            }
            _ => {}
        }
        let schedule = &self.experiment.budget_schedule;
        if schedule.is_empty() {
            return Err(ConfigError::Invalid("budget_schedule must be nonempty".into()));
        }
        if schedule.iter().any(|&b| b == 0) {
            return Err(ConfigError::Invalid("budget_schedule entries must be >= 1".into()));
        }
        if self.experiment.final_tier != Tier::Shallow {
            return Err(ConfigError::Invalid(
                "final_tier must be 'shallow' (the deep tier at this scale)".into(),
            ));
        }
        if !(self.semi_sl_params.base_tau > 0.0 && self.semi_sl_params.base_tau < 1.0) {
            return Err(ConfigError::Invalid("semi_sl_params.base_tau must lie in (0, 1)".into()));
        }
        if self.semi_sl_params.lambda_u < 0.0 {
            return Err(ConfigError::Invalid("semi_sl_params.lambda_u must be nonnegative".into()));
        }
        if !(self.semi_sl_params.unsup_ratio > 0.0) {
            return Err(ConfigError::Invalid("semi_sl_params.unsup_ratio must be positive".into()));
        }
        if !(self.strategy_params.bait_lambda > 0.0) {
            return Err(ConfigError::Invalid("strategy_params.bait_lambda must be positive".into()));
        }
        self.trainer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Dataset name used in the results directory layout.
    pub fn dataset_name(&self) -> String {
        match (&self.dataset.path, &self.dataset.synthetic) {
            (Some(p), _) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            (None, Some(s)) => s.dataset_name(),
            _ => "dataset".into(),
        }
    }

    /// `<root>/<dataset>/<strategy>/<mode>/<seed>/`
    pub fn run_dir(&self, root: &std::path::Path) -> PathBuf {
        root.join(self.dataset_name())
            .join(self.experiment.strategy.as_str())
            .join(self.experiment.selection_mode.as_str())
            .join(self.experiment.seed.to_string())
    }
}
