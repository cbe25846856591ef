//! Aggregation of runs into per-round mean ± standard error curves, the
//! table behind learning-curve plots.

use super::{load_run, EngineError, RoundRecord};
use crate::config::ExperimentConfig;
use std::collections::BTreeMap;


/// One aggregated (strategy, round) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub round: u32,
    pub budget: usize,
    pub strategy: String,
    pub mean_test_acc: f64,
    /// `None` with a single trial (undefined spread, flagged).
    pub stderr_test_acc: Option<f64>,
    pub mean_pool_acc: f64,
    pub stderr_pool_acc: Option<f64>,
    pub mean_balanced_acc: f64,
    pub mean_macro_f1: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// True when any group had a single trial (stderr column left empty).
    pub single_trial_flag: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error: sample standard deviation over √trials.
fn stderr(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    Some(var.sqrt() / (xs.len() as f64).sqrt())
}

/// Aggregates runs that share a dataset and budget schedule into per-round
/// mean ± stderr statistics per strategy. Runs of the same strategy under
/// different selection modes form separate series (labelled
/// `strategy@mode` when both appear).
pub fn compare_runs(dirs: &[std::path::PathBuf]) -> Result<ComparisonTable, EngineError> {
    if dirs.is_empty() {
        return Err(EngineError::IncompatibleRuns("no runs given".into()));
    }
    let mut loaded: Vec<(ExperimentConfig, Vec<RoundRecord>)> = Vec::new();
    for dir in dirs {
        let (cfg, records, _) = load_run(dir)?;
        if records.is_empty() {
            return Err(EngineError::IncompatibleRuns(format!(
                "{} holds no completed rounds",
                dir.display()
            )));
        }
        loaded.push((cfg, records));
    }

    let dataset = loaded[0].0.dataset_name();
    let schedule = loaded[0].0.experiment.budget_schedule.clone();
    for (cfg, _) in &loaded {
        if cfg.dataset_name() != dataset {
            return Err(EngineError::IncompatibleRuns(format!(
                "dataset {} != {}",
                cfg.dataset_name(),
                dataset
            )));
        }
        if cfg.experiment.budget_schedule != schedule {
            return Err(EngineError::IncompatibleRuns("budget schedules differ".into()));
        }
    }

    // Group by (strategy, mode); label with the mode only when a strategy
    // appears under more than one.
    let mut modes_per_strategy: BTreeMap<&str, std::collections::BTreeSet<&str>> = BTreeMap::new();
    for (cfg, _) in &loaded {
        modes_per_strategy
            .entry(cfg.experiment.strategy.as_str())
            .or_default()
            .insert(cfg.experiment.selection_mode.as_str());
    }
    let label = |cfg: &ExperimentConfig| -> String {
        let strategy = cfg.experiment.strategy.as_str();
        if modes_per_strategy[strategy].len() > 1 {
            format!("{strategy}@{}", cfg.experiment.selection_mode.as_str())
        } else {
            strategy.to_string()
        }
    };

    let mut groups: BTreeMap<String, Vec<&Vec<RoundRecord>>> = BTreeMap::new();
    for (cfg, records) in &loaded {
        groups.entry(label(cfg)).or_default().push(records);
    }

    let mut rows = Vec::new();
    let mut single_trial_flag = false;
    for (strategy, runs) in &groups {
        let n_rounds = runs.iter().map(|r| r.len()).min().unwrap_or(0);
        if runs.iter().any(|r| r.len() != n_rounds) {
            return Err(EngineError::IncompatibleRuns(format!(
                "runs of '{strategy}' completed different round counts"
            )));
        }
        for round in 0..n_rounds {
            let budget = runs[0][round].cumulative_budget;
            for run in runs {
                if run[round].cumulative_budget != budget {
                    return Err(EngineError::IncompatibleRuns("cumulative budgets differ".into()));
                }
            }
            let test: Vec<f64> = runs.iter().map(|r| r[round].test_accuracy).collect();
            let pool: Vec<f64> = runs.iter().map(|r| r[round].pool_accuracy).collect();
            let bal: Vec<f64> = runs.iter().map(|r| r[round].balanced_accuracy).collect();
            let f1: Vec<f64> = runs.iter().map(|r| r[round].macro_f1).collect();
            if test.len() < 2 {
                single_trial_flag = true;
            }
            rows.push(ComparisonRow {
                round: round as u32,
                budget,
                strategy: strategy.clone(),
                mean_test_acc: mean(&test),
                stderr_test_acc: stderr(&test),
                mean_pool_acc: mean(&pool),
                stderr_pool_acc: stderr(&pool),
                mean_balanced_acc: mean(&bal),
                mean_macro_f1: mean(&f1),
                trials: test.len(),
            });
        }
    }
    if single_trial_flag {
        log::warn!("single-trial group: standard error columns left empty");
    }
    Ok(ComparisonTable { rows, single_trial_flag })
}

/// Renders the fixed-column CSV.
pub fn comparison_to_csv(table: &ComparisonTable) -> String {
    let mut out = String::from(
        "round,budget,strategy,mean_test_acc,stderr_test_acc,mean_pool_acc,stderr_pool_acc,mean_balanced_acc,mean_macro_f1\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.round,
            r.budget,
            r.strategy,
            r.mean_test_acc,
            opt(r.stderr_test_acc),
            r.mean_pool_acc,
            opt(r.stderr_pool_acc),
            r.mean_balanced_acc,
            r.mean_macro_f1
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_formula_matches_hand_example() {
        // accuracies 0.90 and 0.92: mean 0.91, stderr 0.01.
        let xs = [0.90, 0.92];
        assert!((mean(&xs) - 0.91).abs() < 1e-15);
        assert!((stderr(&xs).unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn single_trial_has_no_stderr() {
        assert_eq!(stderr(&[0.5]), None);
    }
}
