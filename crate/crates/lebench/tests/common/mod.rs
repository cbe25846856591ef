//! Shared helpers for the integration and acceptance suites.

use lebench::config::ExperimentConfig;

/// Small, fast experiment config over an inline synthetic dataset.
pub fn small_config(strategy: &str, seed: u64, out: &std::path::Path) -> ExperimentConfig {
    let toml = format!(
        r#"
[dataset.synthetic]
classes = 3
count = 300
dim = 8
views = 2
separation = 2.0
noise = 0.5
seed = 11

[experiment]
strategy = "{strategy}"
semi_sl = "flexmatch"
budget_schedule = [20, 20, 20]
seed = {seed}
output_dir = "{out}"

[trainer]
epochs = 40
batch_size = 32
"#,
        out = out.display()
    );
    ExperimentConfig::from_toml_str(&toml).expect("valid test config")
}

/// rounds.jsonl bytes with the two wall-time fields masked (wall times are
/// measurements, excluded from determinism comparisons like timestamps).
pub fn mask_wall_times(jsonl: &str) -> String {
    let mut out = String::new();
    for line in jsonl.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut v: serde_json::Value = serde_json::from_str(line).expect("valid record line");
        v["training_wall_time_seconds"] = serde_json::Value::from(0.0);
        v["selection_wall_time_seconds"] = serde_json::Value::from(0.0);
        out.push_str(&serde_json::to_string(&v).unwrap());
        out.push('\n');
    }
    out
}

/// Field-by-field record equality ignoring the wall-time measurements.
pub fn records_equal_modulo_times(
    a: &lebench::engine::RoundRecord,
    b: &lebench::engine::RoundRecord,
) -> bool {
    a.round == b.round
        && a.cumulative_budget == b.cumulative_budget
        && a.test_accuracy == b.test_accuracy
        && a.balanced_accuracy == b.balanced_accuracy
        && a.macro_f1 == b.macro_f1
        && a.pool_accuracy == b.pool_accuracy
        && a.strategy == b.strategy
        && a.tier == b.tier
}

/// Builds a run directory that looks exactly like an interrupt after
/// `keep_rounds` committed rounds, from a completed reference run. The
/// checkpoint is left stale so resume exercises the deterministic-retrain
/// path unless the caller installs a matching one.
pub fn prune_to_partial(
    reference_dir: &std::path::Path,
    partial_dir: &std::path::Path,
    keep_rounds: usize,
    ckpt_hash: &str,
) {
    use serde_json::Value;
    std::fs::create_dir_all(partial_dir).unwrap();
    std::fs::copy(reference_dir.join("config.snapshot"), partial_dir.join("config.snapshot"))
        .unwrap();
    std::fs::copy(reference_dir.join("model.ckpt"), partial_dir.join("model.ckpt")).unwrap();

    let rounds = std::fs::read_to_string(reference_dir.join("rounds.jsonl")).unwrap();
    let truncated: String = rounds.lines().take(keep_rounds).map(|l| format!("{l}\n")).collect();
    std::fs::write(partial_dir.join("rounds.jsonl"), truncated).unwrap();

    let mut state: Value = serde_json::from_str(
        &std::fs::read_to_string(reference_dir.join("label_state.json")).unwrap(),
    )
    .unwrap();
    let round_of: Vec<Option<u64>> = state["label_state"]["round_of"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64())
        .collect();
    let labeled: Vec<bool> =
        round_of.iter().map(|r| r.map_or(false, |ro| (ro as usize) < keep_rounds)).collect();
    state["label_state"]["labeled"] = serde_json::to_value(&labeled).unwrap();
    state["label_state"]["round_of"] = serde_json::to_value(
        round_of
            .iter()
            .map(|r| r.filter(|&ro| (ro as usize) < keep_rounds))
            .collect::<Vec<Option<u64>>>(),
    )
    .unwrap();
    state["label_state"]["current_round"] = Value::from(keep_rounds);
    state["completed_rounds"] = Value::from(keep_rounds);
    state["ckpt_hash"] = Value::from(ckpt_hash);
    std::fs::write(
        partial_dir.join("label_state.json"),
        serde_json::to_vec_pretty(&state).unwrap(),
    )
    .unwrap();
}
