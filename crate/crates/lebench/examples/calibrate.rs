//! Pilot harness for the synthetic benchmark: runs the strategy/method/mode
//! grid behind the acceptance regression bounds and prints the measured
//! quantities (label-efficiency ratios, per-round semi-supervised gaps,
//! proxy-vs-end-to-end parity, wall-time ratios). Run with --release.
//!
//! Usage: calibrate [separation] [seeds] [epochs]

use lebench::config::ExperimentConfig;
use lebench::engine::{run_experiment, ExperimentResult};

fn benchmark_config(
    out: &std::path::Path,
    strategy: &str,
    semi_sl: &str,
    mode: &str,
    seed: u64,
    separation: f64,
    epochs: usize,
) -> ExperimentConfig {
    let toml = format!(
        r#"
[dataset.synthetic]
classes = 10
count = 5000
dim = 32
views = 2
separation = {separation}
noise = 0.75
seed = 424242

[experiment]
strategy = "{strategy}"
semi_sl = "{semi_sl}"
selection_mode = "{mode}"
budget_schedule = [100, 100, 100, 100, 100, 100, 100, 100, 100, 100]
seed = {seed}
output_dir = "{out}"

[trainer]
epochs = {epochs}
batch_size = 64
"#,
        out = out.display()
    );
    ExperimentConfig::from_toml_str(&toml).expect("valid benchmark config")
}

struct Curve {
    budgets: Vec<usize>,
    mean_test_acc: Vec<f64>,
    mean_train_secs: f64,
    mean_final_acc: f64,
}

fn mean_curve(results: &[ExperimentResult]) -> Curve {
    let rounds = results[0].rounds.len();
    let budgets: Vec<usize> = results[0].rounds.iter().map(|r| r.cumulative_budget).collect();
    let mut mean_test_acc = vec![0.0; rounds];
    let mut train_secs = 0.0;
    let mut final_acc = 0.0;
    for res in results {
        for (i, r) in res.rounds.iter().enumerate() {
            mean_test_acc[i] += r.test_accuracy;
            train_secs += r.training_wall_time_seconds;
        }
        final_acc += res.final_record.test_accuracy;
    }
    for v in &mut mean_test_acc {
        *v /= results.len() as f64;
    }
    Curve {
        budgets,
        mean_test_acc,
        mean_train_secs: train_secs / (results.len() * rounds) as f64,
        mean_final_acc: final_acc / results.len() as f64,
    }
}

fn run_group(
    root: &std::path::Path,
    tag: &str,
    strategy: &str,
    semi_sl: &str,
    mode: &str,
    seeds: &[u64],
    separation: f64,
    epochs: usize,
) -> Vec<ExperimentResult> {
    seeds
        .iter()
        .map(|&seed| {
            let out = root.join(tag);
            let cfg = benchmark_config(&out, strategy, semi_sl, mode, seed, separation, epochs);
            let start = std::time::Instant::now();
            let res = run_experiment(&cfg).expect("benchmark run");
            eprintln!(
                "  {tag} seed {seed}: final {:.4} (loop last {:.4}) in {:.1}s",
                res.final_record.test_accuracy,
                res.rounds.last().unwrap().test_accuracy,
                start.elapsed().as_secs_f64()
            );
            res
        })
        .collect()
}

/// Smallest budget at which `curve` reaches `target`, if any.
fn budget_to_reach(curve: &Curve, target: f64) -> Option<usize> {
    curve
        .budgets
        .iter()
        .zip(&curve.mean_test_acc)
        .find(|(_, &acc)| acc >= target)
        .map(|(&b, _)| b)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let separation: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let n_seeds: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(60);
    let seeds: Vec<u64> = (1..=n_seeds as u64).collect();

    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    println!("separation={separation} seeds={n_seeds} epochs={epochs}");

    let started = std::time::Instant::now();
    let random = mean_curve(&run_group(root, "random-flex", "random", "flexmatch", "proxy", &seeds, separation, epochs));
    let margin = mean_curve(&run_group(root, "margin-flex", "margin", "flexmatch", "proxy", &seeds, separation, epochs));
    let badge = mean_curve(&run_group(root, "badge-flex", "badge", "flexmatch", "proxy", &seeds, separation, epochs));
    let margin_sup = mean_curve(&run_group(root, "margin-sup", "margin", "supervised_only", "proxy", &seeds, separation, epochs));
    let margin_e2e = mean_curve(&run_group(root, "margin-e2e", "margin", "flexmatch", "end_to_end", &seeds, separation, epochs));

    println!("\n== curves (budget: random / margin / badge / margin-sup) ==");
    for i in 0..random.budgets.len() {
        println!(
            "{:>5}: {:.4} / {:.4} / {:.4} / {:.4}",
            random.budgets[i],
            random.mean_test_acc[i],
            margin.mean_test_acc[i],
            badge.mean_test_acc[i],
            margin_sup.mean_test_acc[i]
        );
    }

    let total = *random.budgets.last().unwrap();
    let random_final = *random.mean_test_acc.last().unwrap();
    println!("\n== criterion 6 (label efficiency vs random final {random_final:.4}) ==");
    for (name, curve) in [("margin", &margin), ("badge", &badge)] {
        match budget_to_reach(curve, random_final) {
            Some(b) => println!("{name}: reaches it at budget {b} ({:.0}%)", 100.0 * b as f64 / total as f64),
            None => println!("{name}: never reaches it"),
        }
    }

    println!("\n== criterion 7 (flexmatch - supervised_only, margin strategy, per round) ==");
    let mut worst = f64::INFINITY;
    for i in 0..margin.budgets.len() {
        let gap = margin.mean_test_acc[i] - margin_sup.mean_test_acc[i];
        worst = worst.min(gap);
        println!("{:>5}: {gap:+.4}", margin.budgets[i]);
    }
    println!("worst round gap: {worst:+.4}");

    println!("\n== criterion 8 (proxy vs end-to-end selection, final deep model) ==");
    println!(
        "proxy {:.4} vs end_to_end {:.4} (gap {:+.4})",
        margin.mean_final_acc,
        margin_e2e.mean_final_acc,
        margin_e2e.mean_final_acc - margin.mean_final_acc
    );

    println!("\n== criterion 10 (loop retraining wall time) ==");
    println!(
        "proxy tier {:.3}s vs deep tier {:.3}s per round (ratio {:.1}x)",
        margin.mean_train_secs,
        margin_e2e.mean_train_secs,
        margin_e2e.mean_train_secs / margin.mean_train_secs
    );

    println!("\ntotal pilot time: {:.0}s", started.elapsed().as_secs_f64());
}
