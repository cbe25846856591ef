//! Command-line entry point: bind config files to the experiment engine,
//! the synthetic generator, reporting, and the oracle-check suite.
//!
//! Exit codes: 0 success, 1 runtime failure (diagnostic on stderr),
//! 2 usage error.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use lebench::config::ExperimentConfig;
use lebench::engine::{
    compare_runs, comparison_to_csv, discover_runs, output_root, resume_experiment, run_experiment,
    ExperimentResult, RoundRecord,
};
use lebench::store::write_store;
use lebench::synthetic::{generate_synthetic, split_dataset, SyntheticSpec};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "lebench", version, about = "Label-efficient learning benchmark engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment described by a config file.
    Run {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output root directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue a partial run in the same results directory.
        #[arg(long)]
        resume: bool,
    },
    /// Generate a synthetic embedding store (+ manifest sidecar).
    GenSynth {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        views: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        /// Output store path (e.g. data/synth.lebm).
        #[arg(long)]
        out: PathBuf,
        /// Validation fraction (0 skips splitting).
        #[arg(long, default_value_t = 0.1)]
        val_fraction: f64,
        /// Test fraction (0 skips splitting).
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
    },
    /// Aggregate completed runs into a per-round mean ± stderr CSV.
    Report {
        /// Results root (searched recursively for runs).
        #[arg(long)]
        dir: PathBuf,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle-equivalence checks and print one line per check.
    Verify {
        /// Run only the named checks (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run { config, seed, out, resume } => cmd_run(config, seed, out, resume),
        Command::GenSynth {
            classes,
            count,
            dim,
            views,
            separation,
            noise,
            seed,
            out,
            val_fraction,
            test_fraction,
        } => cmd_gen_synth(
            SyntheticSpec { classes, count, dim, views, separation, noise, seed },
            out,
            val_fraction,
            test_fraction,
        ),
        Command::Report { dir, out } => cmd_report(dir, out),
        Command::Verify { checks } => cmd_verify(checks),
    }
}

fn cmd_run(
    config_path: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    resume: bool,
) -> anyhow::Result<i32> {
    let mut cfg = ExperimentConfig::load(&config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    // Precedence: command line over config file.
    if let Some(seed) = seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = out {
        cfg.experiment.output_dir = Some(out);
    }

    let run_dir = cfg.run_dir(&output_root(&cfg));
    let result = if resume {
        let snapshot_path = run_dir.join("config.snapshot");
        if !snapshot_path.exists() {
            bail!("nothing to resume in {}", run_dir.display());
        }
        let snapshot = ExperimentConfig::from_toml_str(&std::fs::read_to_string(&snapshot_path)?)?;
        if snapshot.hash() != cfg.hash() {
            bail!("config does not match the snapshot recorded in {}", run_dir.display());
        }
        resume_experiment(&run_dir)?
    } else {
        run_experiment(&cfg)?
    };
    print_result(&result, &run_dir);
    Ok(0)
}

fn print_record(r: &RoundRecord) {
    println!(
        "round {:>3}  budget {:>6}  test_acc {:.4}  bal_acc {:.4}  macro_f1 {:.4}  pool_acc {:.4}  [{} / {}]",
        r.round,
        r.cumulative_budget,
        r.test_accuracy,
        r.balanced_accuracy,
        r.macro_f1,
        r.pool_accuracy,
        r.strategy,
        r.tier
    );
}

fn print_result(result: &ExperimentResult, dir: &std::path::Path) {
    for r in &result.rounds {
        print_record(r);
    }
    println!("final:");
    print_record(&result.final_record);
    println!("results written to {}", dir.display());
}

fn cmd_gen_synth(
    spec: SyntheticSpec,
    out: PathBuf,
    val_fraction: f64,
    test_fraction: f64,
) -> anyhow::Result<i32> {
    let mut store = generate_synthetic(&spec)?;
    if val_fraction > 0.0 || test_fraction > 0.0 {
        if val_fraction <= 0.0 || test_fraction <= 0.0 {
            bail!("val and test fractions must both be positive (or both 0 to skip splitting)");
        }
        store = split_dataset(store, val_fraction, test_fraction, spec.seed)?;
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_store(&store, &out)?;
    let (pool, val, test) = store.split_sizes();
    println!(
        "wrote {} ({} examples, {} dims, {} views, {} classes; pool {}, val {}, test {})",
        out.display(),
        store.n(),
        store.d(),
        store.views(),
        store.k(),
        pool,
        val,
        test
    );
    Ok(0)
}

fn cmd_report(dir: PathBuf, out: Option<PathBuf>) -> anyhow::Result<i32> {
    let runs = discover_runs(&dir);
    if runs.is_empty() {
        bail!("no runs found under {}", dir.display());
    }
    let table = compare_runs(&runs)?;
    let csv = comparison_to_csv(&table);
    match out {
        Some(path) => {
            std::fs::write(&path, &csv)?;
            println!("wrote {} ({} rows from {} runs)", path.display(), table.rows.len(), runs.len());
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

fn cmd_verify(checks: Vec<String>) -> anyhow::Result<i32> {
    let reports = if checks.is_empty() {
        lebench::verify::run_all_checks()
    } else {
        let mut reports = Vec::new();
        for name in &checks {
            // Unknown check names are usage errors.
            let Some(report) = lebench::verify::run_check(name) else {
                eprintln!(
                    "error: unknown check '{name}' (known: {}, badge-speedup)",
                    lebench::verify::CHECK_NAMES.join(", ")
                );
                return Ok(2);
            };
            reports.push(report);
        }
        reports
    };
    let mut failing = Vec::new();
    for report in &reports {
        println!("{report}");
        if !report.passed && !report.soft {
            failing.push(report.name);
        }
    }
    if failing.is_empty() {
        Ok(0)
    } else {
        eprintln!("failing checks: {}", failing.join(", "));
        Ok(1)
    }
}
