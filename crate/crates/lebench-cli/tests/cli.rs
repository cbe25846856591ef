//! End-to-end tests of the CLI surface: subcommands, flag precedence, and
//! exit codes (0 success, 1 runtime failure, 2 usage error).

use std::path::Path;
use std::process::{Command, Output};

fn lebench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lebench"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, seed: u64, out_dir: &Path) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(
        &path,
        format!(
            r#"
[dataset.synthetic]
classes = 3
count = 150
dim = 6
views = 2
separation = 2.5
noise = 0.5
seed = 13

[experiment]
strategy = "margin"
semi_sl = "pseudolabel"
budget_schedule = [10, 10]
seed = {seed}
output_dir = "{}"

[trainer]
epochs = 25
"#,
            out_dir.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_happy_path_populates_results() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("results");
    let cfg = write_config(tmp.path(), 1, &results);
    let out = lebench(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final:"), "{stdout}");

    let run_dir = results
        .join("synthetic_k3_n150_d6_v2_seed13")
        .join("margin")
        .join("proxy")
        .join("1");
    for file in ["config.snapshot", "rounds.jsonl", "final.json", "model.ckpt"] {
        assert!(run_dir.join(file).exists(), "{file} missing");
    }
}

#[test]
fn run_missing_dataset_exits_1_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg_path,
        r#"
[dataset]
path = "no/such/store.lebm"

[experiment]
strategy = "random"
semi_sl = "supervised_only"
budget_schedule = [5]
seed = 1
output_dir = "results"
"#,
    )
    .unwrap();
    let out = lebench(&["run", "--config", cfg_path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no/such/store.lebm"), "path missing from: {stderr}");
}

#[test]
fn cli_seed_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("results");
    let cfg = write_config(tmp.path(), 1, &results);
    let out = lebench(&["run", "--config", cfg.to_str().unwrap(), "--seed", "9"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let seed_dir = results.join("synthetic_k3_n150_d6_v2_seed13/margin/proxy/9");
    assert!(seed_dir.exists(), "results dir for the CLI seed missing");
    // Snapshot records the effective seed.
    let snapshot = std::fs::read_to_string(seed_dir.join("config.snapshot")).unwrap();
    assert!(snapshot.contains("seed = 9"));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lebench(&["run", "--no-such-flag"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = lebench(&["not-a-command"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_synth_writes_store_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("data/toy.lebm");
    let out = lebench(
        &[
            "gen-synth",
            "--classes", "4",
            "--count", "60",
            "--dim", "5",
            "--views", "2",
            "--separation", "2.0",
            "--noise", "0.3",
            "--seed", "21",
            "--out", store.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(store.exists());
    assert!(tmp.path().join("data/toy.lebm.manifest.toml").exists());
    let loaded = lebench::store::read_store(&store).unwrap();
    assert_eq!((loaded.n(), loaded.d(), loaded.views(), loaded.k()), (60, 5, 2, 4));
    let (pool, val, test) = loaded.split_sizes();
    assert_eq!(pool + val + test, 60);
    assert_eq!(val, 6);
    assert_eq!(test, 6);
}

#[test]
fn run_on_generated_store_file_works() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("toy.lebm");
    let gen = lebench(
        &[
            "gen-synth",
            "--classes", "3",
            "--count", "120",
            "--dim", "4",
            "--views", "1",
            "--separation", "3.0",
            "--noise", "0.2",
            "--seed", "5",
            "--out", store.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(gen.status.success());
    let cfg_path = tmp.path().join("file.toml");
    std::fs::write(
        &cfg_path,
        format!(
            r#"
[dataset]
path = "{}"

[experiment]
strategy = "confidence"
semi_sl = "supervised_only"
budget_schedule = [8, 8]
seed = 2
output_dir = "{}"

[trainer]
epochs = 20
"#,
            store.display(),
            tmp.path().join("results").display()
        ),
    )
    .unwrap();
    let out = lebench(&["run", "--config", cfg_path.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_aggregates_runs_to_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("results");
    for seed in ["1", "2"] {
        let cfg = write_config(tmp.path(), 1, &results);
        let out = lebench(&["run", "--config", cfg.to_str().unwrap(), "--seed", seed], tmp.path());
        assert!(out.status.success());
    }
    let csv_path = tmp.path().join("curves.csv");
    let out = lebench(
        &["report", "--dir", results.to_str().unwrap(), "--out", csv_path.to_str().unwrap()],
        tmp.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with(
        "round,budget,strategy,mean_test_acc,stderr_test_acc,mean_pool_acc,stderr_pool_acc,mean_balanced_acc,mean_macro_f1\n"
    ));
    assert_eq!(csv.lines().count(), 3, "2 rounds of aggregated rows: {csv}");

    // Empty directory: exit 1.
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = lebench(&["report", "--dir", empty.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_mixed_schedules_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("results");
    let cfg = write_config(tmp.path(), 1, &results);
    assert!(lebench(&["run", "--config", cfg.to_str().unwrap()], tmp.path()).status.success());
    // Second run with a different schedule into the same tree.
    let cfg2 = tmp.path().join("other.toml");
    let body = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("budget_schedule = [10, 10]", "budget_schedule = [10, 10, 10]")
        .replace("seed = 1", "seed = 2");
    std::fs::write(&cfg2, body).unwrap();
    assert!(lebench(&["run", "--config", cfg2.to_str().unwrap()], tmp.path()).status.success());

    let out = lebench(&["report", "--dir", results.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("incompatible"));
}

#[test]
fn run_resume_completes_after_interrupt_marker() {
    // A second plain `run` into the same directory fails; `--resume`
    // finishes the work instead.
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("results");
    let cfg = write_config(tmp.path(), 3, &results);
    assert!(lebench(&["run", "--config", cfg.to_str().unwrap()], tmp.path()).status.success());

    let out = lebench(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1), "rerun without --resume must fail");

    let out = lebench(&["run", "--config", cfg.to_str().unwrap(), "--resume"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Resume with an edited config fails.
    let edited = tmp.path().join("edited.toml");
    std::fs::write(
        &edited,
        std::fs::read_to_string(&cfg).unwrap().replace("epochs = 25", "epochs = 26"),
    )
    .unwrap();
    let out = lebench(&["run", "--config", edited.to_str().unwrap(), "--resume"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot"));
}

#[test]
fn verify_passes_and_filters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lebench(&["verify", "--check", "metrics-oracle"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] metrics-oracle"), "{stdout}");
    assert_eq!(stdout.lines().count(), 1, "filter must run the single named check");

    let out = lebench(&["verify", "--check", "badge-factored", "--check", "kcenter-bound"], tmp.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);

    let out = lebench(&["verify", "--check", "nope"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "unknown check name is a usage error");
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown check"));
}
