//! Drives the built binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shapley-select"));
    cmd.env_remove("SHAPLEY_SELECT_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn gen(dir: &Path, scenario: &str, sizes: &str) -> PathBuf {
    let out = run(&[
        "dataset",
        "gen",
        "--scenario",
        scenario,
        "--seed",
        "3",
        "--sizes",
        sizes,
        "--dims",
        "4",
        "--out-dir",
        dir.to_str().unwrap(),
        "--name",
        "fixture",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(stdout(&out).trim())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generated_dataset_validates() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "20,100,30,30");
    let out = run(&["dataset", "validate", s(&manifest)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("180 points, 4 dims, 10 classes"));
}

#[test]
fn corrupted_blob_exits_with_format_code() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "20,100,30,30");
    fs::write(dir.path().join("fixture.f32"), b"abc").unwrap();
    assert_eq!(code(&run(&["dataset", "validate", s(&manifest)])), 3);
}

#[test]
fn exact_values_sum_to_the_full_utility() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "20,100,30,30");
    let csv = dir.path().join("values.csv");
    let out = run(&["value", "--dataset", s(&manifest), "--method", "knn-exact", "--k", "3", "--out", s(&csv)]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&csv).unwrap();
    let header: serde_json::Value =
        serde_json::from_str(text.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    let total = header["utility_total"].as_f64().unwrap();
    let sum: f64 = text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((sum - total).abs() < 1e-9, "{sum} vs {total}");
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn brute_force_on_too_many_points_is_a_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "25,10,10,10");
    assert_eq!(code(&run(&["value", "--dataset", s(&manifest), "--method", "brute-force"])), 4);
}

#[test]
fn zero_permutations_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "10,10,10,10");
    assert_eq!(code(&run(&["value", "--dataset", s(&manifest), "--method", "tmc", "--permutations", "0"])), 2);
}

#[test]
fn random_selection_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "20,100,30,30");
    let args =
        ["select", "--dataset", s(&manifest), "--method", "random", "--batch", "5", "--seed", "7", "--no-timings"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let json: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(json["chosen"].as_array().unwrap().len(), 5);
    assert_eq!(json["method_tag"], "random");
}

#[test]
fn full_fraction_ads_matches_bare_coreset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "white-noise-beta", "20,100,30,30");
    let values = dir.path().join("pool.csv");
    let out = run(&["value", "--dataset", s(&manifest), "--extrapolate", "--out", s(&values)]);
    assert_eq!(code(&out), 0);
    let chosen = |extra: &[&str]| -> serde_json::Value {
        let mut args = vec!["select", "--dataset", s(&manifest), "--method", "coreset", "--batch", "6"];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()["chosen"].clone()
    };
    let bare = chosen(&[]);
    let ads = chosen(&["--ads", "--fraction", "1.0", "--values", s(&values)]);
    assert_eq!(bare, ads);
    let filtered = chosen(&["--ads", "--fraction", "0.2", "--values", s(&values)]);
    assert_eq!(filtered.as_array().unwrap().len(), 6);
}

#[test]
fn selection_argument_errors_use_the_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(dir.path(), "identity", "20,100,30,30");
    let base = ["select", "--dataset", s(&manifest), "--method", "coreset", "--batch", "3"];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        code(&run(&a))
    };
    assert_eq!(with(&["--fraction", "1.5"]), 2);
    assert_eq!(with(&["--ads"]), 2);
    // Values of the labeled split do not cover the pool.
    let labeled_values = dir.path().join("labeled.csv");
    run(&["value", "--dataset", s(&manifest), "--out", s(&labeled_values)]);
    assert_eq!(with(&["--ads", "--values", s(&labeled_values)]), 2);
    assert_eq!(code(&run(&["select", "--bogus"])), 2);
}

fn write_config(dir: &Path, rounds: usize, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        r#"schema_version = 1
repeats = 2

[scenario]
kind = "identity"
seed = 1

[scenario.params]
dims = 4
num_classes = 3

[sizes]
labeled = 30
unlabeled = 300
validation = 60
test = 60

[run]
initial_pool_size = 10
batch_size = 8
num_rounds = {rounds}
seed = 4
record_timings = false
{extra}

[[methods]]
selector = {{ kind = "coreset" }}
ads = {{ fraction = 0.3 }}

[[methods]]
selector = {{ kind = "random" }}

[output]
json = "report.json"
csv = "report.csv"
"#
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn loop_writes_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1, "");
    let out = run(&["loop", s(&cfg), "--repeats", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read(dir.path().join("report.json")).unwrap();
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(report["methods"][0]["rounds"].as_array().unwrap().len(), 1);
    assert_eq!(report["methods"][0]["repeats"].as_array().unwrap().len(), 1);
    assert_eq!(csv.lines().count(), 3);

    let again = run(&["loop", s(&cfg), "--repeats", "1"]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(dir.path().join("report.json")).unwrap(), json);
    let threaded = bin().args(["loop", s(&cfg), "--repeats", "1"]).env("SHAPLEY_SELECT_THREADS", "3").output().unwrap();
    assert_eq!(code(&threaded), 0);
    assert_eq!(fs::read(dir.path().join("report.json")).unwrap(), json);
}

#[test]
fn five_round_protocol_yields_five_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 2, "");
    let out = run(&["--threads", "2", "loop", s(&cfg), "--rounds", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    for m in report["methods"].as_array().unwrap() {
        assert_eq!(m["rounds"].as_array().unwrap().len(), 5);
        for r in m["repeats"].as_array().unwrap() {
            assert_eq!(r["rounds"].as_array().unwrap().len(), 5);
        }
    }
}

#[test]
fn config_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1, "mystery = 1");
    assert_eq!(code(&run(&["loop", s(&cfg)])), 3);

    let cfg = write_config(dir.path(), 1, "");
    let text = fs::read_to_string(&cfg).unwrap().replace("schema_version = 1", "schema_version = 2");
    fs::write(&cfg, text).unwrap();
    assert_eq!(code(&run(&["loop", s(&cfg)])), 2);

    let cfg = write_config(dir.path(), 1, "");
    assert_eq!(code(&run(&["loop", s(&cfg), "--out-json", "/nonexistent/dir/r.json"])), 2);
    assert_eq!(code(&run(&["loop", s(&cfg), "--batch", "0"])), 2);
    assert_eq!(code(&run(&["loop", s(&dir.path().join("missing.toml"))])), 2);
}

#[test]
fn bench_writes_one_row_per_pool_size() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = run(&["bench", "--pool-sizes", "300,600", "--dims", "4", "--batch", "10", "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("selector,pool_size"));
    assert!(lines[1].starts_with("coreset,300,"));
    assert!(lines[2].starts_with("coreset,600,"));
}
