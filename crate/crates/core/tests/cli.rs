use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hwfl::config::SuiteConfig;
use sha2::{Digest, Sha256};

fn hwfl() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hwfl"));
    cmd.env_remove(hwfl::cli::OUT_DIR_ENV);
    cmd
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.toml");
    let text = format!(
        "name = \"small\"\nmethods = [\"fedavg\", \"hwfl\"]\nn_rounds = 5\nseeds = [0, 1]\n{extra}\n[fleet]\nbundled = \"table1\"\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn print_defaults_round_trips() {
    let out = hwfl().arg("--print-defaults").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(SuiteConfig::from_toml_str(&text).unwrap(), SuiteConfig::default());
}

#[test]
fn run_writes_round_logs_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = hwfl().args(["run", "--config"]).arg(&config).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));

    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "manifest.json",
            "rounds_fedavg_0.csv",
            "rounds_fedavg_1.csv",
            "rounds_hwfl_0.csv",
            "rounds_hwfl_1.csv",
            "summary.csv"
        ]
    );

    let (header, rows) = read_csv(&out_dir.join("rounds_hwfl_0.csv"));
    assert_eq!(header, hwfl::cli::ROUND_HEADER);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][1], "0;1;4");

    let (_, summary) = read_csv(&out_dir.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[0][0], "fedavg");
    assert_eq!(summary[1][19], "0;1");

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 5);
    for f in files {
        let bytes = std::fs::read(out_dir.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = hwfl()
        .args(["run", "--seeds", "7"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("rounds_hwfl_7.csv").exists());
    assert!(!out_dir.join("rounds_hwfl_0.csv").exists());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let env_dir = dir.path().join("from_env");
    let out = hwfl()
        .env(hwfl::cli::OUT_DIR_ENV, &env_dir)
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(env_dir.join("summary.csv").exists());
}

#[test]
fn missing_fleet_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nofleet.toml");
    std::fs::write(&path, "methods = [\"fedavg\"]\n").unwrap();
    let out = hwfl().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("fleet"), "{}", stderr(&out));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_field_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "n_roundz = 3\n");
    let out = hwfl().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_roundz"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(hwfl().output().unwrap().status.code(), Some(1));
    assert_eq!(hwfl().args(["run"]).output().unwrap().status.code(), Some(1));
    assert_eq!(hwfl().args(["frobnicate"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn k_beyond_fleet_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "k = 9\n");
    let out = hwfl().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn compare_needs_two_methods() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.toml");
    std::fs::write(&path, "methods = [\"hwfl\"]\nn_rounds = 2\n[fleet]\nbundled = \"table1\"\n").unwrap();
    let out = hwfl().args(["compare", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("≥ 2 methods"));
}

#[test]
fn compare_reports_tests_against_first_method() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = hwfl().args(["compare", "--seeds", "0,1,2", "--config"]).arg(&config).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("HW-FL") && stdout.contains("vs FedAvg"));
    let (header, rows) = read_csv(&out_dir.join("comparison.csv"));
    let p = header.iter().position(|h| h == "welch_p").unwrap();
    assert_eq!(rows[0][p], "NA");
    let value: f64 = rows[1][p].parse().unwrap();
    assert!(value > 0.0 && value <= 1.0);
}

#[test]
fn single_seed_compare_marks_tests_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = hwfl().args(["compare", "--seeds", "3", "--config"]).arg(&config).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(&out_dir.join("comparison.csv"));
    let d = header.iter().position(|h| h == "cohens_d").unwrap();
    assert_eq!(rows[1][d], "NA");
}

#[test]
fn sweep_k_comm_increases_with_k() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = hwfl().args(["sweep-k", "--seeds", "0", "--config"]).arg(&config).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(&out_dir.join("sweep_k.csv"));
    let comm = header.iter().position(|h| h == "comm_total_mb").unwrap();
    // FedAvg does not depend on k and is skipped.
    assert!(rows.iter().all(|r| r[0] == "hwfl"));
    let ks: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(ks, [1, 2, 3, 4, 5]);
    let totals: Vec<f64> = rows.iter().map(|r| r[comm].parse().unwrap()).collect();
    assert!(totals.windows(2).all(|w| w[0] < w[1]), "{totals:?}");
}

#[test]
fn sweep_weights_fingerprints_selection() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = hwfl()
        .args(["sweep-weights", "--seeds", "0", "--alpha", "0.3,0.5", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, rows) = read_csv(&out_dir.join("sweep_weights.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[6] == "0;1;4"));
}

#[test]
fn sweep_weights_rejects_empty_alpha_list() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out = hwfl().args(["sweep-weights", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alpha"));
}

#[test]
fn missing_fleet_csv_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "methods = [\"fedavg\"]\n[fleet]\ncsv = \"nope.csv\"\n").unwrap();
    let out = hwfl().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.csv"));
}
