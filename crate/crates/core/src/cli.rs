//! Command implementations behind the `hwfl` binary: `run`, `compare`,
//! `sweep-k` and `sweep-weights`.
//!
//! Every command runs all of its experiments in memory first and only then
//! writes files, so a failed run leaves no partial outputs. Each command also
//! writes `manifest.json` listing every emitted file with its SHA-256.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SuiteConfig;
use crate::error::{Error, Result};
use crate::federation::{run_experiment, ExperimentConfig, ExperimentResult, Method, SeedRun};
use crate::stats::{cohens_d, welch_t};

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "HWFL_OUT_DIR";

#[derive(Debug, Clone)]
pub struct CommandOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmittedFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub configs: Vec<ExperimentConfig>,
    pub files: Vec<EmittedFile>,
}

/// What a command produced: the manifest plus a plain-text report for stdout.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub manifest: RunManifest,
    pub report: String,
}

fn load_suite(opts: &CommandOptions) -> Result<(SuiteConfig, PathBuf)> {
    let (mut suite, base) = SuiteConfig::load(&opts.config)?;
    if let Some(seeds) = &opts.seeds {
        suite.seeds = seeds.clone();
    }
    Ok((suite, base))
}

fn csv_bytes<F>(header: &[&str], rows: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    rows(&mut wtr)?;
    wtr.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub const ROUND_HEADER: [&str; 14] = [
    "round",
    "selected",
    "epochs",
    "sim_time_s",
    "cum_time_s",
    "comm_mb",
    "cum_comm_mb",
    "val_accuracy",
    "val_macro_f1",
    "val_balanced_acc",
    "jain",
    "energy_proxy",
    "cum_energy_proxy",
    "n_selected",
];

/// Per-round metrics for one seed. Method names are not part of the content,
/// so two methods with identical trajectories produce identical files.
pub fn rounds_csv(run: &SeedRun) -> Result<Vec<u8>> {
    csv_bytes(&ROUND_HEADER, |w| {
        let (mut time, mut comm, mut energy) = (0.0, 0.0, 0.0);
        for r in &run.rounds {
            time += r.sim_time_s;
            comm += r.comm_mb;
            energy += r.energy_proxy_total;
            w.write_record([
                r.round_index.to_string(),
                join(&r.selected),
                join(&r.epochs),
                r.sim_time_s.to_string(),
                time.to_string(),
                r.comm_mb.to_string(),
                comm.to_string(),
                r.val_accuracy.to_string(),
                r.val_macro_f1.to_string(),
                r.val_balanced_acc.to_string(),
                r.jain.to_string(),
                r.energy_proxy_total.to_string(),
                energy.to_string(),
                r.selected.len().to_string(),
            ])?;
        }
        Ok(())
    })
}

pub const SUMMARY_HEADER: [&str; 20] = [
    "method",
    "n_seeds",
    "degenerate",
    "acc_mean",
    "acc_std",
    "macro_f1_mean",
    "macro_f1_std",
    "bal_acc_mean",
    "bal_acc_std",
    "round_time_mean_s",
    "round_time_std_s",
    "total_time_mean_s",
    "total_time_std_s",
    "comm_total_mean_mb",
    "comm_total_std_mb",
    "energy_total_mean",
    "energy_total_std",
    "jain_mean",
    "jain_std",
    "seeds",
];

pub fn summary_csv(results: &[ExperimentResult]) -> Result<Vec<u8>> {
    csv_bytes(&SUMMARY_HEADER, |w| {
        for r in results {
            let s = &r.summary;
            let mut row = vec![r.method.to_string(), s.finals.len().to_string(), s.degenerate.to_string()];
            for m in [
                s.accuracy,
                s.macro_f1,
                s.balanced_accuracy,
                s.mean_round_time_s,
                s.total_time_s,
                s.total_comm_mb,
                s.total_energy,
                s.jain,
            ] {
                row.push(m.mean.to_string());
                row.push(m.std.to_string());
            }
            row.push(join(&s.finals.iter().map(|f| f.seed).collect::<Vec<_>>()));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes all files, then the manifest. Nothing touches the disk until every
/// experiment has succeeded.
fn emit(command: &str, opts: &CommandOptions, configs: Vec<ExperimentConfig>, files: Vec<(String, Vec<u8>)>) -> Result<RunManifest> {
    std::fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;
    let mut emitted = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = opts.out.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        emitted.push(EmittedFile {
            name: name.clone(),
            sha256: hash(bytes),
            bytes: bytes.len(),
        });
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config_path: opts.config.clone(),
        output_dir: opts.out.clone(),
        configs,
        files: emitted,
    };
    let path = opts.out.join("manifest.json");
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    json.push(b'\n');
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn round_files(results: &[ExperimentResult]) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for r in results {
        for run in &r.runs {
            files.push((format!("rounds_{}_{}.csv", r.method, run.seed), rounds_csv(run)?));
        }
    }
    Ok(files)
}

fn warnings_of(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in results {
        for run in &r.runs {
            for w in &run.warnings {
                if seen.insert(w.clone()) {
                    let _ = writeln!(out, "warning: {w}");
                }
            }
        }
    }
    out
}

/// Left-aligned first column, right-aligned rest.
pub fn format_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

fn run_all(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentResult>> {
    configs.iter().map(run_experiment).collect()
}

fn summary_table(results: &[ExperimentResult]) -> String {
    let header: Vec<String> = ["Method", "Acc", "MacroF1", "BalAcc", "RoundTime(s)", "TotalTime(s)", "Comm(MB)", "Jain"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let s = &r.summary;
            vec![
                r.method.display_name().to_string(),
                format!("{:.3}", s.accuracy),
                format!("{:.3}", s.macro_f1),
                format!("{:.3}", s.balanced_accuracy),
                format!("{:.2}", s.mean_round_time_s),
                format!("{:.2}", s.total_time_s),
                format!("{:.2}", s.total_comm_mb.mean),
                format!("{:.3}", s.jain.mean),
            ]
        })
        .collect();
    format_table(&header, &rows)
}

/// Runs every configured method and writes `rounds_<method>_<seed>.csv`,
/// `summary.csv` and the manifest.
pub fn cmd_run(opts: &CommandOptions) -> Result<CommandOutput> {
    let (suite, base) = load_suite(opts)?;
    let configs = suite.resolve(&base)?;
    let results = run_all(&configs)?;
    let mut files = round_files(&results)?;
    files.push(("summary.csv".into(), summary_csv(&results)?));
    let report = warnings_of(&results) + &summary_table(&results);
    Ok(CommandOutput {
        manifest: emit("run", opts, configs, files)?,
        report,
    })
}

/// One comparison row; `vs_first` is absent for the baseline itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub welch_t: Option<f64>,
    pub welch_p: Option<f64>,
    pub cohens_d: Option<f64>,
}

/// Welch t / p and Cohen's d of every method's final accuracies against the
/// first method's. Degenerate (zero-variance) pairs yield `None`.
pub fn compare_against_first(results: &[ExperimentResult]) -> Vec<ComparisonRow> {
    let baseline = results[0].summary.accuracies();
    results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if i == 0 {
                return ComparisonRow {
                    method: r.method,
                    welch_t: None,
                    welch_p: None,
                    cohens_d: None,
                };
            }
            let acc = r.summary.accuracies();
            let w = welch_t(&acc, &baseline).ok();
            ComparisonRow {
                method: r.method,
                welch_t: w.map(|w| w.t),
                welch_p: w.map(|w| w.p_two_sided),
                cohens_d: cohens_d(&acc, &baseline).ok(),
            }
        })
        .collect()
}

pub const COMPARISON_HEADER: [&str; 17] = [
    "method",
    "acc_mean",
    "acc_std",
    "macro_f1_mean",
    "macro_f1_std",
    "bal_acc_mean",
    "bal_acc_std",
    "sim_time_mean_s",
    "sim_time_std_s",
    "round_time_mean_s",
    "comm_total_mb",
    "energy_total",
    "jain_mean",
    "baseline",
    "welch_t",
    "welch_p",
    "cohens_d",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

/// Like [`cmd_run`], plus `comparison.csv`: mean ± std per method and the
/// Welch test / effect size against the first-listed method.
pub fn cmd_compare(opts: &CommandOptions) -> Result<CommandOutput> {
    let (suite, base) = load_suite(opts)?;
    if suite.methods.len() < 2 {
        return Err(Error::config("methods", "compare requires ≥ 2 methods"));
    }
    let configs = suite.resolve(&base)?;
    let results = run_all(&configs)?;
    let rows = compare_against_first(&results);
    let baseline = results[0].method.to_string();
    let comparison = csv_bytes(&COMPARISON_HEADER, |w| {
        for (r, c) in results.iter().zip(&rows) {
            let s = &r.summary;
            w.write_record([
                r.method.to_string(),
                s.accuracy.mean.to_string(),
                s.accuracy.std.to_string(),
                s.macro_f1.mean.to_string(),
                s.macro_f1.std.to_string(),
                s.balanced_accuracy.mean.to_string(),
                s.balanced_accuracy.std.to_string(),
                s.total_time_s.mean.to_string(),
                s.total_time_s.std.to_string(),
                s.mean_round_time_s.mean.to_string(),
                s.total_comm_mb.mean.to_string(),
                s.total_energy.mean.to_string(),
                s.jain.mean.to_string(),
                baseline.clone(),
                opt(c.welch_t),
                opt(c.welch_p),
                opt(c.cohens_d),
            ])?;
        }
        Ok(())
    })?;

    let header: Vec<String> = ["Method", "Acc", "MacroF1", "BalAcc", "SimTime(s)", "Comm(MB)", "p", "d"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table_rows: Vec<Vec<String>> = results
        .iter()
        .zip(&rows)
        .map(|(r, c)| {
            let s = &r.summary;
            vec![
                r.method.display_name().to_string(),
                format!("{:.3}", s.accuracy),
                format!("{:.3}", s.macro_f1),
                format!("{:.3}", s.balanced_accuracy),
                format!("{:.2}", s.total_time_s),
                format!("{:.2}", s.total_comm_mb.mean),
                c.welch_p.map(|p| format!("{p:.3}")).unwrap_or_else(|| "-".into()),
                c.cohens_d.map(|d| format!("{d:.2}")).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    let report = format!(
        "{}{}(p, d: Welch t-test and Cohen's d of final accuracy vs {})\n",
        warnings_of(&results),
        format_table(&header, &table_rows),
        results[0].method.display_name()
    );

    let mut files = round_files(&results)?;
    files.push(("summary.csv".into(), summary_csv(&results)?));
    files.push(("comparison.csv".into(), comparison));
    Ok(CommandOutput {
        manifest: emit("compare", opts, configs, files)?,
        report,
    })
}

fn k_dependent(method: Method) -> bool {
    method.participants(1, 2) == 1
}

/// One summary row per (method, k) for every configured method whose
/// participant count depends on `k`.
pub fn cmd_sweep_k(opts: &CommandOptions, k_values: Option<Vec<usize>>) -> Result<CommandOutput> {
    let (suite, base) = load_suite(opts)?;
    let methods: Vec<Method> = suite.methods.iter().copied().filter(|&m| k_dependent(m)).collect();
    if methods.is_empty() {
        return Err(Error::config("methods", "sweep-k needs a method whose participant count depends on k"));
    }
    let n = suite.fleet.resolve(&base)?.len();
    let mut ks = k_values.unwrap_or_else(|| suite.sweep.k_values.clone());
    if ks.is_empty() {
        ks = (1..=n).collect();
    }
    ks.sort_unstable();
    ks.dedup();

    let mut configs = Vec::new();
    let mut results = Vec::new();
    let mut keys = Vec::new();
    for &k in &ks {
        let variant = SuiteConfig {
            k,
            methods: methods.clone(),
            ..suite.clone()
        };
        for config in variant.resolve(&base)? {
            results.push(run_experiment(&config)?);
            keys.push(k);
            configs.push(config);
        }
    }
    let header = ["method", "k", "acc_mean", "acc_std", "comm_total_mb", "sim_time_mean_s", "sim_time_std_s", "round_time_mean_s"];
    let rows: Vec<Vec<String>> = results
        .iter()
        .zip(&keys)
        .map(|(r, k)| {
            let s = &r.summary;
            vec![
                r.method.to_string(),
                k.to_string(),
                s.accuracy.mean.to_string(),
                s.accuracy.std.to_string(),
                s.total_comm_mb.mean.to_string(),
                s.total_time_s.mean.to_string(),
                s.total_time_s.std.to_string(),
                s.mean_round_time_s.mean.to_string(),
            ]
        })
        .collect();
    let bytes = csv_bytes(&header, |w| {
        for row in &rows {
            w.write_record(row)?;
        }
        Ok(())
    })?;
    let table: Vec<Vec<String>> = results
        .iter()
        .zip(&keys)
        .map(|(r, k)| {
            vec![
                r.method.display_name().to_string(),
                k.to_string(),
                format!("{:.3}", r.summary.accuracy),
                format!("{:.2}", r.summary.total_comm_mb.mean),
                format!("{:.2}", r.summary.total_time_s),
            ]
        })
        .collect();
    let report = format_table(
        &["Method", "K", "Acc", "Comm(MB)", "SimTime(s)"].map(String::from),
        &table,
    );
    Ok(CommandOutput {
        manifest: emit("sweep-k", opts, configs, vec![("sweep_k.csv".into(), bytes)])?,
        report,
    })
}

/// Distinct selected sets in order of first appearance, e.g. `0;1;4|0;2;4`.
pub fn selection_fingerprint(result: &ExperimentResult) -> String {
    let mut seen: Vec<String> = Vec::new();
    for run in &result.runs {
        for r in &run.rounds {
            let key = join(&r.selected);
            if !seen.contains(&key) {
                seen.push(key);
            }
        }
    }
    seen.join("|")
}

/// One row per (method, alpha) for every configured method that uses hardware
/// scores, with the selected-set fingerprint.
pub fn cmd_sweep_weights(opts: &CommandOptions, alpha_values: Option<Vec<f64>>) -> Result<CommandOutput> {
    let (suite, base) = load_suite(opts)?;
    let alphas = alpha_values.unwrap_or_else(|| suite.sweep.alpha_values.clone());
    if alphas.is_empty() {
        return Err(Error::config("sweep.alpha_values", "empty alpha list"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::config("sweep.alpha_values", format!("alpha {a} must be >= 0")));
    }
    let methods: Vec<Method> = suite
        .methods
        .iter()
        .copied()
        .filter(|m| matches!(m, Method::Hwfl | Method::TopkOnly | Method::AdaptiveOnly))
        .collect();
    if methods.is_empty() {
        return Err(Error::config("methods", "sweep-weights needs a method that uses hardware scores"));
    }

    let mut configs = Vec::new();
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &alpha in &alphas {
        let mut variant = SuiteConfig {
            methods: methods.clone(),
            ..suite.clone()
        };
        variant.weights.alpha = alpha;
        for config in variant.resolve(&base)? {
            let r = run_experiment(&config)?;
            let s = &r.summary;
            let fp = selection_fingerprint(&r);
            rows.push(vec![
                r.method.to_string(),
                alpha.to_string(),
                s.accuracy.mean.to_string(),
                s.accuracy.std.to_string(),
                s.total_comm_mb.mean.to_string(),
                s.total_time_s.mean.to_string(),
                fp.clone(),
            ]);
            table.push(vec![
                r.method.display_name().to_string(),
                format!("{alpha}"),
                format!("{:.3}", s.accuracy),
                format!("{:.2}", s.total_time_s.mean),
                fp,
            ]);
            configs.push(config);
        }
    }
    let header = ["method", "alpha", "acc_mean", "acc_std", "comm_total_mb", "sim_time_mean_s", "selected_fingerprint"];
    let bytes = csv_bytes(&header, |w| {
        for row in &rows {
            w.write_record(row)?;
        }
        Ok(())
    })?;
    let report = format_table(&["Method", "alpha", "Acc", "SimTime(s)", "Selected"].map(String::from), &table);
    Ok(CommandOutput {
        manifest: emit("sweep-weights", opts, configs, vec![("sweep_weights.csv".into(), bytes)])?,
        report,
    })
}

/// `--print-defaults` output: a fully populated config.
pub fn default_config_toml() -> Result<String> {
    SuiteConfig::default().to_toml_string()
}

/// Resolves the output directory: explicit flag, then [`OUT_DIR_ENV`], then
/// `results`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = format_table(
            &["A".to_string(), "Value".to_string()],
            &[vec!["long name".into(), "1".into()], vec!["x".into(), "22.5".into()]],
        );
        assert_eq!(t, "A          Value\n---------  -----\nlong name      1\nx           22.5\n");
    }

    #[test]
    fn k_dependence() {
        assert!(k_dependent(Method::Hwfl));
        assert!(k_dependent(Method::RandomTopk));
        assert!(!k_dependent(Method::Fedavg));
        assert!(!k_dependent(Method::AdaptiveOnly));
    }
}
