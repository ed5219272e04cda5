//! Client datasets: synthetic non-IID generators (Dirichlet label skew and a
//! session-style dominant-class split), a pre-extracted feature CSV loader,
//! validation withholding, and per-round latency perturbation.
//!
//! Feature CSV schema: header `client_id,label,f_0,...,f_{d-1}`, one sample
//! per row. Labels are arbitrary strings mapped to contiguous class indices in
//! sorted order (numeric order when every label is an integer, otherwise
//! lexicographic).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::device::DeviceProfile;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Stream};
use crate::training::LocalDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    Dirichlet,
    SessionSplit,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub mode: DataMode,
    /// Defaults to the fleet size when resolved from an experiment config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_clients: Option<usize>,
    #[serde(default = "default_n_classes")]
    pub n_classes: usize,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    #[serde(default = "default_samples")]
    pub samples_per_client: usize,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
    /// Distance of each class mean from the origin, in noise standard deviations.
    #[serde(default = "default_separation")]
    pub class_separation: f64,
    /// Share of each client's samples in its dominant class (session split).
    #[serde(default = "default_dominant_share")]
    pub dominant_share: f64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
}

fn default_n_classes() -> usize {
    4
}
fn default_input_dim() -> usize {
    40
}
fn default_samples() -> usize {
    200
}
fn default_alpha() -> f64 {
    0.5
}
fn default_separation() -> f64 {
    2.0
}
fn default_dominant_share() -> f64 {
    0.6
}
fn default_validation_fraction() -> f64 {
    0.2
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            mode: DataMode::SessionSplit,
            n_clients: None,
            n_classes: default_n_classes(),
            input_dim: default_input_dim(),
            samples_per_client: default_samples(),
            dirichlet_alpha: default_alpha(),
            class_separation: default_separation(),
            dominant_share: default_dominant_share(),
            validation_fraction: default_validation_fraction(),
            csv_path: None,
        }
    }
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(format!("data.{field}"), "must be >= 1"))
            } else {
                Ok(())
            }
        };
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("data.validation_fraction", "must lie in [0, 1)"));
        }
        match self.mode {
            DataMode::Csv => {
                if self.csv_path.is_none() {
                    return Err(Error::config("data.csv_path", "required when mode = \"csv\""));
                }
            }
            DataMode::Dirichlet | DataMode::SessionSplit => {
                positive("n_clients", self.n_clients.unwrap_or(1))?;
                positive("n_classes", self.n_classes)?;
                positive("input_dim", self.input_dim)?;
                positive("samples_per_client", self.samples_per_client)?;
                if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
                    return Err(Error::config("data.class_separation", "must be > 0"));
                }
                if self.mode == DataMode::Dirichlet && !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
                    return Err(Error::config("data.dirichlet_alpha", "must be > 0"));
                }
                if self.mode == DataMode::SessionSplit && !(self.dominant_share > 0.0 && self.dominant_share <= 1.0) {
                    return Err(Error::config("data.dominant_share", "must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

/// Per-client training sets plus the global held-out validation pool.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedData {
    pub clients: Vec<LocalDataset>,
    pub validation: LocalDataset,
    /// Class index → label name.
    pub label_names: Vec<String>,
    pub warnings: Vec<String>,
}

/// Splits `total` into integer counts proportional to `weights` (largest
/// remainder; ties go to the lower index).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Class counts for client `position` under the dominant-class rotation.
pub fn session_class_counts(position: usize, spec: &DataSpec) -> Result<Vec<usize>> {
    let c = spec.n_classes;
    let n = spec.samples_per_client;
    if c == 1 {
        return Ok(vec![n]);
    }
    let dominant = position % c;
    let rest = (1.0 - spec.dominant_share) / (c - 1) as f64;
    let weights: Vec<f64> = (0..c).map(|k| if k == dominant { spec.dominant_share } else { rest }).collect();
    let counts = apportion(n, &weights);
    if let Some(k) = counts.iter().position(|&x| x == 0) {
        return Err(Error::config(
            "data.samples_per_client",
            format!("{n} samples per client cannot populate class {k} of {c} in the session split"),
        ));
    }
    Ok(counts)
}

/// Class proportions `~ Dirichlet(alpha · 1)` via normalized gamma draws.
fn dirichlet_proportions<R: Rng>(alpha: f64, n_classes: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated > 0");
    let draws: Vec<f64> = (0..n_classes).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.iter().map(|g| g / sum).collect()
    } else {
        // Every draw underflowed (tiny alpha): all mass on one class.
        let k = rng.random_range(0..n_classes);
        (0..n_classes).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
    }
}

fn class_means(spec: &DataSpec, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = derive_rng(seed, Stream::ClassMeans, 0, 0);
    (0..spec.n_classes)
        .map(|_| {
            let v: Vec<f64> = (0..spec.input_dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x * spec.class_separation / norm).collect()
        })
        .collect()
}

/// Generates per-client datasets from class-conditional unit-variance Gaussian
/// clusters and withholds the validation pool. Client `i` gets client id `i`.
pub fn synthesize_noniid(spec: &DataSpec, seed: u64) -> Result<FederatedData> {
    spec.validate()?;
    if spec.mode == DataMode::Csv {
        return Err(Error::config("data.mode", "csv data is loaded, not synthesized"));
    }
    let n_clients = spec.n_clients.unwrap_or(1);
    let means = class_means(spec, seed);
    let mut clients = Vec::with_capacity(n_clients);
    for client in 0..n_clients {
        let counts = match spec.mode {
            DataMode::SessionSplit => session_class_counts(client, spec)?,
            _ => {
                let mut rng = derive_rng(seed, Stream::DataSplit, client as u64, 3);
                apportion(
                    spec.samples_per_client,
                    &dirichlet_proportions(spec.dirichlet_alpha, spec.n_classes, &mut rng),
                )
            }
        };
        let mut labels: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect();
        let mut rng = derive_rng(seed, Stream::DataSplit, client as u64, 1);
        labels.shuffle(&mut rng);
        let mut ds = LocalDataset::empty(client, spec.input_dim, spec.n_classes);
        let mut row = vec![0.0; spec.input_dim];
        for &y in &labels {
            for (r, m) in row.iter_mut().zip(&means[y]) {
                *r = m + rng.sample::<f64, _>(StandardNormal);
            }
            ds.push(&row, y);
        }
        clients.push(ds);
    }
    let label_names = (0..spec.n_classes).map(|k| k.to_string()).collect();
    Ok(withhold_validation(clients, label_names, spec.validation_fraction, seed))
}

/// Moves `floor(fraction · n_i)` randomly chosen samples of every client into
/// one pooled validation set. Remaining samples keep their original order.
pub fn withhold_validation(clients: Vec<LocalDataset>, label_names: Vec<String>, fraction: f64, seed: u64) -> FederatedData {
    let (d, c) = clients
        .first()
        .map(|ds| (ds.input_dim, ds.n_classes))
        .unwrap_or((0, label_names.len()));
    let mut validation = LocalDataset::empty(usize::MAX, d, c);
    let mut kept = Vec::with_capacity(clients.len());
    for ds in clients {
        let n_val = (fraction * ds.len() as f64).floor() as usize;
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut derive_rng(seed, Stream::DataSplit, ds.client_id as u64, 2));
        let mut held = vec![false; ds.len()];
        for &i in &order[..n_val] {
            held[i] = true;
            validation.push(ds.row(i), ds.labels[i]);
        }
        let mut train = LocalDataset::empty(ds.client_id, ds.input_dim, ds.n_classes);
        for i in (0..ds.len()).filter(|&i| !held[i]) {
            train.push(ds.row(i), ds.labels[i]);
        }
        kept.push(train);
    }
    let mut warnings = Vec::new();
    if validation.is_empty() {
        warnings.push("validation pool is empty".to_string());
    }
    for ds in kept.iter().filter(|ds| ds.is_empty()) {
        warnings.push(format!("client {} has no training samples", ds.client_id));
    }
    FederatedData {
        clients: kept,
        validation,
        label_names,
        warnings,
    }
}

/// Per-client datasets read from a feature CSV, before validation withholding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub clients: Vec<LocalDataset>,
    pub label_names: Vec<String>,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_feature_csv<R: Read>(reader: R, path: &Path) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.get(0) != Some("client_id") {
        return Err(parse_err(path, 1, "missing column `client_id` (expected first)"));
    }
    if headers.get(1) != Some("label") {
        return Err(parse_err(path, 1, "missing column `label` (expected second)"));
    }
    let dim = headers.len() - 2;
    if dim == 0 {
        return Err(parse_err(path, 1, "no feature columns (expected f_0, f_1, ...)"));
    }
    for (j, h) in headers.iter().skip(2).enumerate() {
        if h != format!("f_{j}") {
            return Err(parse_err(path, 1, format!("column {} is `{h}`, expected `f_{j}`", j + 3)));
        }
    }

    let mut rows: Vec<(usize, String, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let client: usize = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("client_id `{}` is not a non-negative integer", &record[0])))?;
        let label = record[1].to_string();
        if label.is_empty() {
            return Err(parse_err(path, line, "empty label"));
        }
        let mut features = Vec::with_capacity(dim);
        for (j, cell) in record.iter().skip(2).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, line, format!("feature f_{j} = `{cell}` is not numeric")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("feature f_{j} = `{cell}` is not finite")));
            }
            features.push(v);
        }
        rows.push((client, label, features));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }

    let distinct: BTreeSet<&str> = rows.iter().map(|r| r.1.as_str()).collect();
    let mut label_names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if label_names.iter().all(|l| l.parse::<i64>().is_ok()) {
        label_names.sort_by_key(|l| l.parse::<i64>().expect("checked"));
    }
    let index: BTreeMap<&str, usize> = label_names.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let n_classes = label_names.len();

    let mut grouped: BTreeMap<usize, LocalDataset> = BTreeMap::new();
    for (client, label, features) in &rows {
        grouped
            .entry(*client)
            .or_insert_with(|| LocalDataset::empty(*client, dim, n_classes))
            .push(features, index[label.as_str()]);
    }
    Ok(FeatureTable {
        clients: grouped.into_values().collect(),
        label_names,
    })
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_feature_csv(file, path)
}

/// Reads a feature CSV and withholds `validation_fraction` of every client.
pub fn load_feature_csv(path: &Path, validation_fraction: f64, seed: u64) -> Result<FederatedData> {
    let table = read_feature_csv(path)?;
    Ok(withhold_validation(table.clients, table.label_names, validation_fraction, seed))
}

/// Writes datasets in the feature CSV schema. Floats use Rust's shortest
/// round-trip formatting, so reading the file back is lossless.
pub fn write_feature_csv<W: Write>(writer: W, clients: &[LocalDataset], label_names: &[String]) -> Result<()> {
    let dim = clients.first().map(|c| c.input_dim).unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["client_id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|j| format!("f_{j}")));
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(dim + 2);
    for ds in clients {
        for i in 0..ds.len() {
            record.clear();
            record.push(ds.client_id.to_string());
            record.push(label_names[ds.labels[i]].clone());
            record.extend(ds.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&record)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

/// Mean-preserving log-normal latency noise, redrawn every round.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyPerturbation {
    pub enabled: bool,
    /// Log-space standard deviation.
    pub sigma: f64,
}

/// `latency_ms · exp(g)`, `g ~ Normal(−σ²/2, σ²)`, keyed by
/// `(seed, client_id, round)`. Other fields are untouched.
pub fn perturb_latency(profile: &DeviceProfile, perturbation: &LatencyPerturbation, round_index: usize, seed: u64) -> DeviceProfile {
    let sigma = perturbation.sigma;
    if !perturbation.enabled || sigma == 0.0 {
        return profile.clone();
    }
    let mut rng = derive_rng(seed, Stream::LatencyPerturbation, profile.client_id as u64, round_index as u64);
    let g = Normal::new(-0.5 * sigma * sigma, sigma)
        .expect("sigma validated >= 0")
        .sample(&mut rng);
    DeviceProfile {
        latency_ms: profile.latency_ms * g.exp(),
        ..profile.clone()
    }
}
