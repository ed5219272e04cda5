//! The multi-round federation driver.
//!
//! Each round: profile (optionally with perturbed latency) → score → select →
//! assign epochs → train selected clients → aggregate → account time,
//! communication and energy → evaluate on the held-out pool. Methods differ
//! only in how they compose selection, epoch assignment and aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{comm_cost_round, CommMode, TimeModel};
use crate::data::{load_feature_csv, perturb_latency, synthesize_noniid, DataMode, DataSpec, FederatedData, LatencyPerturbation};
use crate::device::{energy_proxy, score_fleet, validate_fleet, DeviceProfile, EfficiencyTerm, HardwareScore, ScoreWeights};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, derive_seed, Stream};
use crate::scheduler::{adaptive_epochs, jain_index, select_all, select_random_k, select_top_k, FairnessTracker};
use crate::stats::{summarize_trials, TrialFinal, TrialSummary};
use crate::training::{evaluate, init_model_seeded, local_train, ModelParams, ModelShape, TrainSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Top-K by hardware score, adaptive epochs, score-weighted aggregation.
    Hwfl,
    Fedavg,
    Fedprox,
    RandomTopk,
    /// Score-based selection only: uniform epochs, sample-weighted aggregation.
    TopkOnly,
    /// Adaptive epochs only: every client, sample-weighted aggregation.
    AdaptiveOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Selection {
    TopK,
    RandomK,
    All,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Hwfl,
        Method::Fedavg,
        Method::Fedprox,
        Method::RandomTopk,
        Method::TopkOnly,
        Method::AdaptiveOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hwfl => "hwfl",
            Method::Fedavg => "fedavg",
            Method::Fedprox => "fedprox",
            Method::RandomTopk => "random_topk",
            Method::TopkOnly => "topk_only",
            Method::AdaptiveOnly => "adaptive_only",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Method::Hwfl => "HW-FL",
            Method::Fedavg => "FedAvg",
            Method::Fedprox => "FedProx",
            Method::RandomTopk => "Random top-K",
            Method::TopkOnly => "Top-K only",
            Method::AdaptiveOnly => "Adaptive-only",
        }
    }

    fn selection(&self) -> Selection {
        match self {
            Method::Hwfl | Method::TopkOnly => Selection::TopK,
            Method::RandomTopk => Selection::RandomK,
            Method::Fedavg | Method::Fedprox | Method::AdaptiveOnly => Selection::All,
        }
    }

    fn adaptive_epochs(&self) -> bool {
        matches!(self, Method::Hwfl | Method::AdaptiveOnly)
    }

    fn score_weighted(&self) -> bool {
        matches!(self, Method::Hwfl)
    }

    fn uses_scores(&self) -> bool {
        self.selection() == Selection::TopK || self.adaptive_epochs()
    }

    /// Number of clients selected per round for a fleet of `n`.
    pub fn participants(&self, k: usize, n: usize) -> usize {
        match self.selection() {
            Selection::All => n,
            _ => k,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("methods", format!("unknown method `{s}`")))
    }
}

/// Local-training hyperparameters shared by every client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDefaults {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// 0 selects the linear model.
    pub hidden_dim: usize,
}

impl Default for TrainDefaults {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 32,
            hidden_dim: 0,
        }
    }
}

/// Fully resolved description of one method's experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub n_rounds: usize,
    pub k: usize,
    pub e_base: u32,
    pub weights: ScoreWeights,
    pub efficiency: EfficiencyTerm,
    pub lambda: f64,
    pub prox_mu: f64,
    pub comm_mode: CommMode,
    pub time_model: TimeModel,
    pub model_size_mb: f64,
    pub fleet: Vec<DeviceProfile>,
    pub data: DataSpec,
    pub train: TrainDefaults,
    pub latency: LatencyPerturbation,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        validate_fleet(&self.fleet).map_err(|e| Error::config("fleet", e.to_string()))?;
        let n = self.fleet.len();
        if self.n_rounds == 0 {
            return Err(Error::config("n_rounds", "must be >= 1"));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::config("k", format!("must lie in 1..={n} for a fleet of {n} clients, got {}", self.k)));
        }
        if self.e_base == 0 {
            return Err(Error::config("e_base", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        self.weights.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be >= 0"));
        }
        if !(self.prox_mu >= 0.0 && self.prox_mu.is_finite()) {
            return Err(Error::config("prox_mu", "must be >= 0"));
        }
        if !(self.model_size_mb > 0.0 && self.model_size_mb.is_finite()) {
            return Err(Error::config("model_size_mb", "must be > 0"));
        }
        if !(self.time_model.latency_exchanges >= 0.0 && self.time_model.latency_exchanges.is_finite()) {
            return Err(Error::config("time.latency_exchanges", "must be >= 0"));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be > 0"));
        }
        if self.train.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.latency.sigma >= 0.0 && self.latency.sigma.is_finite()) {
            return Err(Error::config("latency.sigma", "must be >= 0"));
        }
        self.data.validate()?;
        if self.data.mode != DataMode::Csv {
            match self.data.n_clients {
                Some(c) if c != n => {
                    return Err(Error::config("data.n_clients", format!("{c} does not match the fleet size {n}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn local_prox_mu(&self) -> f64 {
        if self.method == Method::Fedprox {
            self.prox_mu
        } else {
            0.0
        }
    }
}

/// Loads or synthesizes the trial's data and aligns it with the fleet:
/// `clients[i]` belongs to `fleet[i]`.
pub fn prepare_data(config: &ExperimentConfig, seed: u64) -> Result<FederatedData> {
    let mut data = match config.data.mode {
        DataMode::Csv => {
            let path = config.data.csv_path.as_deref().expect("validated");
            load_feature_csv(path, config.data.validation_fraction, seed)?
        }
        _ => {
            let spec = DataSpec {
                n_clients: Some(config.fleet.len()),
                ..config.data.clone()
            };
            let mut data = synthesize_noniid(&spec, seed)?;
            for (ds, p) in data.clients.iter_mut().zip(&config.fleet) {
                ds.client_id = p.client_id;
            }
            data
        }
    };
    let mut by_id: BTreeMap<usize, _> = data.clients.drain(..).map(|ds| (ds.client_id, ds)).collect();
    let mut aligned = Vec::with_capacity(config.fleet.len());
    for p in &config.fleet {
        let ds = by_id
            .remove(&p.client_id)
            .ok_or_else(|| Error::config("data", format!("no samples for fleet client {}", p.client_id)))?;
        aligned.push(ds);
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(Error::config("data", format!("client {extra} has data but is not in the fleet")));
    }
    data.clients = aligned;
    if data.validation.is_empty() {
        return Err(Error::config("data", "validation pool is empty"));
    }
    Ok(data)
}

/// A trained client model with its aggregation inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ModelParams,
    pub n_samples: usize,
    pub score: f64,
}

fn weighted_mean(updates: &[ClientUpdate], weights: &[f64]) -> Result<ModelParams> {
    let first = updates.first().ok_or_else(|| Error::Invalid("nothing to aggregate".into()))?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Invalid("aggregation weights sum to zero".into()));
    }
    let mut out = vec![0.0; first.params.values.len()];
    for (u, w) in updates.iter().zip(weights) {
        if u.params.shape != first.params.shape {
            return Err(Error::Shape(format!("client {} sent a differently shaped model", u.client_id)));
        }
        let share = w / total;
        for (o, v) in out.iter_mut().zip(&u.params.values) {
            *o += share * v;
        }
    }
    Ok(ModelParams {
        values: out,
        shape: first.params.shape,
    })
}

/// Convex combination weighted by `n_i · S_i`.
pub fn aggregate_hwfl(updates: &[ClientUpdate]) -> Result<ModelParams> {
    if let Some(u) = updates.iter().find(|u| !(u.score > 0.0)) {
        return Err(Error::config(
            "weights",
            format!("client {} has hardware score {}; score-weighted aggregation needs positive scores", u.client_id, u.score),
        ));
    }
    let weights: Vec<f64> = updates.iter().map(|u| u.n_samples as f64 * u.score).collect();
    weighted_mean(updates, &weights)
}

/// Convex combination weighted by `n_i`.
pub fn aggregate_fedavg(updates: &[ClientUpdate]) -> Result<ModelParams> {
    let weights: Vec<f64> = updates.iter().map(|u| u.n_samples as f64).collect();
    weighted_mean(updates, &weights)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    /// 1-based.
    pub round_index: usize,
    pub selected: Vec<usize>,
    /// Parallel to `selected`.
    pub epochs: Vec<u32>,
    pub sim_time_s: f64,
    pub comm_mb: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
    pub val_balanced_acc: f64,
    pub jain: f64,
    pub energy_proxy_total: f64,
}

/// Mutable state of one trial.
#[derive(Debug, Clone)]
pub struct FederationState {
    pub seed: u64,
    pub global: ModelParams,
    pub tracker: FairnessTracker,
    pub data: FederatedData,
}

impl FederationState {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let data = prepare_data(config, seed)?;
        let shape = ModelShape {
            input_dim: data.validation.input_dim,
            hidden_dim: config.train.hidden_dim,
            n_classes: data.label_names.len(),
        };
        Ok(Self {
            seed,
            global: init_model_seeded(shape, seed)?,
            tracker: FairnessTracker::new(config.fleet.iter().map(|p| p.client_id)),
            data,
        })
    }
}

/// The per-round fleet: static profiles, or latency-perturbed ones when
/// perturbation is enabled.
fn round_fleet(config: &ExperimentConfig, round_index: usize, seed: u64) -> Vec<DeviceProfile> {
    config
        .fleet
        .iter()
        .map(|p| perturb_latency(p, &config.latency, round_index, seed))
        .collect()
}

/// Executes one round and replaces `state.global` with the aggregate.
pub fn run_round(state: &mut FederationState, config: &ExperimentConfig, round_index: usize) -> Result<RoundMetrics> {
    let seed = state.seed;
    let method = config.method;
    let fleet = round_fleet(config, round_index, seed);
    let ids: Vec<usize> = fleet.iter().map(|p| p.client_id).collect();
    let position: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let scores: Vec<HardwareScore> = if method.uses_scores() {
        score_fleet(&fleet, &config.weights, config.efficiency)?
    } else {
        ids.iter().map(|&client_id| HardwareScore { client_id, score: 1.0 }).collect()
    };
    let s_max = scores.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);

    let selected = match method.selection() {
        Selection::TopK => select_top_k(&scores, config.k)?,
        Selection::RandomK => {
            let mut rng = derive_rng(seed, Stream::RandomSelection, round_index as u64, 0);
            select_random_k(&ids, config.k, &mut rng)?
        }
        Selection::All => select_all(&ids),
    };
    let epochs: Vec<u32> = selected
        .iter()
        .map(|id| {
            if method.adaptive_epochs() {
                adaptive_epochs(scores[position[id]].score, s_max, config.e_base)
            } else {
                Ok(config.e_base)
            }
        })
        .collect::<Result<_>>()?;

    let global = &state.global;
    let data = &state.data;
    let prox_mu = config.local_prox_mu();
    let updates: Vec<ClientUpdate> = selected
        .par_iter()
        .zip(epochs.par_iter())
        .map(|(&id, &e)| {
            let i = position[&id];
            let spec = TrainSpec {
                epochs: e,
                learning_rate: config.train.learning_rate,
                batch_size: config.train.batch_size,
                prox_mu,
                seed: derive_seed(seed, Stream::BatchShuffle, id as u64, round_index as u64),
            };
            let (params, stats) = local_train(global, &data.clients[i], &spec)?;
            Ok(ClientUpdate {
                client_id: id,
                params,
                n_samples: stats.n_samples,
                score: scores[i].score,
            })
        })
        .collect::<Result<_>>()?;

    let new_global = if method.score_weighted() {
        aggregate_hwfl(&updates)?
    } else {
        aggregate_fedavg(&updates)?
    };

    let participants = selected.iter().zip(&epochs).map(|(id, &e)| (&fleet[position[id]], e));
    let sim_time_s = config.time_model.round_time(participants.clone())?;
    let energy_proxy_total = participants.map(|(p, e)| energy_proxy(p, e)).sum();
    let comm_mb = comm_cost_round(selected.len(), config.model_size_mb, config.comm_mode);

    state.tracker.record(&selected)?;
    let jain = jain_index(&state.tracker)?;
    let eval = evaluate(&new_global, &state.data.validation)?;
    state.global = new_global;

    Ok(RoundMetrics {
        round_index,
        selected,
        epochs,
        sim_time_s,
        comm_mb,
        val_accuracy: eval.accuracy,
        val_macro_f1: eval.macro_f1,
        val_balanced_acc: eval.balanced_accuracy,
        jain,
        energy_proxy_total,
    })
}

/// All rounds of one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub rounds: Vec<RoundMetrics>,
    pub fin: TrialFinal,
    pub warnings: Vec<String>,
}

impl SeedRun {
    fn finish(seed: u64, rounds: Vec<RoundMetrics>, warnings: Vec<String>) -> Self {
        let last = rounds.last().expect("n_rounds >= 1");
        let total_time_s: f64 = rounds.iter().map(|r| r.sim_time_s).sum();
        let fin = TrialFinal {
            seed,
            accuracy: last.val_accuracy,
            macro_f1: last.val_macro_f1,
            balanced_accuracy: last.val_balanced_acc,
            jain: last.jain,
            mean_round_time_s: total_time_s / rounds.len() as f64,
            total_time_s,
            total_comm_mb: rounds.iter().map(|r| r.comm_mb).sum(),
            total_energy: rounds.iter().map(|r| r.energy_proxy_total).sum(),
        };
        Self { seed, rounds, fin, warnings }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub runs: Vec<SeedRun>,
    pub summary: TrialSummary,
}

pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let mut state = FederationState::new(config, seed)?;
    let warnings = state.data.warnings.clone();
    let rounds = (1..=config.n_rounds)
        .map(|t| run_round(&mut state, config, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedRun::finish(seed, rounds, warnings))
}

/// Runs every seed from a fresh model. Seeds are independent jobs and run in
/// parallel; results are reported in seed-list order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<TrialFinal> = runs.iter().map(|r| r.fin).collect();
    Ok(ExperimentResult {
        method: config.method,
        summary: summarize_trials(&finals),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{table1_fleet, DEFAULT_CORE_SECONDS};
    use crate::training::ModelShape;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop, prop_assert, proptest, Strategy};

    fn update(id: usize, values: Vec<f64>, n: usize, score: f64) -> ClientUpdate {
        let shape = ModelShape::linear(values.len() - 1, 1);
        ClientUpdate {
            client_id: id,
            params: ModelParams::new(values, shape).unwrap(),
            n_samples: n,
            score,
        }
    }

    #[test]
    fn aggregation_examples() {
        let u = vec![1.0, 2.0, 3.0];
        let v = vec![5.0, -2.0, 0.0];
        let mid = aggregate_hwfl(&[update(0, u.clone(), 1, 1.0), update(1, v.clone(), 1, 1.0)]).unwrap();
        assert_eq!(mid.values, vec![3.0, 0.0, 1.5]);

        // n = (2, 1), S = (1, 3): weights (2/5, 3/5).
        let w = aggregate_hwfl(&[update(0, u.clone(), 2, 1.0), update(1, v.clone(), 1, 3.0)]).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(w.values[j], 0.4 * u[j] + 0.6 * v[j], epsilon = 1e-12);
        }

        let single = aggregate_hwfl(&[update(0, u.clone(), 7, 0.3)]).unwrap();
        assert_eq!(single.values, u);

        let f = aggregate_fedavg(&[update(0, u.clone(), 3, 9.0), update(1, v.clone(), 1, 0.1)]).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(f.values[j], 0.75 * u[j] + 0.25 * v[j], epsilon = 1e-12);
        }
        let same = aggregate_fedavg(&[update(0, u.clone(), 3, 1.0), update(1, u.clone(), 5, 1.0)]).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(same.values[j], u[j], epsilon = 1e-15);
        }
    }

    #[test]
    fn aggregation_errors() {
        assert!(aggregate_fedavg(&[]).is_err());
        assert!(aggregate_hwfl(&[]).is_err());
        let bad = aggregate_hwfl(&[update(0, vec![1.0, 2.0], 1, 0.5), update(1, vec![1.0, 2.0], 1, -0.1)]);
        assert!(matches!(bad, Err(Error::Config { .. })));
        let mismatched = aggregate_fedavg(&[update(0, vec![1.0, 2.0], 1, 1.0), update(1, vec![1.0, 2.0, 3.0], 1, 1.0)]);
        assert!(mismatched.is_err());
    }

    fn arb_updates() -> impl Strategy<Value = Vec<ClientUpdate>> {
        (1usize..6, 2usize..8).prop_flat_map(|(m, len)| {
            prop::collection::vec((prop::collection::vec(-10.0f64..10.0, len), 1usize..100, 0.01f64..2.0), m).prop_map(|rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (v, n, s))| update(i, v, n, s))
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn aggregates_are_convex(updates in arb_updates()) {
            for agg in [aggregate_hwfl(&updates).unwrap(), aggregate_fedavg(&updates).unwrap()] {
                for (j, v) in agg.values.iter().enumerate() {
                    let lo = updates.iter().map(|u| u.params.values[j]).fold(f64::INFINITY, f64::min);
                    let hi = updates.iter().map(|u| u.params.values[j]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
                }
            }
        }
    }

    fn small_config(method: Method) -> ExperimentConfig {
        ExperimentConfig {
            method,
            n_rounds: 4,
            k: 3,
            e_base: 4,
            weights: ScoreWeights::default(),
            efficiency: EfficiencyTerm::Normalized,
            lambda: 0.1,
            prox_mu: 0.01,
            comm_mode: CommMode::Symmetric,
            time_model: TimeModel::default(),
            model_size_mb: 1.0,
            fleet: table1_fleet(DEFAULT_CORE_SECONDS),
            data: DataSpec {
                input_dim: 8,
                samples_per_client: 60,
                ..Default::default()
            },
            train: TrainDefaults::default(),
            latency: LatencyPerturbation::default(),
            seeds: vec![1, 2],
        }
    }

    #[test]
    fn participants_per_method() {
        for method in Method::ALL {
            let result = run_experiment(&small_config(method)).unwrap();
            let expect = method.participants(3, 5);
            for run in &result.runs {
                for r in &run.rounds {
                    assert_eq!(r.selected.len(), expect, "{method}");
                    assert_eq!(r.epochs.len(), expect);
                    assert!(r.epochs.iter().all(|&e| e >= 1));
                    for v in [r.val_accuracy, r.val_macro_f1, r.val_balanced_acc, r.jain] {
                        assert!((0.0..=1.0).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn fedavg_trains_everyone_for_e_base() {
        let result = run_experiment(&small_config(Method::Fedavg)).unwrap();
        for r in &result.runs[0].rounds {
            assert_eq!(r.selected, vec![0, 1, 2, 3, 4]);
            assert_eq!(r.epochs, vec![4; 5]);
            assert_abs_diff_eq!(r.jain, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hwfl_selection_is_static_with_top_client_at_e_base() {
        let result = run_experiment(&small_config(Method::Hwfl)).unwrap();
        let first = &result.runs[0].rounds[0];
        assert_eq!(first.selected, vec![0, 1, 4]);
        // Laptop has the top score.
        assert_eq!(first.epochs[0], 4);
        for run in &result.runs {
            for r in &run.rounds {
                assert_eq!(r.selected, first.selected);
                assert_eq!(r.epochs, first.epochs);
            }
        }
    }

    #[test]
    fn fedprox_with_zero_mu_equals_fedavg() {
        let avg = run_experiment(&small_config(Method::Fedavg)).unwrap();
        let prox0 = run_experiment(&ExperimentConfig {
            prox_mu: 0.0,
            ..small_config(Method::Fedprox)
        })
        .unwrap();
        assert_eq!(avg.runs, prox0.runs);

        // A positive mu changes the trained global model.
        let mut states: Vec<FederationState> = [Method::Fedavg, Method::Fedprox]
            .iter()
            .map(|&m| FederationState::new(&small_config(m), 1).unwrap())
            .collect();
        run_round(&mut states[0], &small_config(Method::Fedavg), 1).unwrap();
        run_round(&mut states[1], &small_config(Method::Fedprox), 1).unwrap();
        assert_ne!(states[0].global, states[1].global);
    }

    #[test]
    fn experiments_are_deterministic() {
        let c = small_config(Method::RandomTopk);
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
    }

    #[test]
    fn perturbed_latency_changes_round_times_only() {
        let base = run_experiment(&small_config(Method::Fedavg)).unwrap();
        let noisy = run_experiment(&ExperimentConfig {
            latency: LatencyPerturbation { enabled: true, sigma: 0.5 },
            ..small_config(Method::Fedavg)
        })
        .unwrap();
        let (a, b) = (&base.runs[0].rounds[1], &noisy.runs[0].rounds[1]);
        assert_eq!(a.val_accuracy, b.val_accuracy);
        assert_ne!(a.sim_time_s, b.sim_time_s);
    }

    #[test]
    fn invalid_configs_fail_before_work() {
        let bad_k = ExperimentConfig { k: 6, ..small_config(Method::Hwfl) };
        assert!(matches!(run_experiment(&bad_k), Err(Error::Config { ref field, .. }) if field == "k"));
        let no_seeds = ExperimentConfig { seeds: vec![], ..small_config(Method::Hwfl) };
        assert!(matches!(run_experiment(&no_seeds), Err(Error::Config { ref field, .. }) if field == "seeds"));
        let empty = ExperimentConfig { fleet: vec![], ..small_config(Method::Hwfl) };
        assert!(matches!(run_experiment(&empty), Err(Error::Config { ref field, .. }) if field == "fleet"));
    }

    #[test]
    fn negative_scores_abort_hwfl() {
        // Latency dominates: every score is negative.
        let weights = ScoreWeights { alpha: 0.01, beta: 0.0, gamma: 0.0, delta: 1.0 };
        let c = ExperimentConfig { weights, ..small_config(Method::Hwfl) };
        assert!(matches!(run_experiment(&c), Err(Error::Config { .. })));
    }
}
