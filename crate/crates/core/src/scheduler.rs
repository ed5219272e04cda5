//! Client selection, adaptive epoch budgets, participation fairness, and the
//! round-scheduling objective `max_i T_i(E_i) + λ·C(S)` with an exhaustive
//! small-fleet oracle.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::Rng;

use crate::accounting::{comm_cost_round, simulate_client_time, CommMode};
use crate::device::{DeviceProfile, HardwareScore};
use crate::error::{Error, Result};

/// The selected set for one round and each selected client's epoch budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    pub round_index: usize,
    /// Sorted by client id.
    pub selected: Vec<usize>,
    pub epochs: BTreeMap<usize, u32>,
}

impl RoundPlan {
    pub fn new(round_index: usize, epochs: BTreeMap<usize, u32>) -> Result<Self> {
        if epochs.is_empty() {
            return Err(Error::Invalid("round plan selects no clients".into()));
        }
        if let Some((id, _)) = epochs.iter().find(|(_, &e)| e == 0) {
            return Err(Error::Invalid(format!("client {id} has a zero epoch budget")));
        }
        Ok(Self {
            round_index,
            selected: epochs.keys().copied().collect(),
            epochs,
        })
    }

    pub fn uniform(round_index: usize, selected: &[usize], epochs: u32) -> Result<Self> {
        Self::new(round_index, selected.iter().map(|&id| (id, epochs)).collect())
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, fleet_size: n });
    }
    Ok(())
}

/// The `k` highest scores; ties go to the lower client id. Returned sorted by
/// client id.
pub fn select_top_k(scores: &[HardwareScore], k: usize) -> Result<Vec<usize>> {
    check_k(k, scores.len())?;
    let mut ranked: Vec<&HardwareScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.client_id.cmp(&b.client_id)));
    let mut chosen: Vec<usize> = ranked[..k].iter().map(|s| s.client_id).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Uniform sample of `k` clients without replacement, sorted by client id.
pub fn select_random_k<R: Rng + ?Sized>(client_ids: &[usize], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_k(k, client_ids.len())?;
    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, client_ids.len(), k)
        .into_iter()
        .map(|i| client_ids[i])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}

pub fn select_all(client_ids: &[usize]) -> Vec<usize> {
    let mut all = client_ids.to_vec();
    all.sort_unstable();
    all
}

/// `max(1, round_half_even(e_base · score / s_max))`.
pub fn adaptive_epochs(score: f64, s_max: f64, e_base: u32) -> Result<u32> {
    if !(s_max > 0.0) {
        return Err(Error::config(
            "weights",
            format!("maximum hardware score is {s_max}; adaptive epochs need a positive maximum"),
        ));
    }
    let scaled = (e_base as f64 * score / s_max).round_ties_even();
    Ok(if scaled < 1.0 { 1 } else { scaled as u32 })
}

/// Per-client selection counts over the whole fleet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessTracker {
    counts: BTreeMap<usize, u64>,
}

impl FairnessTracker {
    pub fn new(client_ids: impl IntoIterator<Item = usize>) -> Self {
        Self {
            counts: client_ids.into_iter().map(|id| (id, 0)).collect(),
        }
    }

    pub fn from_counts(counts: BTreeMap<usize, u64>) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, selected: &[usize]) -> Result<()> {
        for id in selected {
            *self
                .counts
                .get_mut(id)
                .ok_or_else(|| Error::Invalid(format!("client {id} is not tracked")))? += 1;
        }
        Ok(())
    }

    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    pub fn n_clients(&self) -> usize {
        self.counts.len()
    }
}

/// Jain's index `(Σf)² / (N Σf²)` over selection counts.
pub fn jain_index(tracker: &FairnessTracker) -> Result<f64> {
    let (sum, sum_sq) = tracker
        .counts
        .values()
        .fold((0.0, 0.0), |(s, q), &c| (s + c as f64, q + (c as f64) * (c as f64)));
    if sum == 0.0 {
        return Err(Error::NoParticipation);
    }
    Ok(sum * sum / (tracker.n_clients() as f64 * sum_sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    pub makespan_s: f64,
    /// Transfer volume in model-size units.
    pub comm_load: f64,
    pub lambda: f64,
    pub objective: f64,
}

impl ObjectiveReport {
    fn new(makespan_s: f64, comm_load: f64, lambda: f64) -> Self {
        Self {
            makespan_s,
            comm_load,
            lambda,
            objective: makespan_s + lambda * comm_load,
        }
    }
}

fn profile_of(fleet: &[DeviceProfile], id: usize) -> Result<&DeviceProfile> {
    fleet
        .iter()
        .find(|p| p.client_id == id)
        .ok_or_else(|| Error::Invalid(format!("client {id} is not in the fleet")))
}

/// Evaluates `makespan + λ·comm_load` for a plan.
pub fn objective_of_plan(
    plan: &RoundPlan,
    fleet: &[DeviceProfile],
    lambda: f64,
    comm_mode: CommMode,
) -> Result<ObjectiveReport> {
    let mut makespan = f64::NEG_INFINITY;
    for (&id, &e) in &plan.epochs {
        makespan = makespan.max(simulate_client_time(profile_of(fleet, id)?, e));
    }
    let comm = comm_cost_round(plan.selected.len(), 1.0, comm_mode);
    Ok(ObjectiveReport::new(makespan, comm, lambda))
}

/// Largest fleet the exhaustive oracle accepts.
pub const ORACLE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOptimum {
    pub plan: RoundPlan,
    pub report: ObjectiveReport,
    /// Number of (subset, epoch assignment) pairs evaluated.
    pub evaluated: u64,
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] != i + n - k {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustive minimizer of the round objective over every subset with size in
/// `k_range` and every epoch assignment drawn from `epoch_grid`.
///
/// Ties resolve to the smaller subset, then the lexicographically smaller id
/// list, then the lexicographically smaller epoch vector.
pub fn brute_force_schedule(
    fleet: &[DeviceProfile],
    k_range: RangeInclusive<usize>,
    epoch_grid: &[u32],
    lambda: f64,
    comm_mode: CommMode,
) -> Result<ScheduleOptimum> {
    let n = fleet.len();
    if n == 0 {
        return Err(Error::EmptyFleet);
    }
    if n > ORACLE_LIMIT {
        return Err(Error::OracleLimit { n, limit: ORACLE_LIMIT });
    }
    let mut grid = epoch_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::Invalid("epoch grid must be non-empty with entries >= 1".into()));
    }
    let (k_lo, k_hi) = (*k_range.start(), *k_range.end());
    check_k(k_lo, n)?;
    check_k(k_hi, n)?;

    let mut sorted: Vec<&DeviceProfile> = fleet.iter().collect();
    sorted.sort_by_key(|p| p.client_id);
    // times[i][g]: client i's simulated time at grid epoch g.
    let times: Vec<Vec<f64>> = sorted
        .iter()
        .map(|p| grid.iter().map(|&e| simulate_client_time(p, e)).collect())
        .collect();

    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    for k in k_lo..=k_hi {
        let comm = comm_cost_round(k, 1.0, comm_mode);
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            let mut choice = vec![0usize; k];
            loop {
                let makespan = subset
                    .iter()
                    .zip(&choice)
                    .map(|(&i, &g)| times[i][g])
                    .fold(f64::NEG_INFINITY, f64::max);
                let objective = makespan + lambda * comm;
                evaluated += 1;
                if best.as_ref().is_none_or(|(b, _, _)| objective < *b) {
                    best = Some((objective, subset.clone(), choice.clone()));
                }
                // Odometer over epoch assignments, last position fastest.
                let mut pos = k;
                let exhausted = loop {
                    if pos == 0 {
                        break true;
                    }
                    pos -= 1;
                    choice[pos] += 1;
                    if choice[pos] < grid.len() {
                        break false;
                    }
                    choice[pos] = 0;
                };
                if exhausted {
                    break;
                }
            }
            if !next_combination(&mut subset, n) {
                break;
            }
        }
    }

    let (_, subset, choice) = best.expect("k range is non-empty");
    let epochs: BTreeMap<usize, u32> = subset
        .iter()
        .zip(&choice)
        .map(|(&i, &g)| (sorted[i].client_id, grid[g]))
        .collect();
    let plan = RoundPlan::new(0, epochs)?;
    let report = objective_of_plan(&plan, fleet, lambda, comm_mode)?;
    Ok(ScheduleOptimum { plan, report, evaluated })
}
