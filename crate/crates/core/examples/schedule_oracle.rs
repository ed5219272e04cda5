//! Exhaustively solves the one-round scheduling objective on a small fleet
//! and compares it with the score-based heuristic.

use std::collections::BTreeMap;

use hwfl::accounting::CommMode;
use hwfl::device::{score_fleet, table1_fleet, EfficiencyTerm, ScoreWeights};
use hwfl::scheduler::{adaptive_epochs, brute_force_schedule, objective_of_plan, select_top_k, RoundPlan};

fn main() -> hwfl::Result<()> {
    let fleet = table1_fleet(16.0);
    let lambda = 0.1;
    let grid = [1, 2, 4];

    let scores = score_fleet(&fleet, &ScoreWeights::default(), EfficiencyTerm::Normalized)?;
    let s_max = scores.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    let top = select_top_k(&scores, 3)?;
    let mut epochs = BTreeMap::new();
    for s in scores.iter().filter(|s| top.contains(&s.client_id)) {
        epochs.insert(s.client_id, adaptive_epochs(s.score, s_max, 4)?);
    }
    let heuristic = objective_of_plan(&RoundPlan::new(1, epochs.clone())?, &fleet, lambda, CommMode::Symmetric)?;
    println!("heuristic  {epochs:?}  makespan {:.3}s  objective {:.4}", heuristic.makespan_s, heuristic.objective);

    for k in [3..=3, 1..=5] {
        let opt = brute_force_schedule(&fleet, k.clone(), &grid, lambda, CommMode::Symmetric)?;
        println!(
            "optimum k in {k:?}  {:?}  makespan {:.3}s  objective {:.4}  ({} plans, ratio {:.3})",
            opt.plan.epochs,
            opt.report.makespan_s,
            opt.report.objective,
            opt.evaluated,
            heuristic.objective / opt.report.objective
        );
    }
    Ok(())
}
