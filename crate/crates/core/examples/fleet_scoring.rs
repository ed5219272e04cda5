//! Scores the bundled five-device fleet and shows who HW-FL would pick.

use hwfl::device::{normalize_fleet, score_fleet, table1_fleet, EfficiencyTerm, ScoreWeights, TABLE1_NAMES};
use hwfl::scheduler::{adaptive_epochs, select_top_k};

fn main() -> hwfl::Result<()> {
    let fleet = table1_fleet(16.0);
    let weights = ScoreWeights::default();
    let norm = normalize_fleet(&fleet)?;
    let scores = score_fleet(&fleet, &weights, EfficiencyTerm::Normalized)?;
    let s_max = scores.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);

    println!("{:<20} {:>5} {:>5} {:>5} {:>5} {:>7} {:>6}", "device", "cpu", "ram", "eff", "lat", "score", "epochs");
    for ((name, n), s) in TABLE1_NAMES.iter().zip(&norm).zip(&scores) {
        println!(
            "{name:<20} {:>5.3} {:>5.3} {:>5.3} {:>5.3} {:>7.4} {:>6}",
            n.cpu_hat,
            n.ram_hat,
            n.eff_hat,
            n.lat_hat,
            s.score,
            adaptive_epochs(s.score, s_max, 4)?
        );
    }
    println!("top-3: {:?}", select_top_k(&scores, 3)?);
    Ok(())
}
