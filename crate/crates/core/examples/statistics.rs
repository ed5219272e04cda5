//! Welch t-test and Cohen's d on per-seed final accuracies.

use hwfl::stats::{cohens_d, welch_t, MeanStd};

fn main() -> hwfl::Result<()> {
    let hwfl_acc = [0.36, 0.33, 0.35, 0.38, 0.34];
    let fedavg_acc = [0.31, 0.36, 0.29, 0.33, 0.34];
    let w = welch_t(&hwfl_acc, &fedavg_acc)?;
    println!("HW-FL  {}", MeanStd::of(&hwfl_acc));
    println!("FedAvg {}", MeanStd::of(&fedavg_acc));
    println!("t = {:.4}, df = {:.2}, p = {:.4}", w.t, w.df, w.p_two_sided);
    println!("d = {:.3}", cohens_d(&hwfl_acc, &fedavg_acc)?);
    Ok(())
}
