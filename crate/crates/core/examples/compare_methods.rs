//! Runs all six methods on the default synthetic task and prints the
//! accuracy/time/communication trade-off.

use std::path::Path;

use hwfl::config::SuiteConfig;
use hwfl::federation::{run_experiment, Method};

fn main() -> hwfl::Result<()> {
    let suite = SuiteConfig {
        methods: Method::ALL.to_vec(),
        ..SuiteConfig::default()
    };
    println!("{:<14} {:>13} {:>13} {:>9} {:>6}", "method", "accuracy", "round time", "comm MB", "jain");
    for config in suite.resolve(Path::new("."))? {
        let r = run_experiment(&config)?;
        let s = &r.summary;
        println!(
            "{:<14} {:>13} {:>12}s {:>9.2} {:>6.3}",
            r.method.display_name(),
            s.accuracy.to_string(),
            format!("{:.2}", s.mean_round_time_s.mean),
            s.total_comm_mb.mean,
            s.jain.mean
        );
    }
    Ok(())
}
