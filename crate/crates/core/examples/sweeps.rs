//! Participant-count and CPU-weight sweeps through the command layer.
//! Output goes to `$HWFL_OUT_DIR` or a temporary directory.

use std::path::Path;

use hwfl::cli::{cmd_sweep_k, cmd_sweep_weights, CommandOptions, OUT_DIR_ENV};

fn main() -> hwfl::Result<()> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let out = std::env::var_os(OUT_DIR_ENV).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("hwfl_sweeps"));

    let k = cmd_sweep_k(
        &CommandOptions {
            config: configs.join("table2.toml"),
            out: out.join("k"),
            seeds: None,
        },
        None,
    )?;
    print!("{}", k.report);

    let alpha = cmd_sweep_weights(
        &CommandOptions {
            config: configs.join("alpha_sweep.toml"),
            out: out.join("alpha"),
            seeds: None,
        },
        Some(vec![0.0, 0.3, 0.4, 0.5, 1.0]),
    )?;
    print!("{}", alpha.report);
    println!("outputs in {}", out.display());
    Ok(())
}
