use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hwfl::cli::{self, CommandOptions, CommandOutput};

#[derive(Parser)]
#[command(name = "hwfl", version, about = "Hardware-aware federated learning scheduling simulator")]
struct Cli {
    /// Print a fully populated default config and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory. Falls back to $HWFL_OUT_DIR, then ./results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and write per-round logs and a summary.
    Run(Common),
    /// Run and compare methods with Welch t-tests and Cohen's d.
    Compare(Common),
    /// Sweep the participant count K.
    SweepK {
        #[command(flatten)]
        common: Common,
        /// Comma-separated K values (default: 1..=N).
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Sweep the CPU weight alpha of the hardware score.
    SweepWeights {
        #[command(flatten)]
        common: Common,
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
    },
}

fn options(c: Common) -> CommandOptions {
    CommandOptions {
        out: cli::resolve_out_dir(c.out.as_deref()),
        config: c.config,
        seeds: c.seeds,
    }
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if args.print_defaults {
        return match cli::default_config_toml() {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let Some(command) = args.command else {
        eprintln!("error: a subcommand is required (run, compare, sweep-k, sweep-weights)");
        return ExitCode::from(1);
    };
    let result: hwfl::Result<CommandOutput> = match command {
        Command::Run(c) => cli::cmd_run(&options(c)),
        Command::Compare(c) => cli::cmd_compare(&options(c)),
        Command::SweepK { common, k } => cli::cmd_sweep_k(&options(common), k),
        Command::SweepWeights { common, alpha } => cli::cmd_sweep_weights(&options(common), alpha),
    };
    match result {
        Ok(out) => {
            print!("{}", out.report);
            println!("wrote {} files to {}", out.manifest.files.len() + 1, out.manifest.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
