use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use salab::config::ExperimentConfig;
use salab::run::{resolve_out_dir, run_command, Command, EXIT_CONFIG, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "salab", version, about = "Stochastic approximation laboratory")]
struct Cli {
    /// simulate, audit, tightness, lockin, fit, sample-complexity,
    /// schedule-check or noise-check
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to the config, then $SALAB_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("salab: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.parallelism = jobs;
    }
    let out = resolve_out_dir(cli.out.as_deref(), &config);
    match run_command(cli.command, &config, &out) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            println!("outputs: {}", out.display());
            ExitCode::from(outcome.verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("salab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
