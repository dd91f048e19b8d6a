use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use madmil::experiment::{run, Command, ExperimentConfig, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Subcommand {
    /// Write soft-bag train/val/test sets as feature-bag CSVs.
    Generate,
    /// Grid-searched training over seeds; history, results and summary CSVs.
    Train,
    /// Parameter and FLOP accounting.
    Count,
    /// Compare MAD-MIL head counts by validation loss.
    Sweep,
    /// Export attention weights (and MNIST montages) for test bags.
    Heatmap,
}

#[derive(Debug, Parser)]
#[command(name = "madmil", version, about = "Multiple instance learning experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// Experiment file of `section.key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds trained in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// First training seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = match cli.command {
        Subcommand::Generate => Command::Generate,
        Subcommand::Train => Command::Train,
        Subcommand::Count => Command::Count,
        Subcommand::Sweep => Command::Sweep,
        Subcommand::Heatmap => Command::Heatmap,
    };
    let options = RunOptions {
        out: cli.out,
        jobs: cli.jobs,
        seed: cli.seed,
    };
    match ExperimentConfig::load(&cli.config).and_then(|config| run(command, &config, &options)) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
