use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sisalloc::commands::{self, Mode, Outcome, Reference};
use sisalloc::ExperimentConfig;

#[derive(Parser)]
#[command(name = "sisalloc", version, about = "Cost-optimal vaccine and antidote allocation for SIS epidemics")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "experiment.toml")]
    config: PathBuf,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured graph and write it as an edge list.
    Gen,
    /// Solve the allocation problem.
    Solve {
        #[arg(long, value_enum, default_value = "central")]
        mode: Mode,
        /// Also solve centrally and report the per-round gap.
        #[arg(long, value_enum)]
        reference: Option<Reference>,
    },
    /// Check the decay rate an allocation achieves.
    Verify {
        #[arg(long)]
        allocation: PathBuf,
    },
    /// Spectral abscissa at the four bound corners.
    Corners,
    /// Solve centrally and distributedly and compare.
    Compare,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = ExperimentConfig::load(&cli.config)?;
    let out = cli.out.unwrap_or_else(|| cfg.output_dir());
    match cli.command {
        Command::Gen => commands::gen(&cfg, &out),
        Command::Solve { mode, reference } => commands::solve(&cfg, mode, reference, &out),
        Command::Verify { allocation } => commands::verify(&cfg, &allocation, &out),
        Command::Corners => commands::corners(&cfg, &out),
        Command::Compare => commands::compare(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::from(outcome.status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
