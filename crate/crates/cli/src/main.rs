//! `smlsafe`: CI gate for safety evidence of machine-learning components.
//!
//! Exit status: 0 pass / compliant, 1 evaluated and failed, 2 operational error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, SimulateArgs, Status};
use report::{Format, Report};

#[derive(Parser)]
#[command(
    name = "smlsafe",
    version,
    about = "Safety evaluation gate for statistical ML components"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Judge measured samples or a normal output model against an acceptance target.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        confidence: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a seeded fault-injection scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        confidence: Option<f64>,
        /// Per-demand CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Check a process assessment for compliance.
    Assess {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Qualify a usage ledger for proven-in-use credit.
    Ledger {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        confidence: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Rank the technical safety concepts by cost and difficulty.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

fn emit(report: &Report, output: &Output) -> Result<(), CliError> {
    let text = report.render(output.format);
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let (result, output) = match &cli.command {
        Command::Evaluate {
            config,
            confidence,
            output,
        } => (commands::evaluate(config, *confidence), output),
        Command::Simulate {
            config,
            seed,
            confidence,
            trace,
            threads,
            output,
        } => {
            let args = SimulateArgs {
                config,
                seed: *seed,
                confidence: *confidence,
                trace: trace.as_deref(),
                threads: *threads,
            };
            (commands::simulate(&args), output)
        }
        Command::Assess { config, output } => (commands::assess(config), output),
        Command::Ledger {
            config,
            confidence,
            output,
        } => (commands::ledger(config, *confidence), output),
        Command::Compare { config, output } => (commands::compare(config.as_deref()), output),
    };
    let (report, status) = result?;
    emit(&report, output)?;
    Ok(status)
}

fn main() -> ExitCode {
    // clap itself exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
