use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lmabo::cli::{cmd_analyze, cmd_list, cmd_run, cmd_transcript, ListKind};
use lmabo::Error;

/// Bayesian optimization campaigns with adaptive acquisition-function selection.
#[derive(Parser)]
#[command(name = "lmabo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every unfinished cell of a campaign manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Cells run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Print the plan without running anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Compute regret metrics, ranks and tests over a directory of records.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        /// Method the pairwise tests compare against.
        #[arg(long, default_value = "LLM")]
        reference: String,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Print a stored strategist conversation.
    Transcript {
        /// Run id or path to a transcript file.
        #[arg(long)]
        run: String,
        #[arg(long, default_value = "runs")]
        records: PathBuf,
    },
    /// List benchmark problems or strategist tags.
    List { what: What },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Problems,
    Strategists,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Validation(_) | Error::Config(_) => 2,
        Error::NotFound(_) | Error::Data(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("LMABO_LOG").unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let result = match cli.command {
        Command::Run { manifest, parallel, dry_run } => {
            cmd_run(&manifest, parallel, dry_run, &mut out).map(|s| if s.success() { 0 } else { 1 })
        }
        Command::Analyze { records, reference, out: dir } => cmd_analyze(&records, &reference, &dir, &mut out).map(|_| 0),
        Command::Transcript { run, records } => cmd_transcript(&records, &run, &mut out).map(|_| 0),
        Command::List { what } => {
            let kind = match what {
                What::Problems => ListKind::Problems,
                What::Strategists => ListKind::Strategists,
            };
            cmd_list(kind, &mut out).map(|_| 0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        // A closed stdout (e.g. piping into `head`) is not a failure.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
