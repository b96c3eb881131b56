//! `scrcheck`: builds reusable-component knowledge bases, analyzes contracts
//! against them, sweeps checker parameters, and renders reports.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "scrcheck", version, about = "Detects logic-level misuse of reusable smart-contract components")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command. Each one overrides the matching key of
/// the `--config` document.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Signature weights: `infer`, `default` or `file:PATH`.
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Model backend: `http` or `replay`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Fixture store. Read by the replay backend; the http backend records into it.
    #[arg(long, global = true, value_name = "FILE")]
    pub replay: Option<PathBuf>,
    /// Solidity compiler executable. Without one, `.sol` inputs are read from
    /// their `<file>.ast.json` neighbours.
    #[arg(long, global = true)]
    pub compiler: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible endpoint, e.g. `http://localhost:8000/v1`.
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Cap on in-flight requests to the http backend.
    #[arg(long, global = true)]
    pub max_concurrent: Option<usize>,
    /// More log output; repeat for debug logs.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Builds a knowledge base from a directory of component sources.
    BuildKb {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyzes business contracts and writes a JSON report.
    Analyze {
        /// Contract source (`.sol`) or compiler AST output (`.json`); repeatable.
        #[arg(long, required = true)]
        contract: Vec<PathBuf>,
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Report path; snapshots go to `<out>.snapshots.jsonl`. Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measures detection quality under perturbed weights and thresholds.
    Sweep {
        /// Directory of labeled score sets (`*.json`).
        #[arg(long)]
        fixtures: PathBuf,
        /// Report path; the text table goes to `<out>.txt`. Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Steps on each side of the base value.
        #[arg(long, default_value_t = 5)]
        steps: u32,
    },
    /// Renders an analysis report.
    Report {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::BuildKb { sources, out } => commands::build_kb(&cli.global, &sources, out),
        Command::Analyze { contract, kb, out } => commands::analyze(&cli.global, &contract, kb, out),
        Command::Sweep { fixtures, out, steps } => commands::sweep(&cli.global, &fixtures, out, steps),
        Command::Report { input, format } => commands::report(&input, format == Format::Json),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
