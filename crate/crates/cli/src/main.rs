//! `dichotomy`: dichotomy spectra, ratio maps, parameter checks and
//! similarity experiments from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{DiagnoseArgs, RatioArgs, SimilarityArgs, VerifyArgs};
use config::{ConfigArgs, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "dichotomy", version, about = "Dichotomy spectra of linear difference equations")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the dichotomy spectrum; writes spectrum.json and grid.csv.
    Spectrum,
    /// Sample the optimal ratio maps per gap; writes ratios_gap<i>.csv and ratios.json.
    Ratios(RatioArgs),
    /// Check given dichotomy parameters; writes verify.json.
    Verify(VerifyArgs),
    /// Compare the spectrum before and after a change of variables; writes similarity.json.
    Similarity(SimilarityArgs),
    /// Growth bound, unbounded-solutions and unique-projector checks; writes diagnose.json.
    Diagnose(DiagnoseArgs),
    /// Inspect the example corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Subcommand, Debug)]
enum CorpusCommand {
    /// List registered examples.
    List,
    /// Show one example with its reference spectra (uses --params).
    Show { name: String },
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Command::Corpus(c) = &cli.command {
        return match c {
            CorpusCommand::List => Ok(commands::corpus_list()),
            CorpusCommand::Show { name } => commands::corpus_show(name, cli.config.params.as_deref()),
        };
    }
    let cfg = RunConfig::from_args(cli.config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Ratios(a) => commands::ratios(&cfg, a),
        Command::Verify(a) => commands::verify(&cfg, a),
        Command::Similarity(a) => commands::similarity(&cfg, a),
        Command::Diagnose(a) => commands::diagnose(&cfg, a),
        Command::Corpus(_) => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(msg) => {
            println!("{}", msg.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
