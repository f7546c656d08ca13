use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use rankattack::config::{apply_overrides, Config};
use rankattack::pipeline;

/// Multi-granular attacks against a black-box ranker.
#[derive(Parser)]
#[command(name = "rankattack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, judgements, query splits and tables.
    GenCorpus(Args),
    /// Train the black-box target ranker.
    TrainTarget(Args),
    /// Distill a surrogate from the target's rankings.
    DistillSurrogate(Args),
    /// Train the indicator and aggregator policies.
    TrainAttacker(Args),
    /// Attack evaluation targets and write an outcomes file.
    Attack(Args),
    /// Compute metrics and spam screening for an outcomes file.
    Evaluate(Args),
    /// Render text tables for evaluated reports.
    Report(Args),
    /// Print the bundled default configuration.
    DefaultConfig,
}

#[derive(clap::Args)]
struct Args {
    /// Config file; the bundled defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `--key value` overrides applied after the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

impl Args {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => Config::default_config(),
        };
        apply_overrides(&mut cfg, &self.overrides)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<String> {
    let (args, stage): (&Args, fn(&Config) -> rankattack::Result<String>) = match &cli.command {
        Command::GenCorpus(a) => (a, pipeline::gen_corpus),
        Command::TrainTarget(a) => (a, pipeline::train_target),
        Command::DistillSurrogate(a) => (a, pipeline::distill),
        Command::TrainAttacker(a) => (a, pipeline::train_attacker),
        Command::Attack(a) => (a, pipeline::attack),
        Command::Evaluate(a) => (a, pipeline::evaluate),
        Command::Report(a) => (a, pipeline::report),
        Command::DefaultConfig => return Ok(Config::default_config().to_text()),
    };
    Ok(stage(&args.load()?)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
