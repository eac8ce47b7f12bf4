use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chaidlr_cli::config::PipelineConfig;
use chaidlr_cli::stages::{self, Context};
use chaidlr_cli::exit_status;

/// Hybrid response modeling: CHAID interaction detection feeding stepwise
/// logistic regression.
#[derive(Parser)]
#[command(name = "chaidlr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for the scan and candidate fits (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config seed (split and synthetic generation).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: scan, fit both models, evaluate, profile.
    Run(CommonArgs),
    /// Preprocess and scan all predictor pairs for interactions.
    Scan(CommonArgs),
    /// Stepwise-fit the hybrid and pure logistic models.
    Fit(CommonArgs),
    /// Sweep model sizes and write the comparison tables.
    Evaluate(CommonArgs),
    /// Write response-rate segment tables for selected interactions.
    Profile(CommonArgs),
    /// Generate a synthetic dataset from the config's synth spec.
    Synth(CommonArgs),
    /// Time the scan-based pipeline against the complete stepwise search.
    Bench(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Run(a)
            | Command::Scan(a)
            | Command::Fit(a)
            | Command::Evaluate(a)
            | Command::Profile(a)
            | Command::Synth(a)
            | Command::Bench(a) => a,
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let args = cli.command.common();
    let config = PipelineConfig::load(&args.config)?
        .with_overrides(args.seed, args.out.clone());
    let ctx = Context::new(config, args.workers);
    match &cli.command {
        Command::Run(_) => stages::cmd_run(&ctx),
        Command::Scan(_) => stages::cmd_scan(&ctx),
        Command::Fit(_) => stages::cmd_fit(&ctx),
        Command::Evaluate(_) => stages::cmd_evaluate(&ctx),
        Command::Profile(_) => stages::cmd_profile(&ctx),
        Command::Synth(_) => stages::cmd_synth(&ctx).map(|_| ()),
        Command::Bench(_) => stages::cmd_bench(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err) as u8)
        }
    }
}
