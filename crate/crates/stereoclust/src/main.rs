use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use stereoclust::commands;
use stereoclust::config::ExperimentConfig;

/// Stereo utterance clustering: channel-combination features, per-speaker
/// GMMs, and the paired evaluation harness.
#[derive(Parser)]
#[command(name = "stereoclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cut annotated utterances into one-second stereo segments and write
    /// the inventory.
    Segment(Common),
    /// Produce one embedding file per requested combination method.
    Embed(Common),
    /// Train per-speaker GMMs over repeated splits and write the reports.
    Evaluate(Common),
    /// segment + embed + evaluate in one go.
    RunAll(Common),
    /// Generate the seeded synthetic stereo corpus.
    SynthCorpus(Common),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&ExperimentConfig) -> Result<()>) = match &cli.command {
        Command::Segment(c) => (c, commands::cmd_segment),
        Command::Embed(c) => (c, commands::cmd_embed),
        Command::Evaluate(c) => (c, commands::cmd_evaluate),
        Command::RunAll(c) => (c, commands::cmd_run_all),
        Command::SynthCorpus(c) => (c, commands::cmd_synth_corpus),
    };
    let config = ExperimentConfig::load(&common.config, common.out.clone(), common.seed)?;
    run(&config)
}
