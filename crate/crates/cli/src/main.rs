use anyhow::Result;
use clap::{Parser, Subcommand};

use dehaze_cli::commands::{
    cmd_dehaze, cmd_eval, cmd_synth, cmd_train, cmd_verify, DehazeArgs, EvalArgs, SynthArgs,
    TrainArgs, VerifyArgs,
};

/// Single-image dehazing: synthesize haze from RGB-D data, train the
/// cascaded transmission/airlight network, restore images, and evaluate.
#[derive(Parser)]
#[command(name = "dehaze", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a hazy training/validation dataset from RGB-D images.
    Synth(SynthArgs),
    /// Train the cascaded network on a synthesized dataset.
    Train(TrainArgs),
    /// Restore a single hazy image with trained weights.
    Dehaze(DehazeArgs),
    /// Compare predicted images against ground truth and write a report.
    Eval(EvalArgs),
    /// Run the self-verification suite (oracles and gradient checks).
    Verify(VerifyArgs),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&args).map(|_| ()),
        Command::Dehaze(args) => cmd_dehaze(&args).map(|_| ()),
        Command::Eval(args) => cmd_eval(&args).map(|_| ()),
        Command::Verify(args) => cmd_verify(&args),
    }
}
