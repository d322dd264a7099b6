mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Failure;

/// Nonnegativity-constrained sparse autoencoder experiments.
#[derive(Parser, Debug)]
#[command(name = "ncsae", version, about)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Greedy layer-wise pretraining of the stacked autoencoders.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        /// Overrides every phase's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains a softmax head on pretrained features, then fine-tunes the
    /// whole network.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `pretrain`.
        #[arg(long)]
        pretrained: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classification accuracy of a fine-tuned network.
    Eval {
        /// Network parameter file.
        #[arg(long)]
        model: PathBuf,
        /// Config naming the dataset.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Receptive-field images, weight histograms or penalty curves.
    Export {
        #[arg(value_enum)]
        what: ExportKind,
        /// Parameter file (rf and hist).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Encoder layer, 0-based.
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Supplies κ for decay curves.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Tile size as ROWSxCOLS; inferred when omitted.
        #[arg(long)]
        tile: Option<String>,
        #[arg(long)]
        grid_cols: Option<usize>,
        /// Scale weights by the largest magnitude before rendering.
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        hi: f64,
        /// Sample points for decay curves.
        #[arg(long, default_value_t = 201)]
        steps: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExportKind {
    Rf,
    Hist,
    Decay,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Pretrain { config, seed, out } => commands::pretrain(&config, seed, out.as_deref()),
        Command::Finetune {
            config,
            pretrained,
            seed,
            out,
        } => commands::finetune(&config, &pretrained, seed, out.as_deref()),
        Command::Eval {
            model,
            config,
            split,
            seed,
            out,
        } => commands::eval(&model, &config, split, seed, out.as_deref()),
        Command::Export {
            what,
            model,
            layer,
            config,
            seed: _,
            out,
            tile,
            grid_cols,
            normalize,
            bins,
            lo,
            hi,
            steps,
        } => commands::export(commands::ExportArgs {
            what,
            model,
            layer,
            config,
            out,
            tile,
            grid_cols,
            normalize,
            bins,
            lo,
            hi,
            steps,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
