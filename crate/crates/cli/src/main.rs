use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;
mod pgm;

use commands::RenderKind;
use config::PipelineConfig;
use error::CliError;

/// EEG connectivity features and CNN valence classification.
#[derive(Parser)]
#[command(name = "eegconn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON pipeline config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `synth.seed` for synth, `train.seed` and `fold_seed` for train and cv.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the planted-coupling corpus as EEGB files.
    Synth(RunArgs),
    /// Segment recordings and write feature tensors (FTNS).
    Features(RunArgs),
    /// Train one model on all feature tensors.
    Train(RunArgs),
    /// Five-fold leave-one-cluster-out cross-validation.
    Cv(RunArgs),
    /// Render a matrix, topography or kernel grid as a PGM image.
    Render {
        /// FTNS or CSV for matrix/topo; CNNM or weight CSV for weights.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: RenderKind,
        /// Record index inside an FTNS file.
        #[arg(long, default_value_t = 0)]
        record: usize,
        /// Band (tensor channel) inside an FTNS record.
        #[arg(long, default_value_t = 0)]
        band: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the first convolution's kernels from a checkpoint as CSV and PGM.
    DumpWeights {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn resolve(args: &RunArgs, seed_target: fn(&mut PipelineConfig, u64)) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        seed_target(&mut cfg, seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(&resolve(&a, |c, s| c.synth.seed = s)?),
        Command::Features(a) => commands::features(&resolve(&a, |_, _| {})?),
        Command::Train(a) => commands::train_cmd(&resolve(&a, |c, s| c.train.seed = s)?),
        Command::Cv(a) => commands::cv(&resolve(&a, |c, s| {
            c.train.seed = s;
            c.fold_seed = s;
        })?),
        Command::Render {
            input,
            kind,
            record,
            band,
            out,
        } => commands::render(&input, kind, record, band, &out).map(|_| ()),
        Command::DumpWeights { input, out } => commands::dump_weights(&input, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eegconn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
