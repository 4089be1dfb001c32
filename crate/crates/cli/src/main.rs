//! `papr`: proposal-driven patch pruning from the command line.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage/validation error.
//! Logs go to standard error; data goes to files or standard output.

mod commands;
mod common;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::*;

#[derive(Parser)]
#[command(
    name = "papr",
    about = "One-step patch pruning with lightweight conv proposal networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score patches of one image and emit a heatmap plus a prune mask.
    Psm {
        /// Input image (.ppm) or tensor file (.ptsr, [3,H,W]).
        input: PathBuf,
        /// Proposal network config file.
        #[arg(long)]
        proposal: PathBuf,
        /// Target patch grid, `h,w`.
        #[arg(long)]
        grid: String,
        /// Patch keep ratio in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        z: f64,
        /// Seed for random weight initialization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight directory (manifest.txt plus tensor files).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Percentile clip `lo,hi` applied before heatmap normalization.
        #[arg(long)]
        clip_percentiles: Option<String>,
        /// Integer nearest-neighbor upscale for the heatmap.
        #[arg(long, default_value_t = 1)]
        heatmap_scale: usize,
    },
    /// Run the pruned classification pipeline end to end on one image.
    E2e {
        /// Input image (.ppm) or tensor file (.ptsr, [3,H,W]).
        input: PathBuf,
        /// Proposal network config file.
        #[arg(long)]
        proposal: PathBuf,
        /// Backbone config file (token-vit family).
        #[arg(long)]
        backbone: PathBuf,
        /// Patch keep ratio in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        z: f64,
        /// Seed for random weight initialization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight directory (manifest.txt plus tensor files).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Skip pruning and run the dense baseline.
        #[arg(long)]
        no_prune: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print (and optionally save) the analytical cost ledger over a
    /// sweep of keep ratios.
    Flops {
        /// Backbone config file (any family).
        #[arg(long)]
        backbone: PathBuf,
        /// Comma-separated keep ratios, e.g. `1.0,0.5,0.3`.
        #[arg(long, default_value = "1.0")]
        z: String,
        /// Output directory for per-ratio report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score spatio-temporal patches of a frame directory.
    Video {
        /// Directory of .ppm frames, sorted by file name.
        frames: PathBuf,
        /// Proposal network config file.
        #[arg(long)]
        proposal: PathBuf,
        /// Backbone config file (token-vit with input_t/tubelet).
        #[arg(long)]
        backbone: PathBuf,
        /// Patch keep ratio in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        z: f64,
        /// Seed for random weight initialization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight directory (manifest.txt plus tensor files).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Integer nearest-neighbor upscale for per-frame heatmaps.
        #[arg(long, default_value_t = 1)]
        heatmap_scale: usize,
    },
    /// Write a deterministic synthetic test image.
    GenImage {
        /// Output .ppm path.
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Psm {
            input,
            proposal,
            grid,
            z,
            seed,
            weights,
            out,
            clip_percentiles,
            heatmap_scale,
        } => cmd_psm(&PsmArgs {
            input,
            proposal,
            grid,
            z,
            seed,
            weights,
            out,
            clip_percentiles,
            heatmap_scale,
        }),
        Command::E2e {
            input,
            proposal,
            backbone,
            z,
            seed,
            weights,
            no_prune,
            out,
        } => cmd_e2e(&E2eArgs {
            input,
            proposal,
            backbone,
            z,
            seed,
            weights,
            no_prune,
            out,
        }),
        Command::Flops { backbone, z, out } => cmd_flops(&FlopsArgs {
            backbone,
            z_list: z,
            out,
        }),
        Command::Video {
            frames,
            proposal,
            backbone,
            z,
            seed,
            weights,
            out,
            heatmap_scale,
        } => cmd_video(&VideoArgs {
            frames,
            proposal,
            backbone,
            z,
            seed,
            weights,
            out,
            heatmap_scale,
        }),
        Command::GenImage {
            out,
            width,
            height,
            seed,
        } => cmd_gen_image(&GenImageArgs {
            out,
            width,
            height,
            seed,
        }),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
