use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "marsense", version, about = "Mixed adaptive-random sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sampling mask and acquire measurements.
    Sample(Common),
    /// Recover an image from saved measurements.
    Recover {
        #[command(flatten)]
        common: Common,
        /// Measurements file written by `sample`.
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Score a recovered image, or run and score one acquisition.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Image to compare against `--image` instead of running a pipeline.
        #[arg(long)]
        recovered: Option<PathBuf>,
    },
    /// PSNR/SSIM over a grid of sensing ratios.
    #[command(name = "sweep-eta1")]
    SweepEta1(Common),
    /// PSNR/SSIM over a grid of adaptive ratios at fixed eta1.
    #[command(name = "sweep-eta2")]
    SweepEta2(Common),
    /// Random vs MAR with dilated and closed predicted edges.
    Table1(Common),
    /// MAR at fixed eta1 across adaptive ratios.
    Table2(Common),
    /// Dense Gaussian CS vs random vs MAR on the ball image.
    Fig6(Common),
}

impl Command {
    pub fn common_mut(&mut self) -> &mut Common {
        match self {
            Command::Sample(c)
            | Command::SweepEta1(c)
            | Command::SweepEta2(c)
            | Command::Table1(c)
            | Command::Table2(c)
            | Command::Fig6(c) => c,
            Command::Recover { common, .. } | Command::Eval { common, .. } => common,
        }
    }
}

/// Options shared by every subcommand. Lists are comma-separated.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// `phantom[:n]`, `ball[:n]`, or a PGM/PNG path.
    #[arg(long, value_delimiter = ',')]
    pub image: Vec<String>,
    /// Sensing ratio(s).
    #[arg(long, value_delimiter = ',')]
    pub eta1: Vec<f64>,
    /// Adaptive ratio target(s).
    #[arg(long, value_delimiter = ',', conflicts_with = "edge_budget")]
    pub eta2: Vec<f64>,
    /// Edge pixels before morphology: a fraction of the image if below 1,
    /// otherwise a count.
    #[arg(long)]
    pub edge_budget: Option<f64>,
    /// random, mar, mar_true, trps, standard_cs.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// none, dilate or close.
    #[arg(long)]
    pub morph: Option<String>,
    /// Low-resolution grid spacing.
    #[arg(long)]
    pub factor: Option<usize>,
    /// TV weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Maximum solver iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Flat `key = value` file with defaults for the options above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}
