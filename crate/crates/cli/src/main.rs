mod commands;
mod formats;
mod manifest;
mod svg;
mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "patchlens",
    version,
    about = "Patch-PCA energy profiles of filter banks and exact gradient-descent dynamics of single-hidden-layer linear CNNs"
)]
pub struct Cli {
    /// Seed for all randomized operations of the subcommand
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Thread count for data-parallel kernels (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Keep CIFAR-10 pixels as 0–255 doubles instead of scaling to [0,1]
    #[arg(long, global = true)]
    pub no_scale: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a patch-PCA basis from CIFAR-10 images or a dataset CSV
    Pca(PcaArgs),
    /// Energy profile of a filter bank against a PCA basis
    Profile(ProfileArgs),
    /// Pearson correlation between two energy-profile CSVs
    Compare(CompareArgs),
    /// Input-vs-mapped patch distances under a filter bank
    Distances(DistancesArgs),
    /// Average-patch matrix (with labels) from CIFAR-10 images
    AvgPatch(AvgPatchArgs),
    /// Brute-force gradient-descent training of a width-M linear CNN
    Simulate(SimulateArgs),
    /// Closed-form solution and predicted energy profile
    Predict(PredictArgs),
    /// Predicted true-vs-random label profile correlation over a mean-shift sweep
    Sensitivity(SensitivityArgs),
    /// Synthetic balanced two-class dataset with exactly equal class means
    Synth(SynthArgs),
    /// Run the built-in invariant suite (exit 3 on any failure)
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
pub struct PcaArgs {
    /// CIFAR-10 batch file or directory (default: $PATCHLENS_DATA)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Average-patch dataset CSV (alternative to --data)
    #[arg(long, conflicts_with = "data")]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Rows the PCA is fit on: all_patches or avg_patch_rows
    #[arg(long, default_value = "all_patches")]
    pub population: String,
    /// Skip mean subtraction before the eigendecomposition
    #[arg(long)]
    pub uncentered: bool,
    /// Use only the first N images
    #[arg(long)]
    pub limit: Option<usize>,
    /// Output basis JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct ProfileArgs {
    /// Filter-bank CSV
    #[arg(long)]
    pub filters: PathBuf,
    /// PCA basis JSON
    #[arg(long)]
    pub pca: PathBuf,
    /// rms or mean_square
    #[arg(long, default_value = "rms")]
    pub variant: String,
    /// Subtract the profile of this bank (e.g. the initialization)
    #[arg(long)]
    pub subtract_init: Option<PathBuf>,
    /// Output profile CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG line plot
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CompareArgs {
    /// First profile CSV
    #[arg(long)]
    pub a: PathBuf,
    /// Second profile CSV
    #[arg(long)]
    pub b: PathBuf,
    /// Variant the first profile was computed with
    #[arg(long, default_value = "rms")]
    pub variant_a: String,
    /// Variant the second profile was computed with
    #[arg(long, default_value = "rms")]
    pub variant_b: String,
    /// Optional JSON report
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct DistancesArgs {
    /// CIFAR-10 batch file or directory (default: $PATCHLENS_DATA)
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub filters: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Number of sampled patch pairs
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Output pair-distance CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG scatter plot
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct AvgPatchArgs {
    /// CIFAR-10 batch file or directory (default: $PATCHLENS_DATA)
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub patch_size: usize,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Restrict to a binary subset: this class becomes label 0
    #[arg(long, requires = "class_b")]
    pub class_a: Option<usize>,
    /// Second class of the binary subset, label 1
    #[arg(long, requires = "class_a")]
    pub class_b: Option<usize>,
    /// Output dataset CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    /// Average-patch dataset CSV
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub width: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Label source: true, bernoulli, or expectation
    #[arg(long, default_value = "true")]
    pub labels: String,
    /// unnormalized or one_over_n
    #[arg(long, default_value = "unnormalized")]
    pub loss_scale: String,
    /// Record a snapshot every this many iterations
    #[arg(long, default_value_t = 10)]
    pub snap_every: usize,
    /// Output trajectory CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a filter-bank CSV per snapshot: <prefix>_iter<t>.csv
    #[arg(long)]
    pub filters_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct PredictArgs {
    /// Average-patch dataset CSV
    #[arg(long)]
    pub dataset: PathBuf,
    /// PCA basis JSON (default: fit avg_patch_rows centered PCA on the dataset)
    #[arg(long)]
    pub pca: Option<PathBuf>,
    /// exact, paper, or ridge
    #[arg(long, default_value = "exact")]
    pub method: String,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 100)]
    pub t: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Label source: true, bernoulli, or expectation
    #[arg(long, default_value = "true")]
    pub labels: String,
    /// Output prediction JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SensitivityArgs {
    /// Average-patch dataset CSV
    #[arg(long)]
    pub dataset: PathBuf,
    /// PCA basis JSON (default: fit avg_patch_rows centered PCA on the dataset)
    #[arg(long)]
    pub pca: Option<PathBuf>,
    /// PCA direction index the class-1 mean is shifted along
    #[arg(long, default_value_t = 0)]
    pub dir: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 100)]
    pub t: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_max: f64,
    /// Number of grid intervals between 0 and eps-max
    #[arg(long, default_value_t = 10)]
    pub eps_steps: usize,
    /// Output curve CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG line plot
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 27)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Output dataset CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct VerifyArgs {
    /// Smaller problem sizes for a faster run
    #[arg(long)]
    pub quick: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized, --threads ignored");
        }
    }
    match commands::run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
