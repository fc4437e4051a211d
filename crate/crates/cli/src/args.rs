use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "game", version, about = "Group-aware matrix completion")]
pub struct Cli {
    /// Worker threads for per-category SVDs (GAME_THREADS overrides this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete a partially observed matrix.
    Complete(CompleteArgs),
    /// Generate a crossed group / hidden subcluster data set.
    Synth(SynthArgs),
    /// Build observation masks (uniform, block-wise, train/test holdout).
    Mask(MaskArgs),
    /// Print per-category penalty levels from the sampling-based rule.
    Calibrate(CalibrateArgs),
    /// Score an estimate against a reference.
    Eval(EvalArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Game,
    Svt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scores {
    UnitNorm,
    Standardized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Rmse,
    Frobenius,
    Subspace,
    Grassmann,
    Ari,
    Nmi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrassmannKind {
    Geodesic,
    Chordal,
}

/// Inputs for the sampling-based penalty rule.
#[derive(Clone, Debug, Args, Serialize)]
pub struct Calibration {
    /// Noise scale; defaults to the standard deviation of the observed entries.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sub-exponential tail scale.
    #[arg(long = "R", default_value_t = 0.0)]
    pub r: f64,
    /// Multiplier on every level.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Dense CSV (blank cells unobserved) or `row,col,value` triplets.
    #[arg(long)]
    pub matrix: PathBuf,
    /// `row,col` list of observed cells; overrides a mask implied by the matrix file.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// `row,category` memberships.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Put rows that belong to no category into a catch-all category.
    #[arg(long)]
    pub allow_uncovered: bool,
    #[arg(long, value_enum, default_value_t = Baseline::Game)]
    pub baseline: Baseline,
    /// Global penalty; when absent the calibration rule sets it and the weights.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated raw category weights, normalized to sum to one.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[command(flatten)]
    pub calibration: Calibration,
    #[arg(long, conflicts_with = "epsilon")]
    pub gamma: Option<f64>,
    /// Target accuracy; sets the step size from the Lipschitz bound.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = game_core::solver::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = game_core::solver::DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    /// Plain proximal gradient steps (no momentum).
    #[arg(long)]
    pub no_accelerate: bool,
    #[arg(long)]
    pub no_restart: bool,
    /// Randomized SVD rank for large categories.
    #[arg(long)]
    pub trunc_rank: Option<usize>,
    /// Entrywise clamp at alpha / sqrt(nm).
    #[arg(long)]
    pub spikiness: Option<f64>,
    /// Write per-category singular values and right singular vectors.
    #[arg(long)]
    pub factors: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    #[arg(long = "num-groups", default_value_t = 10)]
    pub num_groups: usize,
    #[arg(long = "num-subclusters", default_value_t = 5)]
    pub num_subclusters: usize,
    #[arg(long, default_value_t = 3)]
    pub group_rank: usize,
    #[arg(long, default_value_t = 3)]
    pub subcluster_rank: usize,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = Scores::UnitNorm)]
    pub scores: Scores,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Matrix whose shape (and implied observed set, if any) is the starting point.
    #[arg(long, required_unless_present_all = ["rows", "cols"])]
    pub matrix: Option<PathBuf>,
    #[arg(long, conflicts_with = "matrix", requires = "cols")]
    pub rows: Option<usize>,
    #[arg(long, conflicts_with = "matrix", requires = "rows")]
    pub cols: Option<usize>,
    /// Keep each cell independently with this probability.
    #[arg(long, default_value_t = 1.0)]
    pub keep_prob: f64,
    /// Rows subject to extra block masking, e.g. `0-49,60,70-79`.
    #[arg(long, requires = "block_drop")]
    pub block_rows: Option<String>,
    /// Drop probability for observed cells in the block rows.
    #[arg(long, requires = "block_rows")]
    pub block_drop: Option<f64>,
    /// Fraction of the observed cells moved to a test mask.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long)]
    pub allow_uncovered: bool,
    #[command(flatten)]
    pub calibration: Calibration,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference matrix.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    /// Cells scored by `rmse`.
    #[arg(long)]
    pub test_mask: Option<PathBuf>,
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub allow_uncovered: bool,
    /// Comma-separated metric names.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub metrics: Vec<Metric>,
    /// Comma-separated per-category ranks for subspace metrics.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long = "grassmann", value_enum, default_value_t = GrassmannKind::Geodesic)]
    pub grassmann_metric: GrassmannKind,
    /// Reference `row,label` file for `ari` / `nmi`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Predicted labels; when absent, k-means on the estimate rows.
    #[arg(long)]
    pub predicted: Option<PathBuf>,
    #[arg(long, default_value_t = game_core::eval::DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
