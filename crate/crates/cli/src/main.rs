//! `mwarp`: registration and statistics of manifold-valued trajectories.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mwarp_core::analysis::Metric;
use mwarp_core::reference::RefPoint;
use mwarp_core::ManifoldKind;

#[derive(Debug, Parser)]
#[command(name = "mwarp", version, about = "Time-warping invariant analysis of trajectories on manifolds")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Geometry: s2, se2 or qsphere.
    #[arg(long, global = true)]
    pub manifold: Option<ManifoldKind>,
    /// Samples per trajectory; inputs of another length are resampled.
    #[arg(long = "grid", value_name = "T", global = true)]
    pub grid: Option<usize>,
    /// Reference point: default, start-mean or fixed:<coords>.
    #[arg(long, value_name = "REF", global = true, default_value = "default")]
    pub ref_point: RefPoint,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file, or output directory for commands writing several files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Points per contour on the q-sphere.
    #[arg(long, global = true, default_value_t = 64)]
    pub samples: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert track, HURDAT2, pose or contour files into a trajectory container.
    Ingest(IngestArgs),
    /// Align the second trajectory to the first.
    Register(RegisterArgs),
    /// Pairwise distance matrix as CSV.
    Distmat(DistmatArgs),
    /// Karcher mean with aligned and unaligned variance.
    Mean(MeanArgs),
    /// Gaussian trajectory model.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Leave-one-out nearest-neighbor classification.
    Classify(ClassifyArgs),
    /// Average-linkage dendrogram as JSON.
    Cluster(MatrixInput),
    /// Classical multidimensional scaling coordinates as CSV.
    Mds(MdsArgs),
    /// Synthetic datasets and files.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Geo,
    Hurdat2,
    Se2,
    Contours,
    Container,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Parameterize by arc length instead of observation time.
    #[arg(long)]
    pub arc_length: bool,
    /// Keep contour frames in their original orientation.
    #[arg(long)]
    pub no_rotation_align: bool,
    /// HURDAT2 only: keep storms whose first fix is on or after this date.
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub after: Option<chrono::NaiveDate>,
    /// HURDAT2 only: minimum number of six-hourly fixes.
    #[arg(long, default_value_t = 20)]
    pub min_fixes: usize,
    /// HURDAT2 only: number of storms kept.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Trajectory id inside the first container.
    #[arg(long)]
    pub first_id: Option<String>,
    /// Trajectory id inside the second container.
    #[arg(long)]
    pub second_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct DistmatArgs {
    pub dataset: PathBuf,
    #[arg(long, default_value = "ds")]
    pub metric: Metric,
}

#[derive(Debug, Args)]
pub struct MeanArgs {
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Fit a model to a dataset.
    Fit(ModelFitArgs),
    /// Draw trajectories from a model.
    Sample(ModelSampleArgs),
    /// Monte-Carlo p-values of a dataset under a model.
    Pvalue(ModelPvalueArgs),
}

#[derive(Debug, Args)]
pub struct ModelFitArgs {
    pub dataset: PathBuf,
    /// Number of model times.
    #[arg(long, default_value_t = 20)]
    pub times: usize,
    /// Fit to the unaligned cross-sections.
    #[arg(long)]
    pub no_align: bool,
}

#[derive(Debug, Args)]
pub struct ModelSampleArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct ModelPvalueArgs {
    pub model: PathBuf,
    pub dataset: PathBuf,
    /// Number of model draws.
    #[arg(long, default_value_t = 10_000)]
    pub bootstrap: usize,
}

/// A distance matrix CSV, or a trajectory container to compute one from.
#[derive(Debug, Args)]
pub struct MatrixInput {
    pub input: PathBuf,
    #[arg(long, default_value = "ds")]
    pub metric: Metric,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub matrix: MatrixInput,
    /// Container holding the labels when the input is a matrix.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    #[command(flatten)]
    pub matrix: MatrixInput,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Container holding the labels when the input is a matrix.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Warped copies of one smooth S² trajectory.
    WarpedCopies,
    /// Right, straight and left vehicle motions on SE(2).
    Vehicles,
    /// Labelled contour sequences (JSON).
    Contours,
    /// Migration-like geographic tracks (CSV).
    Migration,
    /// Synthetic HURDAT2 text.
    Hurdat2,
    /// A single warp (CSV).
    Warp,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub kind: SimKind,
    /// Number of trajectories, sequences, tracks or storms.
    #[arg(long)]
    pub count: Option<usize>,
    /// Warp kind for `warp`: fast-slow, slow-fast or stop-and-go.
    #[arg(long, default_value = "stop-and-go")]
    pub warp_kind: mwarp_core::synth::WarpKind,
    /// Warp strength in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub strength: f64,
    /// First year of synthetic HURDAT2 storms.
    #[arg(long, default_value_t = 2003)]
    pub first_year: i32,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwarp: error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code())
        }
    }
}
