mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use texmesh_core::ErrorKind;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "texmesh",
    version,
    about = "Point clouds and face labels from textured meshes"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, env = "TEXMESH_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a point cloud from a mesh.
    Sample(SampleArgs),
    /// Draw training subsets or inference tiles from a point cloud.
    Subsets(SubsetsArgs),
    /// Merge tile logits and project them onto mesh faces.
    Backproject(BackprojectArgs),
    /// Print mesh counts and class surface distribution.
    Stats(StatsArgs),
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Texel,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normals {
    Face,
    Interp,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Train,
    Tile,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// Per-face class property name in PLY meshes.
    #[arg(long, default_value = "label")]
    pub label_property: String,
    /// Number of classes, unclassified included.
    #[arg(long, default_value_t = 7)]
    pub class_count: u32,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Texel size multiplier (texel method).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Minimum sample distance in meters (poisson method).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Candidates per disk of half the radius (poisson method).
    #[arg(long)]
    pub oversample: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Normals::Face)]
    pub normals: Normals,
    /// Ground search radius in meters [default: 20].
    #[arg(long)]
    pub elevation_radius: Option<f64>,
    /// Ground grid cell in meters [default: 1].
    #[arg(long)]
    pub elevation_cell: Option<f64>,
    /// Skip the elevation channel.
    #[arg(long)]
    pub no_elevation: bool,
    #[arg(long)]
    pub no_color: bool,
    /// Bilinear instead of nearest texel color lookup.
    #[arg(long)]
    pub bilinear: bool,
    /// Keep one point per cubic cell of this edge (m).
    #[arg(long)]
    pub subsample_grid: Option<f64>,
    #[command(flatten)]
    pub mesh: MeshArgs,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsetsArgs {
    #[arg(long, default_value_t = 10240)]
    pub k: usize,
    /// Number of training draws (train mode).
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Train)]
    pub mode: Mode,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BackprojectArgs {
    pub mesh_path: PathBuf,
    pub cloud: PathBuf,
    pub tiles: PathBuf,
    /// Per-tile logit blocks, concatenated in tile order.
    pub logits: PathBuf,
    pub output: PathBuf,
    /// Write metrics as `name=value` lines here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Evaluate against the mesh's face classes.
    #[arg(long)]
    pub gt: bool,
    #[command(flatten)]
    pub mesh: MeshArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub mesh: MeshArgs,
}

/// Flag combinations rejected before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn run(args: Vec<OsString>) -> Result<()> {
    let cli = Cli::try_parse_from(&args)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("configuring the thread pool")?;
    dispatch(cli.command, &args)
}

fn dispatch(command: Command, argv: &[OsString]) -> Result<()> {
    match command {
        Command::Sample(a) => commands::sample(&a, argv),
        Command::Subsets(a) => commands::subsets(&a, argv),
        Command::Backproject(a) => commands::backproject(&a, argv),
        Command::Stats(a) => commands::stats(&a),
        Command::Replay { manifest } => {
            let recorded = manifest::load_argv(&manifest)?;
            let cli = Cli::try_parse_from(&recorded)
                .with_context(|| format!("{} holds an invalid command", manifest.display()))?;
            if matches!(cli.command, Command::Replay { .. }) {
                return Err(UsageError("a manifest cannot replay another manifest".into()).into());
            }
            dispatch(cli.command, &recorded)
        }
    }
}

/// 2 for invalid input or flags, 3 for I/O failures, 4 for internal errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<texmesh_core::Error>() {
            return match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Io => 3,
                ErrorKind::Internal => 4,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return if clap_err.use_stderr() {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
