mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deform_mvs::eval::SceneKind;

#[derive(Parser, Debug)]
#[command(name = "deform-mvs", version, about = "Multi-view stereo with deformable PatchMatch")]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate depth and normal maps for every view and fuse them.
    Reconstruct(ReconstructArgs),
    /// Render a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Score a point cloud against ground truth.
    Eval(EvalArgs),
    /// Build the region prior of every view and dump it.
    DumpPrior(DumpPriorArgs),
}

/// Options shared by the commands that load a scene and a configuration.
#[derive(Args, Debug, Clone)]
pub struct SceneOpts {
    /// Scene directory holding cameras.txt and images/.
    #[arg(long)]
    pub scene: PathBuf,
    /// TOML configuration; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of monocular depth PFMs (default: <scene>/mono_depth).
    #[arg(long)]
    pub mono_depth_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub scene: SceneOpts,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Write the final per-source visibility weights of every view.
    #[arg(long)]
    pub dump_visibility: bool,
    /// Write the region map of every view.
    #[arg(long)]
    pub dump_regions: bool,
    /// Print the resolved configuration and exit without writing anything.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// One of textured-plane, two-plane-L, textureless-wall, occlusion-box.
    pub kind: SceneKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 480)]
    pub height: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reconstructed cloud (PLY).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Synthetic scene directory whose gt_points.ply is the reference.
    #[arg(long, required_unless_present = "gt", conflicts_with = "gt")]
    pub scene: Option<PathBuf>,
    /// Reference cloud (PLY), instead of --scene.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Distance threshold in scene units (default: 1% of the reference diameter).
    #[arg(long, value_parser = positive_f64)]
    pub tau: Option<f64>,
    /// Also write the report as key = value lines.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DumpPriorArgs {
    #[command(flatten)]
    pub scene: SceneOpts,
    #[arg(long)]
    pub out: PathBuf,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::DumpPrior(a) => commands::dump_prior(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
