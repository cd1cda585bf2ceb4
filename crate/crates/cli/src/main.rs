mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use artictwin_core::eval::MatchPolicy;

#[derive(Parser)]
#[command(name = "artictwin", version, about = "Articulated-object URDF reconstruction and evaluation toolkit")]
struct Cli {
    /// Print machine-readable JSON instead of a text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress stdout; files and exit codes are unaffected.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize a directory of URDF objects (root → base, flat tree, one mesh per link).
    Regularize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Objects with this many or more articulated parts are skipped.
        #[arg(long, default_value_t = 8)]
        max_parts: usize,
    },
    /// Turn an articulation JSON prediction into a URDF file.
    Convert {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        mesh_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_missing_mesh: bool,
        /// Fill missing revolute limits with [0, π/2].
        #[arg(long)]
        repair: bool,
        #[arg(long)]
        require_explicit_base: bool,
        #[arg(long, default_value = "object")]
        name: String,
    },
    /// Mesh each part mask of a point cloud into `<out-dir>/<part>.obj`.
    Mesh {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = MeshKind::ConvexHull)]
        method: MeshKind,
        /// Circumradius bound for the alpha method.
        #[arg(long, required_if_eq("method", "alpha"))]
        alpha_radius: Option<f64>,
    },
    /// Camera viewpoints on a sphere or an equatorial ring.
    SampleViews {
        #[arg(long, value_enum)]
        mode: ViewMode,
        #[arg(short = 'n', long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        elevation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint type/axis/origin errors of a prediction against a ground-truth URDF.
    EvalJoints {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "hungarian-origin")]
        policy: MatchPolicy,
        #[arg(long)]
        axis_line: bool,
        #[arg(long)]
        sign_invariant: bool,
        #[command(flatten)]
        success: SuccessArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// mIoU and count match of predicted part masks.
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Cloud the mask indices refer to (xyzrgb text or ASCII PLY).
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Physical-executability check of a URDF (or a JSON prediction).
    Execute {
        #[arg(long)]
        urdf: PathBuf,
        #[arg(long, default_value_t = 11)]
        samples: usize,
        #[arg(long, default_value_t = 10.0)]
        bound: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode part masks from point features and [SEG] token states.
    Segment {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        tokens: PathBuf,
        /// Overrides the threshold stored with the parameters.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded end-to-end evaluation over a dataset directory.
    Pipeline(PipelineArgs),
    /// Aggregate per-object pipeline results into a report.
    Report {
        /// Pipeline output directory (or its `objects/` sub-directory).
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        splits: Option<PathBuf>,
        #[command(flatten)]
        success: SuccessArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in five-object synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SuccessArgs {
    /// Axis error (rad) below which a matched joint counts as successful.
    #[arg(long, requires = "origin_tol")]
    axis_tol: Option<f64>,
    /// Origin error (m) below which a matched joint counts as successful.
    #[arg(long, requires = "axis_tol")]
    origin_tol: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    splits: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    axis_tilt: Option<f64>,
    #[arg(long)]
    origin_sigma: Option<f64>,
    #[arg(long)]
    type_flip: Option<f64>,
    #[arg(long)]
    drop_part: Option<f64>,
    #[arg(long)]
    points_per_link: Option<usize>,
    #[arg(long)]
    feature_sigma: Option<f64>,
    #[arg(long)]
    policy: Option<MatchPolicy>,
    #[arg(long)]
    axis_line: bool,
    #[arg(long)]
    sign_invariant: bool,
    #[arg(long)]
    max_parts: Option<usize>,
    #[arg(long)]
    chamfer_samples: Option<usize>,
    #[command(flatten)]
    success: SuccessArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshKind {
    ConvexHull,
    Alpha,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewMode {
    Sphere,
    Equator,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    commands::init_thread_pool();
    let out = commands::Output {
        json: cli.json,
        quiet: cli.quiet,
    };
    match commands::run(cli.command, &out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
