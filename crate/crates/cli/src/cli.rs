//! Command-line arguments and the batch commands.

use crate::exit::{mesh_failure, Failure, Status};
use clap::{Args, Parser, Subcommand};
use rigforge::deform::{deform, DeformOptions};
use rigforge::distortion::DetectorConfig;
use rigforge::formats::{PoseFile, ReportFile, RigFile};
use rigforge::mesh::{load_mesh, write_obj, Mesh};
use rigforge::rig::{build_rig, RigConfig};
use rigforge::skeleton::{SkeletonOptions, DEFAULT_ANGLE_TOLERANCE_DEG};
use rigforge::skinning::DEFAULT_ALPHA;
use rigforge::slicer::{SliceConfig, SliceMode};
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

/// Environment variable capping worker threads; 0 or unset means one per
/// core.
pub const THREADS_ENV: &str = "RIGFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rigforge", version, about = "Skeleton rigging and deformation of closed triangle meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a skeleton from a closed mesh and bind its vertices.
    Rig(RigArgs),
    /// Deform a rigged mesh towards a pose.
    Deform(DeformArgs),
    /// Summarize a rig file.
    Inspect(InspectArgs),
    /// Run the local session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RigArgs {
    /// Input mesh (OBJ).
    pub mesh: PathBuf,
    /// Output rig file.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = SliceConfig::default().slice_count)]
    pub slices: usize,
    /// Rays cast per slice point.
    #[arg(long, default_value_t = SliceConfig::default().ray_count)]
    pub rays: usize,
    /// Slicing mode: nearest, all or parity.
    #[arg(long, default_value = "parity")]
    pub mode: SliceMode,
    /// Decimation tolerance in degrees.
    #[arg(long = "angle-tol", default_value_t = DEFAULT_ANGLE_TOLERANCE_DEG)]
    pub angle_tol: f64,
    /// Skin weight falloff exponent.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

impl RigArgs {
    pub fn config(&self) -> RigConfig {
        RigConfig {
            slice: SliceConfig {
                slice_count: self.slices,
                ray_count: self.rays,
                mode: self.mode,
            },
            skeleton: SkeletonOptions {
                angle_tolerance: self.angle_tol,
                ..SkeletonOptions::default()
            },
            alpha: self.alpha,
            ..RigConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DeformArgs {
    /// The mesh the rig was built from.
    pub mesh: PathBuf,
    pub rig: PathBuf,
    /// Pose file with joint targets.
    pub pose: PathBuf,
    /// Output mesh; the report is written beside it.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Large-angle threshold in degrees.
    #[arg(long, default_value_t = DetectorConfig::default().angle_threshold.to_degrees())]
    pub threshold: f64,
    /// Largest rotation per decomposed step, in degrees.
    #[arg(long, default_value_t = DetectorConfig::default().max_step_angle.to_degrees())]
    pub step: f64,
    /// Apply the pose in a single pass even when joints are flagged.
    #[arg(long)]
    pub no_decompose: bool,
}

impl DeformArgs {
    pub fn options(&self) -> DeformOptions {
        DeformOptions {
            detector: DetectorConfig {
                angle_threshold: self.threshold.to_radians(),
                max_step_angle: self.step.to_radians(),
                ..DetectorConfig::default()
            },
            decompose: !self.no_decompose,
            ..DeformOptions::default()
        }
    }

    /// Where the report for `output` goes.
    pub fn report_path(&self) -> PathBuf {
        report_path(&self.output)
    }
}

/// `dir/name.obj` gives `dir/name.report.json`.
pub fn report_path(mesh_path: &Path) -> PathBuf {
    mesh_path.with_extension("report.json")
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub rig: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 7474)]
    pub port: u16,
}

/// Sizes the global worker pool from the value of [`THREADS_ENV`].
pub fn configure_threads(value: Option<&str>) -> Result<(), Failure> {
    let threads = match value.map(str::trim) {
        None | Some("") => 0,
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| Failure::new(Status::Usage, format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new(Status::Usage, format!("cannot size the thread pool: {e}")))
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<(), Failure> {
    match cli.command {
        Command::Rig(args) => cmd_rig(&args, out),
        Command::Deform(args) => cmd_deform(&args, out),
        Command::Inspect(args) => cmd_inspect(&args, out),
        Command::Serve(args) => crate::service::run_blocking(args.host, args.port, out),
    }
}

fn read_mesh(path: &Path) -> Result<Mesh, Failure> {
    load_mesh(path).map_err(|e| mesh_failure(path, e))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(Status::Parse, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::new(Status::WriteFailure, format!("{}: {e}", path.display())))
}

fn say(out: &mut impl Write, line: std::fmt::Arguments) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure::new(Status::WriteFailure, format!("stdout: {e}")))
}

pub fn cmd_rig(args: &RigArgs, out: &mut impl Write) -> Result<(), Failure> {
    let config = args.config();
    config
        .slice
        .validate()
        .map_err(|e| Failure::new(Status::Usage, e.to_string()))?;
    let mesh = read_mesh(&args.mesh)?;
    let rig = build_rig(&mesh, &config)?;
    let file = RigFile::new(&mesh, rig, config);
    write_file(&args.output, &file.to_json())?;
    let s = &file.rig.skeleton;
    say(
        out,
        format_args!(
            "joints {}, bones {}, chains {}, slice centers {}",
            s.joint_count(),
            s.bones.len(),
            file.rig.chain_count,
            file.rig.center_count
        ),
    )
}

pub fn cmd_deform(args: &DeformArgs, out: &mut impl Write) -> Result<(), Failure> {
    let options = args.options();
    options.detector.validate()?;
    let mesh = read_mesh(&args.mesh)?;
    let rig = RigFile::from_json(&read_text(&args.rig)?)?;
    rig.verify_mesh(&mesh)?;
    let pose = PoseFile::from_json(&read_text(&args.pose)?)?;
    let skeleton = &rig.rig.skeleton;
    let handles = pose.to_handles(skeleton.joint_count())?;
    let result = deform(&mesh, skeleton, &rig.rig.binding, &handles, &options)?;
    let report = ReportFile::from_deformation(&result);
    write_file(&args.output, &write_obj(&result.mesh))?;
    write_file(&args.report_path(), &report.to_json())?;
    say(
        out,
        format_args!(
            "distortion {:.6}, flagged joints {:?}, steps {}",
            report.global_distortion, report.flagged_joints, report.steps_used
        ),
    )
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut impl Write) -> Result<(), Failure> {
    let file = RigFile::from_json(&read_text(&args.rig)?)?;
    let s = &file.rig.skeleton;
    let b = &file.rig.binding;
    say(out, format_args!("format_version {}", file.format_version))?;
    say(
        out,
        format_args!(
            "mesh {} ({} vertices, {} faces)",
            file.mesh_checksum, file.vertex_count, file.face_count
        ),
    )?;
    say(
        out,
        format_args!(
            "joints {}, bones {}, root {}, chains {}",
            s.joint_count(),
            s.bones.len(),
            s.root,
            file.rig.chain_count
        ),
    )?;
    for (i, (&[a, c], length)) in s.bones.iter().zip(&s.bone_lengths).enumerate() {
        say(out, format_args!("bone {i} ({a}-{c}) length {length:.6}"))?;
    }
    let counts: Vec<usize> = b.weights.iter().map(Vec::len).collect();
    let sums: Vec<f64> = b.weights.iter().map(|w| w.iter().map(|(_, x)| x).sum()).collect();
    let n = counts.len().max(1) as f64;
    say(
        out,
        format_args!(
            "influences per vertex: min {}, max {}, mean {:.4}",
            counts.iter().min().unwrap_or(&0),
            counts.iter().max().unwrap_or(&0),
            counts.iter().sum::<usize>() as f64 / n
        ),
    )?;
    say(
        out,
        format_args!(
            "weight sums: min {:.12}, max {:.12}",
            sums.iter().cloned().fold(f64::INFINITY, f64::min),
            sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        ),
    )
}
