// SPDX-License-Identifier: Apache-2.0

//! Command-line entry point. Exit codes: 0 success, 1 runtime failure, 2 usage
//! error. `--threads N` (or `FLOORLOC_THREADS`) caps the worker pool.

mod commands;
mod run_config;

pub use run_config::{RunConfig, RunMap, RunObserver, RunTrajectory};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::floorplan::GridFormat;
use crate::synth::{Calibration, CorruptionMode, FloorplanStyle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "floorloc", version, about = "Floorplan localization with a histogram Bayes filter")]
pub struct Cli {
    /// Worker threads; defaults to the available cores
    #[arg(long, global = true, env = "FLOORLOC_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the floorplan depths seen from a pose as JSON
    Raycast(RaycastArgs),
    /// Generate a procedural floorplan
    GenMap(GenMapArgs),
    /// Generate a trajectory and optionally its observations
    GenTraj(GenTrajArgs),
    /// Run the filter over one sequence and write the per-frame log
    Localize(LocalizeArgs),
    /// Run a benchmark configuration and write its report
    Bench(BenchArgs),
    /// Write the gravity-alignment validity mask of a tilted camera
    GravityMask(GravityMaskArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    /// Map file: json-grid, or pgm-ascii with a sidecar or --map-resolution/--map-origin
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Map format (json-grid or pgm-ascii); guessed from the extension by default
    #[arg(long, value_parser = parse_format)]
    pub map_format: Option<GridFormat>,
    /// Resolution of a pgm map in meters per cell
    #[arg(long)]
    pub map_resolution: Option<f64>,
    /// Origin of a pgm map as `x,y`
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub map_origin: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct CameraArgs {
    /// Horizontal field of view in degrees
    #[arg(long)]
    pub hfov_deg: Option<f64>,
    /// Image width in pixels
    #[arg(long)]
    pub width: Option<usize>,
    /// Image height in pixels
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Observer: gt, noisy or file
    #[arg(long, value_parser = ["gt", "noisy", "file"])]
    pub observer: Option<String>,
    /// Observation JSONL file for the file observer
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Scale reported by the gt observer
    #[arg(long)]
    pub gt_scale: Option<f64>,
    #[arg(long)]
    pub base_scale: Option<f64>,
    #[arg(long)]
    pub corrupt_prob: Option<f64>,
    #[arg(long)]
    pub corrupt_scale: Option<f64>,
    /// oracle, fixed:B0 or miscalibrated:FACTOR
    #[arg(long, value_parser = parse_calibration)]
    pub calibration: Option<Calibration>,
    /// sector or iid
    #[arg(long, value_parser = parse_corruption)]
    pub corruption: Option<CorruptionMode>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RaycastArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Pose as `x,y,phi` (meters, meters, radians)
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub pose: (f64, f64, f64),
    #[command(flatten)]
    pub camera: CameraArgs,
    #[arg(long, default_value_t = 40)]
    pub n_rays: usize,
    #[arg(long, default_value_t = crate::floorplan::DEFAULT_MAX_RANGE)]
    pub max_range: f64,
}

#[derive(Debug, Args)]
pub struct GenMapArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side length in meters
    #[arg(long, default_value_t = 30.0)]
    pub extent: f64,
    /// rooms, maze or corridor
    #[arg(long, default_value = "rooms")]
    pub style: FloorplanStyle,
    #[arg(long, default_value_t = 0.1)]
    pub resolution: f64,
    /// Output path; `.pgm` writes pgm-ascii plus a `.json` sidecar, anything else json-grid
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenTrajArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub length: usize,
    #[arg(long, default_value_t = crate::synth::DEFAULT_STEP_MEAN)]
    pub step_mean: f64,
    /// Odometry noise as `sx,sy,sphi`
    #[arg(long, value_parser = parse_triple, default_value = "0.1,0.1,0.05")]
    pub motion_noise: (f64, f64, f64),
    /// Turn lattice in degrees; 0 for continuous headings
    #[arg(long, default_value_t = 10.0)]
    pub heading_quantum_deg: f64,
    /// trajectory.json output
    #[arg(long)]
    pub out: PathBuf,
    /// Also write observations of every frame as JSONL
    #[arg(long)]
    pub obs_out: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub camera: CameraArgs,
    #[arg(long, default_value_t = 40)]
    pub n_rays: usize,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Run configuration (JSON); flags override its keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub map: MapArgs,
    /// Trajectory file with true poses and measured motions
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Generate the trajectory with this seed instead
    #[arg(long)]
    pub traj_seed: Option<u64>,
    /// Length of a generated trajectory
    #[arg(long)]
    pub length: Option<usize>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub camera: CameraArgs,
    #[arg(long)]
    pub n_rays: Option<usize>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    /// Filter grid resolution in meters
    #[arg(long)]
    pub grid_res: Option<f64>,
    /// Transition noise as `sx,sy,sphi`
    #[arg(long, value_parser = parse_triple)]
    pub sigma: Option<(f64, f64, f64)>,
    /// Observation update every N frames
    #[arg(long)]
    pub obs_interval: Option<usize>,
    /// per-ray, fixed:B0 or pooled
    #[arg(long)]
    pub uncertainty: Option<String>,
    /// Directory for frames.jsonl and heatmaps; the log goes to stdout otherwise
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write a belief heatmap per frame (needs an output directory)
    #[arg(long)]
    pub heatmaps: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark configuration (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Filter grid resolution in meters
    #[arg(long)]
    pub grid_res: Option<f64>,
    #[arg(long)]
    pub obs_interval: Option<usize>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    /// Comma-separated sequence lengths
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// Output directory for report.json, report.txt and per-run artifacts
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub heatmaps: bool,
}

#[derive(Debug, Args)]
pub struct GravityMaskArgs {
    /// Roll in radians
    #[arg(long, allow_hyphen_values = true)]
    pub roll: f64,
    /// Pitch in radians
    #[arg(long, allow_hyphen_values = true)]
    pub pitch: f64,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Intrinsics as `fx,fy,cx,cy`; overrides --hfov-deg
    #[arg(long, value_parser = parse_quad)]
    pub intrinsics: Option<(f64, f64, f64, f64)>,
    /// Mask output (pgm-ascii)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {s:?}"));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_numbers(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let v = parse_numbers(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn parse_quad(s: &str) -> Result<(f64, f64, f64, f64), String> {
    let v = parse_numbers(s, 4)?;
    Ok((v[0], v[1], v[2], v[3]))
}

fn parse_format(s: &str) -> Result<GridFormat, String> {
    s.parse()
}

fn parse_calibration(s: &str) -> Result<Calibration, String> {
    let value = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    match s.split_once(':') {
        None if s == "oracle" => Ok(Calibration::Oracle),
        Some(("fixed", v)) => Ok(Calibration::Fixed { b0: value(v)? }),
        Some(("miscalibrated", v)) => Ok(Calibration::Miscalibrated { factor: value(v)? }),
        _ => Err(format!("unknown calibration {s:?} (oracle, fixed:B0, miscalibrated:FACTOR)")),
    }
}

fn parse_corruption(s: &str) -> Result<CorruptionMode, String> {
    match s {
        "sector" => Ok(CorruptionMode::Sector),
        "iid" => Ok(CorruptionMode::Iid),
        _ => Err(format!("unknown corruption mode {s:?} (sector, iid)")),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
/// Messages go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start {n} worker threads: {e}")))?,
        None => rayon::ThreadPoolBuilder::new()
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start the worker pool: {e}")))?,
    };
    pool.install(|| match cli.command {
        Command::Raycast(a) => commands::raycast(a),
        Command::GenMap(a) => commands::gen_map(a),
        Command::GenTraj(a) => commands::gen_traj(a),
        Command::Localize(a) => commands::localize(a),
        Command::Bench(a) => commands::bench(a),
        Command::GravityMask(a) => commands::gravity_mask(a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsers() {
        assert_eq!(parse_triple("1,-2, 0.5").unwrap(), (1.0, -2.0, 0.5));
        assert!(parse_triple("1,2").is_err());
        assert_eq!(parse_calibration("oracle").unwrap(), Calibration::Oracle);
        assert_eq!(parse_calibration("fixed:0.3").unwrap(), Calibration::Fixed { b0: 0.3 });
        assert_eq!(parse_calibration("miscalibrated:4").unwrap(), Calibration::Miscalibrated { factor: 4.0 });
        assert!(parse_calibration("fixed").is_err());
        assert_eq!(parse_corruption("iid").unwrap(), CorruptionMode::Iid);
    }

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(["floorloc", "--help"]), EXIT_OK);
        assert_eq!(run(["floorloc", "raycast", "--help"]), EXIT_OK);
        assert_eq!(run(["floorloc", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["floorloc", "raycast", "--pose", "1,2"]), EXIT_USAGE);
        assert_eq!(run(["floorloc", "--threads", "0", "gen-map", "--out", "/dev/null"]), EXIT_USAGE);
    }

    #[test]
    fn negative_pose_values_parse() {
        let cli = Cli::try_parse_from(["floorloc", "raycast", "--map", "m.json", "--pose", "-1.5,2,-0.3"]).unwrap();
        match cli.command {
            Command::Raycast(a) => assert_eq!(a.pose, (-1.5, 2.0, -0.3)),
            other => panic!("{other:?}"),
        }
    }
}
