// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::run_config::{apply_noise_flags, default_noise, has_noise_flags};
use super::{
    BenchArgs, CameraArgs, CliError, GenMapArgs, GenTrajArgs, GravityMaskArgs, LocalizeArgs, MapArgs, RaycastArgs,
    RunConfig, RunMap, RunObserver, RunTrajectory,
};
use crate::eval::{
    position_errors, run_benchmark_with, write_frame_log, BenchConfig, CameraSpec, EvalError, FrameRecord, OverrideNote,
    Overrides, UncertaintySpec,
};
use crate::filter::{FilterConfig, Localizer, MotionInput};
use crate::floorplan::{floorplan_depth, load_grid, GridFormat, GridMeta, OccupancyGrid};
use crate::gravity::{alignment_homography, CameraModel};
use crate::observation::{equiangular_rays, write_jsonl, DepthObservation, ObservationRecord, RangeTable, UncertaintyMode};
use crate::pose::Pose2;
use crate::synth::{
    gen_floorplan, gen_trajectory_with, FileObserver, GtObserver, NoisyObserver, ObservationSource, SynthError, Trajectory,
};

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Missing inputs are usage errors that name the path.
fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Config { .. } => CliError::Usage(e.to_string()),
        EvalError::Synth(SynthError::InvalidParams(_)) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::InvalidParams(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_error(path))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value") + "\n"
}

fn print_notes(notes: &[OverrideNote]) {
    for n in notes {
        eprintln!("note: flag overrides config key {}: {} -> {}", n.key, n.config, n.flag);
    }
}

fn camera_spec(base: CameraSpec, args: CameraArgs) -> CameraSpec {
    CameraSpec {
        hfov_deg: args.hfov_deg.unwrap_or(base.hfov_deg),
        width: args.width.unwrap_or(base.width),
        height: args.height.unwrap_or(base.height),
    }
}

fn camera_model(spec: CameraSpec) -> Result<CameraModel, CliError> {
    CameraModel::from_fov(spec.hfov_deg.to_radians(), spec.width, spec.height).map_err(|e| usage(e.to_string()))
}

fn load_map_file(path: &Path, format: Option<GridFormat>, meta: Option<GridMeta>) -> Result<OccupancyGrid, CliError> {
    require_file(path, "map")?;
    let format = format.unwrap_or_else(|| GridFormat::from_path(path));
    load_grid(path, format, meta).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_map_args(args: &MapArgs) -> Result<OccupancyGrid, CliError> {
    let path = args.map.as_ref().ok_or_else(|| usage("--map is required"))?;
    let meta = match (args.map_resolution, args.map_origin) {
        (Some(resolution), origin) => Some(GridMeta {
            resolution,
            origin: origin.map_or([0.0, 0.0], |(x, y)| [x, y]),
        }),
        (None, Some(_)) => return Err(usage("--map-origin needs --map-resolution")),
        (None, None) => None,
    };
    load_map_file(path, args.map_format, meta)
}

#[derive(Serialize)]
struct RayDepth {
    angle: f64,
    depth: Option<f64>,
}

#[derive(Serialize)]
struct RaycastOutput {
    pose: Pose2,
    max_range: f64,
    rays: Vec<RayDepth>,
}

pub fn raycast(args: RaycastArgs) -> Result<(), CliError> {
    let grid = load_map_args(&args.map)?;
    if args.n_rays == 0 {
        return Err(usage("--n-rays must be at least 1"));
    }
    if !(args.max_range > 0.0) {
        return Err(usage("--max-range must be positive"));
    }
    let camera = camera_model(camera_spec(CameraSpec::default(), args.camera))?;
    let (x, y, phi) = args.pose;
    let pose = Pose2::new(x, y, phi);
    let angles = equiangular_rays(&camera, args.n_rays);
    let depths = floorplan_depth(&grid, &pose, &angles, args.max_range).map_err(|e| usage(e.to_string()))?;
    let out = RaycastOutput {
        pose,
        max_range: args.max_range,
        rays: angles.into_iter().zip(depths).map(|(angle, depth)| RayDepth { angle, depth }).collect(),
    };
    print!("{}", to_json(&out));
    Ok(())
}

/// Writes `grid` as pgm-ascii with a sidecar when `path` ends in `.pgm`, json-grid otherwise.
fn write_grid(grid: &OccupancyGrid, path: &Path) -> Result<(), CliError> {
    match GridFormat::from_path(path) {
        GridFormat::PgmAscii => {
            let (x, y) = grid.origin();
            let meta = GridMeta {
                resolution: grid.resolution(),
                origin: [x, y],
            };
            write_text(path, &grid.to_pgm())?;
            write_text(&path.with_extension("json"), &to_json(&meta))
        }
        GridFormat::JsonGrid => write_text(path, &grid.to_json_grid()),
    }
}

pub fn gen_map(args: GenMapArgs) -> Result<(), CliError> {
    let grid = gen_floorplan(args.seed, args.extent, args.style, args.resolution).map_err(synth_error)?;
    write_grid(&grid, &args.out)?;
    eprintln!(
        "wrote {} ({}x{} cells, {} free)",
        args.out.display(),
        grid.width(),
        grid.height(),
        grid.free_count()
    );
    Ok(())
}

fn write_observations(path: &Path, records: &[ObservationRecord]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_error(path))?);
    write_jsonl(&mut w, records).map_err(io_error(path))?;
    w.flush().map_err(io_error(path))
}

pub fn gen_traj(args: GenTrajArgs) -> Result<(), CliError> {
    let observer_flags = args.noise.observer.is_some() || has_noise_flags(&args.noise) || args.noise.gt_scale.is_some();
    if observer_flags && args.obs_out.is_none() {
        return Err(usage("observer flags need --obs-out"));
    }
    if args.noise.observations.is_some() {
        return Err(usage("gen-traj writes observations; --observations is an input of localize"));
    }
    let grid = load_map_args(&args.map)?;
    let (nx, ny, nphi) = args.motion_noise;
    let trajectory = gen_trajectory_with(
        &grid,
        args.seed,
        args.length,
        args.step_mean,
        (nx, ny, nphi),
        args.heading_quantum_deg.to_radians(),
    )
    .map_err(synth_error)?;
    trajectory.save(&args.out).map_err(synth_error)?;
    eprintln!("wrote {} ({} frames)", args.out.display(), trajectory.len());

    let Some(obs_out) = &args.obs_out else {
        return Ok(());
    };
    let camera = camera_model(camera_spec(CameraSpec::default(), args.camera))?;
    let kind = args.noise.observer.as_deref().unwrap_or(if has_noise_flags(&args.noise) { "noisy" } else { "gt" });
    let source: Box<dyn ObservationSource> = match kind {
        "gt" => {
            if has_noise_flags(&args.noise) {
                return Err(usage("noise flags need --observer noisy"));
            }
            Box::new(GtObserver {
                grid: &grid,
                camera,
                n_rays: args.n_rays,
                scale: args.noise.gt_scale.unwrap_or(crate::synth::DEFAULT_GT_SCALE),
            })
        }
        "noisy" => {
            if args.noise.gt_scale.is_some() {
                return Err(usage("--gt-scale needs --observer gt"));
            }
            let mut noise = default_noise();
            apply_noise_flags(&mut noise, &args.noise, &mut Vec::new());
            noise.validate().map_err(synth_error)?;
            Box::new(NoisyObserver {
                grid: &grid,
                camera,
                n_rays: args.n_rays,
                noise,
            })
        }
        _ => return Err(usage("gen-traj writes gt or noisy observations")),
    };
    let records = trajectory
        .poses
        .iter()
        .enumerate()
        .map(|(f, p)| Ok(source.observe(f, p)?.map(|o| ObservationRecord::new(f, &o))))
        .filter_map(Result::transpose)
        .collect::<Result<Vec<_>, SynthError>>()
        .map_err(synth_error)?;
    write_observations(obs_out, &records)?;
    eprintln!("wrote {} ({} observations)", obs_out.display(), records.len());
    Ok(())
}

/// Summary of a localize run, printed to stderr and written as `run.json`.
#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a RunConfig,
    overrides: &'a [OverrideNote],
    frames: usize,
    observed_frames: usize,
    fixed_scale: Option<f64>,
    final_pose: Pose2,
    final_error: f64,
    /// Last `window` errors all within `threshold_m`; `None` when the run is shorter.
    success: Option<bool>,
    rmse_window: Option<f64>,
}

fn load_run_map(map: &RunMap) -> Result<OccupancyGrid, CliError> {
    match map {
        RunMap::File { path, meta } => load_map_file(path, None, *meta),
        RunMap::Generated {
            style,
            extent_m,
            resolution,
            seed,
        } => gen_floorplan(*seed, *extent_m, *style, *resolution).map_err(synth_error),
    }
}

fn load_run_trajectory(spec: &RunTrajectory, grid: &OccupancyGrid) -> Result<Trajectory, CliError> {
    match spec {
        RunTrajectory::File { path } => {
            require_file(path, "trajectory")?;
            let t = Trajectory::load(path).map_err(synth_error)?;
            if t.is_empty() {
                return Err(usage(format!("trajectory {} has no poses", path.display())));
            }
            Ok(t)
        }
        RunTrajectory::Generated {
            seed,
            length,
            step_mean,
            motion_noise: [nx, ny, nphi],
            heading_quantum_deg,
        } => gen_trajectory_with(grid, *seed, *length, *step_mean, (*nx, *ny, *nphi), heading_quantum_deg.to_radians())
            .map_err(synth_error),
    }
}

pub fn localize(args: LocalizeArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            require_file(path, "config")?;
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    let notes = config.apply(&args)?;
    if args.config.is_some() {
        print_notes(&notes);
    }
    config.validate()?;

    let native = load_run_map(config.map.as_ref().expect("validated"))?;
    let trajectory = load_run_trajectory(&config.trajectory, &native)?;
    let filter_grid = match config.grid_resolution {
        Some(r) if r != native.resolution() => native.resampled(r).map_err(|e| usage(format!("grid_resolution: {e}")))?,
        _ => native.clone(),
    };
    let camera = camera_model(config.camera)?;

    let file_source;
    let gt_source;
    let noisy_source;
    let source: &dyn ObservationSource = match config.observer {
        RunObserver::Gt { scale } => {
            gt_source = GtObserver {
                grid: &native,
                camera,
                n_rays: config.n_rays,
                scale,
            };
            &gt_source
        }
        RunObserver::Noisy { noise } => {
            noisy_source = NoisyObserver {
                grid: &native,
                camera,
                n_rays: config.n_rays,
                noise,
            };
            &noisy_source
        }
        RunObserver::File => {
            let path = config.observations.as_ref().expect("validated");
            require_file(path, "observations")?;
            file_source = FileObserver::load(path).map_err(synth_error)?;
            &file_source
        }
    };

    let dt = config.obs_interval;
    let observations = trajectory
        .poses
        .iter()
        .enumerate()
        .map(|(f, p)| if f % dt == 0 { source.observe(f, p) } else { Ok(None) })
        .collect::<Result<Vec<Option<DepthObservation>>, _>>()
        .map_err(synth_error)?;

    let mode = match config.uncertainty {
        UncertaintySpec::PerRay => UncertaintyMode::PerRay,
        UncertaintySpec::Fixed { b0 } => UncertaintyMode::Fixed(b0),
        UncertaintySpec::Pooled => {
            let (sum, n) = observations.iter().flatten().fold((0.0, 0usize), |(s, n), o| {
                let valid = o.scales.iter().zip(&o.valid).filter(|(_, v)| **v);
                valid.fold((s, n), |(s, n), (b, _)| (s + b, n + 1))
            });
            if n == 0 {
                return Err(CliError::Runtime("pooled uncertainty needs at least one valid ray".into()));
            }
            UncertaintyMode::Fixed(sum / n as f64)
        }
    };
    let fixed_scale = match mode {
        UncertaintyMode::Fixed(b) => Some(b),
        UncertaintyMode::PerRay => None,
    };

    let filter = FilterConfig {
        n_theta: config.n_theta,
        max_range: config.max_range,
        mode,
        obs_interval: dt,
    };
    let mut loc = Localizer::new(&filter_grid, filter).map_err(|e| usage(e.to_string()))?;
    if let Some(first) = observations.iter().flatten().next() {
        let table = RangeTable::build(&filter_grid, &first.ray_angles, config.n_theta, config.max_range)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        loc = loc.with_table(Arc::new(table)).map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let heat_dir = match (&config.output_dir, config.heatmaps) {
        (Some(dir), true) => Some(dir.join("heatmaps")),
        _ => None,
    };
    if let Some(dir) = &config.output_dir {
        create_dir(dir)?;
    }
    if let Some(dir) = &heat_dir {
        create_dir(dir)?;
    }

    let [sx, sy, sphi] = config.sigma;
    let mut records = Vec::with_capacity(trajectory.len());
    let mut estimates = Vec::with_capacity(trajectory.len());
    for (f, ((m, obs), truth)) in trajectory.frame_motions().iter().zip(&observations).zip(&trajectory.poses).enumerate() {
        let motion = if f == 0 {
            *m
        } else {
            MotionInput::new(m.t, (sx, sy, sphi)).map_err(|e| CliError::Runtime(format!("frame {f}: {e}")))?
        };
        let r = loc.step(&motion, obs.as_ref()).map_err(|e| CliError::Runtime(format!("frame {f}: {e}")))?;
        records.push(FrameRecord::new(&r, Some(truth)));
        estimates.push(r.map_pose);
        if let Some(dir) = &heat_dir {
            write_text(&dir.join(format!("frame_{f:04}.pgm")), &loc.belief().heatmap_pgm())?;
        }
    }

    let errors = position_errors(&estimates, &trajectory.poses).map_err(eval_error)?;
    let window_errors = (errors.len() >= config.window).then(|| &errors[errors.len() - config.window..]);
    let summary = RunSummary {
        config: &config,
        overrides: &notes,
        frames: records.len(),
        observed_frames: records.iter().filter(|r| r.observed).count(),
        fixed_scale,
        final_pose: *estimates.last().expect("trajectory has poses"),
        final_error: *errors.last().expect("trajectory has poses"),
        success: window_errors.map(|w| w.iter().all(|&e| e <= config.threshold_m)),
        rmse_window: window_errors.map(|w| (w.iter().map(|e| e * e).sum::<f64>() / w.len() as f64).sqrt()),
    };

    match &config.output_dir {
        Some(dir) => {
            write_frame_log(&dir.join("frames.jsonl"), &records).map_err(eval_error)?;
            trajectory.save(&dir.join("trajectory.json")).map_err(synth_error)?;
            write_text(&dir.join("run.json"), &to_json(&summary))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            let fail = |e: std::io::Error| CliError::Runtime(format!("cannot write to stdout: {e}"));
            for r in &records {
                serde_json::to_writer(&mut out, r).map_err(|e| fail(e.into()))?;
                out.write_all(b"\n").map_err(fail)?;
            }
            out.flush().map_err(fail)?;
        }
    }
    let verdict = match summary.success {
        Some(true) => "success",
        Some(false) => "failure",
        None => "shorter than the window",
    };
    eprintln!(
        "{} frames, {} observed; final error {:.3} m; {verdict} at {} m over the last {} frames",
        summary.frames, summary.observed_frames, summary.final_error, config.threshold_m, config.window
    );
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    require_file(&args.config, "config")?;
    let mut config = BenchConfig::load(&args.config).map_err(eval_error)?;
    let notes = config.apply(&Overrides {
        grid_resolution: args.grid_res,
        obs_interval: args.obs_interval,
        n_theta: args.n_theta,
        sequence_lengths: args.lengths.clone(),
        output_dir: args.out_dir.clone(),
        heatmaps: args.heatmaps.then_some(true),
    });
    print_notes(&notes);
    config.validate().map_err(eval_error)?;
    let report = run_benchmark_with(&config, notes).map_err(eval_error)?;
    print!("{}", report.render_table());
    if let Some(dir) = &config.output_dir {
        report.write(dir).map_err(eval_error)?;
        eprintln!("wrote {}", dir.join("report.json").display());
    }
    Ok(())
}

#[derive(Serialize)]
struct MaskOutput {
    roll: f64,
    pitch: f64,
    width: usize,
    height: usize,
    valid_pixels: usize,
    valid_fraction: f64,
    homography: [[f64; 3]; 3],
    mask: Option<PathBuf>,
}

pub fn gravity_mask(args: GravityMaskArgs) -> Result<(), CliError> {
    let spec = camera_spec(CameraSpec::default(), args.camera);
    let camera = match args.intrinsics {
        Some((fx, fy, cx, cy)) => {
            CameraModel::new(fx, fy, cx, cy, spec.width, spec.height).map_err(|e| usage(e.to_string()))?
        }
        None => camera_model(spec)?,
    };
    let alignment = alignment_homography(&camera, args.roll, args.pitch).map_err(|e| usage(e.to_string()))?;
    if let Some(path) = &args.out {
        write_text(path, &alignment.mask_pgm())?;
    }
    let h = alignment.homography;
    let valid = alignment.valid_count();
    let out = MaskOutput {
        roll: args.roll,
        pitch: args.pitch,
        width: camera.width,
        height: camera.height,
        valid_pixels: valid,
        valid_fraction: valid as f64 / (camera.width * camera.height) as f64,
        homography: [0, 1, 2].map(|r| [0, 1, 2].map(|c| h[(r, c)])),
        mask: args.out.clone(),
    };
    print!("{}", to_json(&out));
    Ok(())
}
