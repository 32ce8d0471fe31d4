// SPDX-License-Identifier: Apache-2.0

//! Experiment harness. A run has three phases:
//!
//! 1. scenes: maps, trajectories and every observer's observations;
//! 2. per map, one shared range table and every (variant, trajectory) sequence,
//!    run concurrently;
//! 3. a single-threaded reduction ordered by (map, trajectory seed).
//!
//! With `output_dir` set, `report.json`, `report.txt`, `maps/<map>.json` and
//! `runs/<variant>-<map>-t<k>/` (`trajectory.json`, `observations.jsonl`,
//! `frames.jsonl`, optional `belief.pgm`) are written there.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, MapSource, ObserverSpec, OverrideNote, UncertaintySpec, VariantSpec};
use super::metrics::{rmse_of, single_frame_recall, success_of, RecallEntry};
use super::EvalError;
use crate::filter::{FilterConfig, FrameResult, Localizer, MotionInput, StageTimes};
use crate::floorplan::{load_grid, GridFormat, OccupancyGrid};
use crate::observation::{equiangular_rays, write_jsonl, DepthObservation, ObservationRecord, RangeTable, UncertaintyMode};
use crate::pose::Pose2;
use crate::synth::{gen_floorplan, gen_trajectory_with, GtObserver, NoiseModel, NoisyObserver, ObservationSource, Trajectory};

pub const REPORT_VERSION: u32 = 1;

/// One line of a per-frame log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub map_pose: Pose2,
    pub map_prob: f64,
    pub entropy: f64,
    pub observed: bool,
    /// Distance to the true pose when it is known.
    pub pos_error: Option<f64>,
}

impl FrameRecord {
    pub fn new(r: &FrameResult, truth: Option<&Pose2>) -> Self {
        Self {
            frame: r.frame,
            map_pose: r.map_pose,
            map_prob: r.map_prob,
            entropy: r.entropy,
            observed: r.observed,
            pos_error: truth.map(|t| r.map_pose.distance(t)),
        }
    }
}

pub fn write_frame_log(path: &Path, records: &[FrameRecord]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| io(e.into()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub name: String,
    /// Effective configuration after overrides, without `output_dir`.
    pub config: BenchConfig,
    pub overrides: Vec<OverrideNote>,
    /// Filter grid resolution of each map, in map order.
    pub grid_resolutions: Vec<f64>,
    pub variants: Vec<VariantReport>,
    /// Wall-clock measurements and run environment; excluded from determinism.
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub sequences: usize,
    /// Constant scale used by the filter, when not per-ray.
    pub fixed_scale: Option<f64>,
    pub obs_interval: usize,
    pub lengths: Vec<LengthReport>,
    /// Single-frame recall of the frame-0 estimates.
    pub recall: Vec<RecallEntry>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub length: usize,
    pub thresholds: Vec<SuccessReport>,
    /// Pooled over the last-window errors of every sequence.
    pub rmse_all: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub threshold_m: f64,
    pub successes: usize,
    pub rate: Option<f64>,
    /// Pooled over the last-window errors of the successful sequences.
    pub rmse_succ: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub map: String,
    pub trajectory_seed: u64,
    pub final_error: f64,
    /// First frame from which every error stays within the first success threshold.
    pub converged_frame: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
    pub total_s: f64,
    /// Map, trajectory and observation generation.
    pub setup_s: f64,
    pub table_build_s: f64,
    pub variants: Vec<VariantTimings>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VariantTimings {
    pub name: String,
    /// Sum of per-sequence wall time.
    pub sequence_s: f64,
    /// Observation generation per frame.
    pub extraction_ms_per_frame: f64,
    /// Likelihood and product per observed frame.
    pub matching_ms_per_frame: f64,
    pub transition_ms_per_frame: f64,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// The report without the `timings` section.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Some(o) = v.as_object_mut() {
            o.remove("timings");
        }
        serde_json::to_string_pretty(&v).expect("reports serialize") + "\n"
    }

    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        create_dir(dir)?;
        write_file(&dir.join("report.json"), &self.to_json())?;
        write_file(&dir.join("report.txt"), &self.render_table())
    }

    /// Plain-text summary: success rates and RMSE per length, then recall.
    pub fn render_table(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let res: Vec<String> = {
            let mut r: Vec<f64> = self.grid_resolutions.clone();
            r.sort_by(f64::total_cmp);
            r.dedup();
            r.iter().map(|x| format!("{x}")).collect()
        };
        let _ = writeln!(
            s,
            "{} ({} map(s), grid {} m, n_theta {})",
            self.name,
            self.grid_resolutions.len(),
            if res.is_empty() { "-".into() } else { res.join("/") },
            self.config.n_theta
        );
        let thresholds = &self.config.success_thresholds;
        let mut header = format!("{:<16} {:>5} {:>5}", "variant", "seqs", "T");
        for t in thresholds {
            header += &format!(" {:>8} {:>10}", format!("SR@{t}m"), "RMSE succ");
        }
        header += &format!(" {:>9}", "RMSE all");
        let _ = writeln!(s, "{header}");
        let opt = |v: Option<f64>, scale: f64, digits: usize| match v {
            Some(x) => format!("{:.*}", digits, x * scale),
            None => "-".into(),
        };
        for v in &self.variants {
            for l in &v.lengths {
                let mut line = format!("{:<16} {:>5} {:>5}", v.name, v.sequences, l.length);
                for t in &l.thresholds {
                    line += &format!(" {:>8} {:>10}", opt(t.rate, 100.0, 1), opt(t.rmse_succ, 1.0, 3));
                }
                line += &format!(" {:>9}", opt(l.rmse_all, 1.0, 3));
                let _ = writeln!(s, "{line}");
            }
        }
        if self.variants.iter().any(|v| !v.recall.is_empty()) {
            let _ = writeln!(s);
            let mut header = format!("{:<16}", "recall (frame 0)");
            for t in &self.config.recall_thresholds {
                header += &format!(" {:>8}", t.to_string());
            }
            let _ = writeln!(s, "{header}");
            for v in &self.variants {
                let mut line = format!("{:<16}", v.name);
                for e in &v.recall {
                    line += &format!(" {:>8.1}", e.recall * 100.0);
                }
                let _ = writeln!(s, "{line}");
            }
        }
        let t = &self.timings;
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "timings ({} threads): total {:.1} s, setup {:.1} s, tables {:.1} s",
            t.threads, t.total_s, t.setup_s, t.table_build_s
        );
        for v in &t.variants {
            let _ = writeln!(
                s,
                "  {:<14} extraction {:.3} ms/frame, matching {:.3} ms/frame, transition {:.3} ms/frame",
                v.name, v.extraction_ms_per_frame, v.matching_ms_per_frame, v.transition_ms_per_frame
            );
        }
        s
    }
}

fn create_dir(dir: &Path) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), EvalError> {
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise seed of one sequence.
pub fn sequence_noise_seed(rng_seed: u64, trajectory_seed: u64) -> u64 {
    mix64(rng_seed ^ mix64(trajectory_seed))
}

/// Trajectory seed `k` of map `m`.
pub fn trajectory_seed(map_key: u64, k: usize, offset: u64) -> u64 {
    map_key.wrapping_mul(1000).wrapping_add(k as u64).wrapping_add(offset)
}

struct Scene {
    label: String,
    native: OccupancyGrid,
    filter: OccupancyGrid,
    sequences: Vec<SceneSequence>,
}

struct SceneSequence {
    k: usize,
    seed: u64,
    trajectory: Trajectory,
    /// Per distinct observer, one entry per frame.
    observations: Vec<Vec<Option<DepthObservation>>>,
}

struct Outcome {
    errors: Vec<f64>,
    first: (Pose2, Pose2),
    times: StageTimes,
    wall: Duration,
}

fn load_maps(config: &BenchConfig) -> Result<Vec<(u64, String, OccupancyGrid)>, EvalError> {
    match &config.maps {
        MapSource::Generated {
            style,
            extent_m,
            resolution,
            seeds,
        } => seeds
            .par_iter()
            .map(|&s| Ok((s, format!("m{s:04}"), gen_floorplan(s, *extent_m, *style, *resolution)?)))
            .collect(),
        MapSource::Files { paths } => paths
            .iter()
            .enumerate()
            .map(|(k, p)| Ok((k as u64, format!("f{k:04}"), load_grid(p, GridFormat::from_path(p), None)?)))
            .collect(),
    }
}

fn observer_source<'a>(
    spec: &ObserverSpec,
    grid: &'a OccupancyGrid,
    config: &BenchConfig,
    seed: u64,
) -> Result<Box<dyn ObservationSource + 'a>, EvalError> {
    let camera = config.camera.model()?;
    Ok(match *spec {
        ObserverSpec::Gt { scale } => Box::new(GtObserver {
            grid,
            camera,
            n_rays: config.n_rays,
            scale,
        }),
        ObserverSpec::Noisy { noise } => Box::new(NoisyObserver {
            grid,
            camera,
            n_rays: config.n_rays,
            noise: NoiseModel {
                rng_seed: sequence_noise_seed(noise.rng_seed, seed),
                ..noise
            },
        }),
    })
}

/// Runs the benchmark; see the module docs for artifacts.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport, EvalError> {
    run_benchmark_with(config, Vec::new())
}

/// As [`run_benchmark`], recording `overrides` in the report.
pub fn run_benchmark_with(config: &BenchConfig, overrides: Vec<OverrideNote>) -> Result<BenchReport, EvalError> {
    config.validate()?;
    let start = Instant::now();
    let out_dir = config.output_dir.clone();
    if let Some(dir) = &out_dir {
        create_dir(dir)?;
    }

    let mut observers: Vec<ObserverSpec> = Vec::new();
    let variant_observer: Vec<usize> = config
        .variants
        .iter()
        .map(|v| match observers.iter().position(|o| *o == v.observer) {
            Some(i) => i,
            None => {
                observers.push(v.observer);
                observers.len() - 1
            }
        })
        .collect();

    let t_max = config.max_length();
    let quantum = config.trajectories.heading_quantum_deg.to_radians();
    let [nx, ny, nphi] = config.trajectories.motion_noise;
    let per_map = if config.variants.is_empty() { 0 } else { config.trajectories.per_map };
    let maps = load_maps(config)?;
    let extraction: Vec<std::sync::Mutex<(Duration, usize)>> =
        observers.iter().map(|_| std::sync::Mutex::new((Duration::ZERO, 0))).collect();
    let scenes: Vec<Scene> = maps
        .into_iter()
        .map(|(key, label, native)| {
            let filter = match config.grid_resolution {
                Some(r) if r != native.resolution() => native.resampled(r)?,
                _ => native.clone(),
            };
            let sequences = (0..per_map)
                .into_par_iter()
                .map(|k| {
                    let seed = trajectory_seed(key, k, config.trajectories.seed_offset);
                    let trajectory =
                        gen_trajectory_with(&native, seed, t_max, config.trajectories.step_mean, (nx, ny, nphi), quantum)?;
                    let mut observations = Vec::with_capacity(observers.len());
                    for (o, spec) in observers.iter().enumerate() {
                        let source = observer_source(spec, &native, config, seed)?;
                        let t0 = Instant::now();
                        let frames = trajectory
                            .poses
                            .iter()
                            .enumerate()
                            .map(|(f, p)| source.observe(f, p))
                            .collect::<Result<Vec<_>, _>>()?;
                        let mut e = extraction[o].lock().expect("timing lock");
                        e.0 += t0.elapsed();
                        e.1 += frames.len();
                        observations.push(frames);
                    }
                    Ok(SceneSequence {
                        k,
                        seed,
                        trajectory,
                        observations,
                    })
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            Ok(Scene {
                label,
                native,
                filter,
                sequences,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let setup = start.elapsed();

    let modes: Vec<UncertaintyMode> = config
        .variants
        .iter()
        .zip(&variant_observer)
        .map(|(v, &o)| match v.uncertainty {
            UncertaintySpec::PerRay => UncertaintyMode::PerRay,
            UncertaintySpec::Fixed { b0 } => UncertaintyMode::Fixed(b0),
            UncertaintySpec::Pooled => UncertaintyMode::Fixed(pooled_scale(&scenes, o)),
        })
        .collect();

    if let Some(dir) = &out_dir {
        create_dir(&dir.join("maps"))?;
        for s in &scenes {
            write_file(&dir.join("maps").join(format!("{}.json", s.label)), &s.native.to_json_grid())?;
        }
    }

    let camera = config.camera.model()?;
    let rays = equiangular_rays(&camera, config.n_rays);
    let sigma = (config.sigma[0], config.sigma[1], config.sigma[2]);
    let mut table_time = Duration::ZERO;
    // outcomes[variant] in (map, trajectory) order
    let mut outcomes: Vec<Vec<(String, String, u64, Outcome)>> = config.variants.iter().map(|_| Vec::new()).collect();
    for scene in &scenes {
        if scene.sequences.is_empty() {
            continue;
        }
        let t0 = Instant::now();
        let table = Arc::new(RangeTable::build(&scene.filter, &rays, config.n_theta, config.max_range)?);
        table_time += t0.elapsed();
        let jobs: Vec<(usize, &SceneSequence)> = (0..config.variants.len())
            .flat_map(|v| scene.sequences.iter().map(move |s| (v, s)))
            .collect();
        let results = jobs
            .par_iter()
            .map(|&(v, seq)| {
                let variant = &config.variants[v];
                let id = format!("{}-{}-t{}", variant.name, scene.label, seq.k);
                let filter = FilterConfig {
                    n_theta: config.n_theta,
                    max_range: config.max_range,
                    mode: modes[v],
                    obs_interval: config.variant_interval(variant),
                };
                let run_dir = out_dir.as_ref().map(|d| d.join("runs").join(&id));
                let outcome = run_one(scene, seq, &seq.observations[variant_observer[v]], filter, sigma, &table, run_dir, config.heatmaps)?;
                Ok((v, id, outcome))
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        for ((v, id, outcome), (_, seq)) in results.into_iter().zip(&jobs) {
            outcomes[v].push((id, scene.label.clone(), seq.seed, outcome));
        }
    }

    let mut variants = Vec::new();
    let mut variant_timings = Vec::new();
    for (v, spec) in config.variants.iter().enumerate() {
        variants.push(summarize(config, spec, modes[v], &outcomes[v])?);
        let (ext, ext_frames) = *extraction[variant_observer[v]].lock().expect("timing lock");
        let mut times = StageTimes::default();
        let mut wall = Duration::ZERO;
        for (_, _, _, o) in &outcomes[v] {
            times.transition += o.times.transition;
            times.matching += o.times.matching;
            times.frames += o.times.frames;
            times.observed_frames += o.times.observed_frames;
            wall += o.wall;
        }
        let per = |d: Duration, n: usize| if n == 0 { 0.0 } else { d.as_secs_f64() * 1e3 / n as f64 };
        variant_timings.push(VariantTimings {
            name: spec.name.clone(),
            sequence_s: wall.as_secs_f64(),
            extraction_ms_per_frame: per(ext, ext_frames),
            matching_ms_per_frame: per(times.matching, times.observed_frames),
            transition_ms_per_frame: per(times.transition, times.frames),
        });
    }

    let mut echoed = config.clone();
    echoed.output_dir = None;
    let report = BenchReport {
        schema_version: REPORT_VERSION,
        name: config.name.clone(),
        config: echoed,
        overrides,
        grid_resolutions: scenes.iter().map(|s| s.filter.resolution()).collect(),
        variants,
        timings: Timings {
            threads: rayon::current_num_threads(),
            output_dir: out_dir.clone(),
            total_s: start.elapsed().as_secs_f64(),
            setup_s: setup.as_secs_f64(),
            table_build_s: table_time.as_secs_f64(),
            variants: variant_timings,
        },
    };
    if let Some(dir) = &out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

/// Mean reported scale over the valid rays of one observer's observations.
fn pooled_scale(scenes: &[Scene], observer: usize) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in scenes {
        for seq in &s.sequences {
            for o in seq.observations[observer].iter().flatten() {
                for (b, _) in o.scales.iter().zip(&o.valid).filter(|(_, v)| **v) {
                    sum += b;
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        crate::synth::DEFAULT_GT_SCALE
    } else {
        sum / n as f64
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    scene: &Scene,
    seq: &SceneSequence,
    observations: &[Option<DepthObservation>],
    filter: FilterConfig,
    sigma: (f64, f64, f64),
    table: &Arc<RangeTable>,
    run_dir: Option<PathBuf>,
    heatmaps: bool,
) -> Result<Outcome, EvalError> {
    let start = Instant::now();
    let mut loc = Localizer::new(&scene.filter, filter)?.with_table(Arc::clone(table))?;
    let motions = seq.trajectory.frame_motions();
    let mut errors = Vec::with_capacity(motions.len());
    let mut records = Vec::new();
    let mut first = None;
    for (f, ((m, obs), truth)) in motions.iter().zip(observations).zip(&seq.trajectory.poses).enumerate() {
        let motion = if f == 0 { *m } else { MotionInput::new(m.t, sigma)? };
        let r = loc.step(&motion, obs.as_ref())?;
        errors.push(r.map_pose.distance(truth));
        if f == 0 {
            first = Some((r.map_pose, *truth));
        }
        if run_dir.is_some() {
            records.push(FrameRecord::new(&r, Some(truth)));
        }
    }
    let times = loc.stage_times();
    let wall = start.elapsed();
    if let Some(dir) = run_dir {
        create_dir(&dir)?;
        seq.trajectory.save(&dir.join("trajectory.json"))?;
        let obs_records: Vec<ObservationRecord> = observations
            .iter()
            .enumerate()
            .filter_map(|(f, o)| o.as_ref().map(|o| ObservationRecord::new(f, o)))
            .collect();
        let path = dir.join("observations.jsonl");
        let io = |source| EvalError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        write_jsonl(&mut w, &obs_records).map_err(io)?;
        w.flush().map_err(io)?;
        write_frame_log(&dir.join("frames.jsonl"), &records)?;
        if heatmaps {
            write_file(&dir.join("belief.pgm"), &loc.belief().heatmap_pgm())?;
        }
    }
    Ok(Outcome {
        errors,
        first: first.expect("sequences have at least one frame"),
        times,
        wall,
    })
}

fn summarize(
    config: &BenchConfig,
    spec: &VariantSpec,
    mode: UncertaintyMode,
    outcomes: &[(String, String, u64, Outcome)],
) -> Result<VariantReport, EvalError> {
    let window = config.window;
    let mut lengths = Vec::new();
    for t in config.lengths_desc() {
        let mut thresholds = Vec::new();
        let mut sq_all = 0.0;
        for &th in &config.success_thresholds {
            let mut successes = 0;
            let mut sq_succ = 0.0;
            for (_, _, _, o) in outcomes {
                let errs = &o.errors[..t.min(o.errors.len())];
                if success_of(errs, th, window)? {
                    successes += 1;
                    sq_succ += rmse_of(errs, window)?.powi(2);
                }
            }
            thresholds.push(SuccessReport {
                threshold_m: th,
                successes,
                rate: (!outcomes.is_empty()).then(|| successes as f64 / outcomes.len() as f64),
                rmse_succ: (successes > 0).then(|| (sq_succ / successes as f64).sqrt()),
            });
        }
        for (_, _, _, o) in outcomes {
            sq_all += rmse_of(&o.errors[..t.min(o.errors.len())], window)?.powi(2);
        }
        lengths.push(LengthReport {
            length: t,
            thresholds,
            rmse_all: (!outcomes.is_empty()).then(|| (sq_all / outcomes.len() as f64).sqrt()),
        });
    }
    let firsts: Vec<(Pose2, Pose2)> = outcomes.iter().map(|(_, _, _, o)| o.first).collect();
    let th0 = config.success_thresholds[0];
    let runs = outcomes
        .iter()
        .map(|(id, map, seed, o)| RunSummary {
            id: id.clone(),
            map: map.clone(),
            trajectory_seed: *seed,
            final_error: o.errors.last().copied().unwrap_or(0.0),
            converged_frame: (0..o.errors.len()).find(|&f| o.errors[f..].iter().all(|&e| e <= th0)),
        })
        .collect();
    Ok(VariantReport {
        name: spec.name.clone(),
        sequences: outcomes.len(),
        fixed_scale: match mode {
            UncertaintyMode::PerRay => None,
            UncertaintyMode::Fixed(b) => Some(b),
        },
        obs_interval: config.variant_interval(spec),
        lengths,
        recall: single_frame_recall(&firsts, &config.recall_thresholds),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variants: &str, extra: &str) -> BenchConfig {
        BenchConfig::from_json(&format!(
            r#"{{
                "name": "small",
                "maps": {{"kind": "generated", "style": "rooms", "extent_m": 8.0, "resolution": 0.2, "seeds": [3, 4]}},
                "trajectories": {{"per_map": 2}},
                "n_rays": 12, "n_theta": 12,
                "sequence_lengths": [15, 10],
                {extra}
                "variants": {variants}
            }}"#
        ))
        .unwrap()
    }

    const NOISY: &str = r#"{"kind": "noisy", "noise": {"base_scale": 0.1, "corrupt_prob": 0.3, "corrupt_scale": 2.0,
        "calibration": {"kind": "oracle"}, "rng_seed": 9}}"#;

    #[test]
    fn no_sequences_gives_an_empty_report() {
        let c = small("[]", "");
        let r = run_benchmark(&c).unwrap();
        assert!(r.variants.is_empty());
        let mut c = small(r#"[{"name": "gt", "observer": {"kind": "gt"}}]"#, "");
        c.trajectories.per_map = 0;
        let r = run_benchmark(&c).unwrap();
        assert_eq!(r.variants[0].sequences, 0);
        assert_eq!(r.variants[0].lengths[0].thresholds[0].rate, None);
        assert!(r.variants[0].recall.is_empty());
        assert!(r.render_table().contains("gt"));
    }

    #[test]
    fn repeated_runs_are_identical() {
        let c = small(&format!(r#"[{{"name": "noisy", "observer": {NOISY}}}]"#), "");
        let a = run_benchmark(&c).unwrap();
        let b = run_benchmark(&c).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json());
        assert!(!a.deterministic_json().contains("timings"));
        assert_eq!(a.variants[0].sequences, 4);
        assert_eq!(a.variants[0].lengths.iter().map(|l| l.length).collect::<Vec<_>>(), vec![15, 10]);
    }

    #[test]
    fn pooled_scale_and_shared_observations() {
        let c = small(
            &format!(
                r#"[{{"name": "per-ray", "observer": {NOISY}}},
                    {{"name": "pooled", "observer": {NOISY}, "uncertainty": {{"kind": "pooled"}}}},
                    {{"name": "dt2", "observer": {{"kind": "gt"}}, "obs_interval": 2}}]"#
            ),
            "",
        );
        let r = run_benchmark(&c).unwrap();
        assert_eq!(r.variants[0].fixed_scale, None);
        // sector corruption marks round(0.3 · 12) = 4 of 12 rays per frame
        let b0 = r.variants[1].fixed_scale.unwrap();
        let expected = (8.0 * 0.1 + 4.0 * 2.0) / 12.0;
        assert!((b0 - expected).abs() < 1e-6, "{b0}");
        assert_eq!(r.variants[2].obs_interval, 2);
        assert_eq!(r.timings.variants.len(), 3);
    }

    #[test]
    fn artifacts_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(r#"[{"name": "gt", "observer": {"kind": "gt"}}]"#, r#""heatmaps": true,"#);
        c.output_dir = Some(dir.path().to_path_buf());
        let r = run_benchmark(&c).unwrap();
        let report: BenchReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report.deterministic_json(), r.deterministic_json());
        assert_eq!(report.config.output_dir, None);
        assert!(dir.path().join("report.txt").is_file());
        assert!(dir.path().join("maps/m0003.json").is_file());
        let run = dir.path().join("runs/gt-m0004-t1");
        for f in ["trajectory.json", "observations.jsonl", "frames.jsonl", "belief.pgm"] {
            assert!(run.join(f).is_file(), "{f}");
        }
        let frames = std::fs::read_to_string(run.join("frames.jsonl")).unwrap();
        let lines: Vec<FrameRecord> = frames.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 15);
        assert!(lines.iter().all(|l| l.pos_error.is_some()));
        let traj = Trajectory::load(&run.join("trajectory.json")).unwrap();
        assert_eq!(traj.len(), 15);
    }

    #[test]
    fn coarser_grid_is_reported() {
        let c = small(r#"[{"name": "gt", "observer": {"kind": "gt"}}]"#, r#""grid_resolution": 0.4,"#);
        let r = run_benchmark(&c).unwrap();
        assert_eq!(r.grid_resolutions, vec![0.4, 0.4]);
        assert_eq!(r.variants[0].sequences, 4);
    }

    #[test]
    fn seeds_are_mixed() {
        assert_eq!(trajectory_seed(7, 1, 0), 7001);
        assert_ne!(sequence_noise_seed(9, 1), sequence_noise_seed(9, 2));
        assert_ne!(sequence_noise_seed(9, 1), sequence_noise_seed(10, 1));
    }
}
