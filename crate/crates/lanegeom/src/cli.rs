//! Command-line surface: `generate`, `fit`, `eval`, `bench`.
//!
//! Exit codes: 0 success (per-frame soft failures included), 1 usage or
//! configuration error, 2 I/O error, 3 data/join error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench;
use crate::error::Error as CoreError;
use crate::geom::ExtrapolationPolicy;
use crate::io::{
    self, DatasetFile, FittedFrame, FormatError, FrameRecord, KeypointFile, KeypointFrame,
    ModelsFile, PipelineConfig, ReportFile, FORMAT_VERSION,
};
use crate::lanes::fit_lanes_with_policy;
use crate::metrics::{aggregate, evaluate_frame, runtime_stats, FrameEval};
use crate::scene::{generate_scene, sample_ground_truth, simulate_detections, CoursePrimitive, RoadCourse};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser)]
#[command(
    name = "lanegeom",
    version,
    about = "Lane geometry from roadside delineator posts",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON pipeline configuration; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Permit extrapolation beyond the 10 m cap.
    #[arg(long)]
    allow_long_extrapolation: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset of frames with simulated detections.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Course spec: comma-separated `straight:<m>` and
        /// `arc:<radius_m>:<sweep_rad>` primitives.
        #[arg(long, default_value = "straight:400")]
        course: String,
        /// Number of lanes on the course.
        #[arg(long, default_value_t = 2)]
        lanes: usize,
        /// Frames to generate.
        #[arg(long, default_value_t = 100)]
        frames: usize,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit lane models to every frame of a dataset.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Input dataset path.
        #[arg(long)]
        dataset: PathBuf,
        /// Output models path.
        #[arg(long)]
        out: PathBuf,
        /// Also export image-space keypoints to this path.
        #[arg(long)]
        keypoints_out: Option<PathBuf>,
    },
    /// Evaluate fitted models against the dataset's ground truth.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Fitted models path.
        #[arg(long)]
        models: PathBuf,
        /// Dataset the models were fitted on.
        #[arg(long)]
        dataset: PathBuf,
        /// Output report path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the geometric pipeline over in-memory frames.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Timed iterations (after 100 warmup iterations).
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        /// Optional course spec for the benchmark frames.
        #[arg(long)]
        course: Option<String>,
    },
}

/// Parse and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Let clap render help/version itself; everything else is a
            // usage error.
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &FormatError) -> i32 {
    match e {
        FormatError::Io { .. } => EXIT_IO,
        FormatError::Parse { .. } | FormatError::Version { .. } | FormatError::Join { .. } => {
            EXIT_DATA
        }
        FormatError::Invalid(_) => EXIT_USAGE,
    }
}

fn dispatch(cli: Cli) -> Result<(), FormatError> {
    match cli.command {
        Command::Generate {
            common,
            course,
            lanes,
            frames,
            out,
        } => {
            let config = load_config(&common)?;
            config.validate(common.allow_long_extrapolation)?;
            let course = parse_course(&course, lanes, &config)?;
            cmd_generate(&config, &course, frames, &out)
        }
        Command::Fit {
            common,
            dataset,
            out,
            keypoints_out,
        } => {
            let config = load_config(&common)?;
            config.validate(common.allow_long_extrapolation)?;
            cmd_fit(
                &config,
                common.allow_long_extrapolation,
                &dataset,
                &out,
                keypoints_out.as_deref(),
            )
        }
        Command::Eval {
            common,
            models,
            dataset,
            out,
        } => {
            let config = load_config(&common)?;
            config.validate(common.allow_long_extrapolation)?;
            cmd_eval(&config, &models, &dataset, &out)
        }
        Command::Bench {
            common,
            frames,
            course,
        } => {
            let config = load_config(&common)?;
            config.validate(common.allow_long_extrapolation)?;
            let course = match course {
                Some(spec) => parse_course(&spec, 2, &config)?,
                None => bench::default_course(&config)?,
            };
            cmd_bench(&config, &course, frames)
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<PipelineConfig, FormatError> {
    let mut config = match &common.config {
        Some(path) => io::load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Course DSL: `straight:300`, `arc:100:0.8`, comma-separated.
fn parse_course(
    spec: &str,
    lanes: usize,
    config: &PipelineConfig,
) -> Result<RoadCourse, FormatError> {
    let mut segments = Vec::new();
    for part in spec.split(',') {
        let fields: Vec<&str> = part.trim().split(':').collect();
        let bad = || {
            FormatError::Invalid(CoreError::InvalidParameter {
                what: format!(
                    "course segment `{part}`; expected straight:<m> or arc:<radius_m>:<sweep_rad>"
                ),
            })
        };
        match fields.as_slice() {
            ["straight", len] => {
                let length_m: f64 = len.parse().map_err(|_| bad())?;
                segments.push(CoursePrimitive::Straight { length_m });
            }
            ["arc", radius, sweep] => {
                let radius_m: f64 = radius.parse().map_err(|_| bad())?;
                let sweep_rad: f64 = sweep.parse().map_err(|_| bad())?;
                segments.push(CoursePrimitive::Arc {
                    radius_m,
                    sweep_rad,
                });
            }
            _ => return Err(bad()),
        }
    }
    Ok(RoadCourse::new(segments, lanes, config.layout)?)
}

fn cmd_generate(
    config: &PipelineConfig,
    course: &RoadCourse,
    frames: usize,
    out: &Path,
) -> Result<(), FormatError> {
    let usable = course.total_length();
    let mut records = Vec::with_capacity(frames);
    let mut detection_count = 0usize;
    for i in 0..frames as u64 {
        let ego_arclength_m = (i as f64 * config.ego_step_m) % usable;
        let seed = config.seed.wrapping_add(i);
        let scene = generate_scene(course, ego_arclength_m, seed)?;
        let mut noise = config.noise;
        noise.seed = seed;
        let detections = simulate_detections(&scene, &noise, config.detection_range_m)?;
        detection_count += detections.len();
        records.push(FrameRecord {
            frame_id: i,
            ego_arclength_m,
            ego_speed_mps: config.ego_speed_mps,
            seed,
            detections,
        });
    }
    let dataset = DatasetFile {
        version: FORMAT_VERSION,
        course: course.clone(),
        noise: config.noise,
        max_range_m: config.detection_range_m,
        frames: records,
    };
    io::save_dataset(out, &dataset)?;
    println!(
        "generated {} frames ({} detections) over a {:.0} m course -> {}",
        frames,
        detection_count,
        usable,
        out.display()
    );
    Ok(())
}

fn cmd_fit(
    config: &PipelineConfig,
    allow_long: bool,
    dataset_path: &Path,
    out: &Path,
    keypoints_out: Option<&Path>,
) -> Result<(), FormatError> {
    let dataset = io::load_dataset(dataset_path)?;
    let policy = ExtrapolationPolicy {
        allow_beyond_cap: allow_long,
        ..Default::default()
    };
    let mut fitted = Vec::with_capacity(dataset.frames.len());
    let mut times_ms = Vec::with_capacity(dataset.frames.len());
    let mut failures = 0usize;
    for frame in &dataset.frames {
        // Timed region: the geometric pipeline only.
        let start = Instant::now();
        let result = fit_lanes_with_policy(
            &frame.detections,
            &config.layout,
            config.extrapolation_m,
            config.marking_mode,
            &policy,
        );
        let fit_time_ms = start.elapsed().as_secs_f64() * 1e3;
        times_ms.push(fit_time_ms);
        let (model, error) = match result {
            Ok(model) => (Some(model), None),
            Err(e) => {
                failures += 1;
                (None, Some(e.to_string()))
            }
        };
        fitted.push(FittedFrame {
            frame_id: frame.frame_id,
            model,
            error,
            fit_time_ms,
        });
    }
    let runtime = runtime_stats(&times_ms).ok();
    if let Some(kp_path) = keypoints_out {
        let rows = io::keypoint_rows(&config.camera, config.keypoint_row_step_px);
        let mut kp_frames = Vec::new();
        for f in &fitted {
            let lanes = match &f.model {
                Some(model) => io::export_keypoints(model, &config.camera, &rows)?,
                None => Vec::new(),
            };
            kp_frames.push(KeypointFrame {
                frame_id: f.frame_id,
                lanes,
            });
        }
        io::save_json(
            kp_path,
            &KeypointFile {
                version: FORMAT_VERSION,
                h_samples: rows,
                frames: kp_frames,
            },
        )?;
    }
    let models = ModelsFile {
        version: FORMAT_VERSION,
        frames: fitted,
        runtime,
    };
    io::save_models(out, &models)?;
    if let Some(rt) = &models.runtime {
        println!(
            "fitted {}/{} frames (runtime per frame: mean {:.3} ms, sigma {:.3} ms, q95 {:.3} ms) -> {}",
            models.frames.len() - failures,
            models.frames.len(),
            rt.mean_ms,
            rt.sigma_ms,
            rt.q95_ms,
            out.display()
        );
    } else {
        println!(
            "fitted {}/{} frames -> {}",
            models.frames.len() - failures,
            models.frames.len(),
            out.display()
        );
    }
    Ok(())
}

fn cmd_eval(
    config: &PipelineConfig,
    models_path: &Path,
    dataset_path: &Path,
    out: &Path,
) -> Result<(), FormatError> {
    let dataset = io::load_dataset(dataset_path)?;
    let models = io::load_models(models_path)?;
    let by_id: std::collections::BTreeMap<u64, &FittedFrame> =
        models.frames.iter().map(|f| (f.frame_id, f)).collect();
    let missing: Vec<u64> = dataset
        .frames
        .iter()
        .map(|f| f.frame_id)
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(FormatError::Join { missing });
    }

    let mut evals = Vec::with_capacity(dataset.frames.len());
    for frame in &dataset.frames {
        let fitted = by_id[&frame.frame_id];
        let scene = generate_scene(&dataset.course, frame.ego_arclength_m, frame.seed)?;
        let gt = sample_ground_truth(&scene, config.eval_step_m, config.eval_range_m)?;
        let eval = match (&fitted.model, &fitted.error) {
            (Some(model), _) => evaluate_frame(
                frame.frame_id,
                model,
                &gt,
                &config.camera,
                config.threshold_px,
                config.lateral_threshold_m,
                frame.ego_speed_mps,
                &config.safety,
            )?,
            (None, error) => FrameEval::failed(
                frame.frame_id,
                error.clone().unwrap_or_else(|| "fit produced no model".into()),
            ),
        };
        evals.push(eval);
    }
    let report = aggregate(evals, models.runtime);
    println!(
        "evaluated {} frames: acc2d {}, acc3d {:.4}, safety {:.4} -> {}",
        report.frames.len(),
        report
            .acc2d
            .map_or("n/a".to_string(), |a| format!("{a:.4}")),
        report.acc3d,
        report.safety,
        out.display()
    );
    io::save_report(
        out,
        &ReportFile {
            version: FORMAT_VERSION,
            report,
        },
    )?;
    Ok(())
}

fn cmd_bench(config: &PipelineConfig, course: &RoadCourse, frames: usize) -> Result<(), FormatError> {
    let workload = bench::prepare(config, course)?;
    let stats = bench::run(config, &workload, frames)?;
    println!(
        "geometry pipeline over {} iterations ({} warmup): mean {:.4} ms, sigma {:.4} ms, q95 {:.4} ms",
        frames,
        bench::WARMUP_ITERATIONS,
        stats.mean_ms,
        stats.sigma_ms,
        stats.q95_ms
    );
    Ok(())
}
