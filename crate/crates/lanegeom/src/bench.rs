//! In-memory runtime benchmark of the geometric pipeline.
//!
//! Frames are synthesized up front; the timed region is exactly one
//! `fit_lanes` call per iteration; detection simulation and I/O stay
//! outside the clock, matching how the per-frame latency is reported.
//! Single-threaded so mean and deviation stay comparable across runs.

use std::time::Instant;

use crate::error::Result;
use crate::io::PipelineConfig;
use crate::lanes::{fit_lanes, DelineatorDetection};
use crate::metrics::{runtime_stats, RuntimeStats};
use crate::scene::{generate_scene, simulate_detections, CoursePrimitive, RoadCourse};

/// Distinct frames synthesized before the loop; iterations cycle them.
const FRAME_POOL: usize = 32;

/// Warmup iterations before timing starts.
pub const WARMUP_ITERATIONS: usize = 100;

/// A prepared benchmark workload.
pub struct BenchWorkload {
    frames: Vec<Vec<DelineatorDetection>>,
}

/// Default benchmark course: a straight, a sweeping arc, a straight.
pub fn default_course(config: &PipelineConfig) -> Result<RoadCourse> {
    RoadCourse::new(
        vec![
            CoursePrimitive::Straight { length_m: 150.0 },
            CoursePrimitive::Arc {
                radius_m: 150.0,
                sweep_rad: 0.9,
            },
            CoursePrimitive::Straight { length_m: 150.0 },
        ],
        2,
        config.layout,
    )
}

/// Synthesize the frame pool for the given course and noise settings.
pub fn prepare(config: &PipelineConfig, course: &RoadCourse) -> Result<BenchWorkload> {
    let usable = course.total_length();
    let mut frames = Vec::with_capacity(FRAME_POOL);
    for i in 0..FRAME_POOL {
        let ego_s = (i as f64 * config.ego_step_m) % usable;
        let scene = generate_scene(course, ego_s, config.seed + i as u64)?;
        let mut noise = config.noise;
        noise.seed = config.seed + i as u64;
        frames.push(simulate_detections(
            &scene,
            &noise,
            config.detection_range_m,
        )?);
    }
    Ok(BenchWorkload { frames })
}

/// Run `iterations` timed fits after [`WARMUP_ITERATIONS`] untimed ones.
/// Returns the per-frame statistics in milliseconds.
pub fn run(config: &PipelineConfig, workload: &BenchWorkload, iterations: usize) -> Result<RuntimeStats> {
    let mut samples_ms = Vec::with_capacity(iterations);
    let total = WARMUP_ITERATIONS + iterations;
    for iter in 0..total {
        let detections = &workload.frames[iter % workload.frames.len()];
        let start = Instant::now();
        let model = fit_lanes(
            detections,
            &config.layout,
            config.extrapolation_m,
            config.marking_mode,
        );
        let elapsed = start.elapsed();
        // Failed fits still count: the pipeline bails early on bad frames,
        // and that time is part of the per-frame budget.
        std::hint::black_box(&model);
        if iter >= WARMUP_ITERATIONS {
            samples_ms.push(elapsed.as_secs_f64() * 1e3);
        }
    }
    Ok(runtime_stats(&samples_ms)?)
}
