//! Synthetic ground-truth road scenes.
//!
//! Roads are chains of straight and circular-arc primitives with analytic
//! centerlines, so lane markings and delineator positions come out exact;
//! no curve fitting anywhere on the oracle side. Detector imperfections
//! (position noise, dropout, false positives) are simulated on top with a
//! seeded RNG, bitwise reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{SampledCurve, Vec3};
use crate::lanes::{DelineatorDetection, RoadLayoutConfig, SideHint};

/// Sampling step for stored ground-truth markings, meters.
pub const GT_STEP_M: f64 = 0.5;

/// Smallest plausible rural-road arc radius, meters.
pub const MIN_ARC_RADIUS_M: f64 = 50.0;

/// Default ego speed: 50 km/h.
pub const DEFAULT_EGO_SPEED_MPS: f64 = 13.89;

/// One road-course building block. Arcs turn left for positive sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoursePrimitive {
    Straight { length_m: f64 },
    Arc { radius_m: f64, sweep_rad: f64 },
}

impl CoursePrimitive {
    pub fn length(&self) -> f64 {
        match *self {
            CoursePrimitive::Straight { length_m } => length_m,
            CoursePrimitive::Arc { radius_m, sweep_rad } => radius_m * sweep_rad.abs(),
        }
    }

    /// Signed curvature (1/m), positive turning left.
    fn curvature(&self) -> f64 {
        match *self {
            CoursePrimitive::Straight { .. } => 0.0,
            CoursePrimitive::Arc { radius_m, sweep_rad } => sweep_rad.signum() / radius_m,
        }
    }
}

/// A parametric road: primitives chained tangent-continuously starting at
/// the origin heading +x, with a lane count and layout constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadCourse {
    pub segments: Vec<CoursePrimitive>,
    pub lane_count: usize,
    pub layout: RoadLayoutConfig,
}

impl RoadCourse {
    pub fn new(
        segments: Vec<CoursePrimitive>,
        lane_count: usize,
        layout: RoadLayoutConfig,
    ) -> Result<Self> {
        let course = RoadCourse {
            segments,
            lane_count,
            layout,
        };
        course.validate()?;
        Ok(course)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.segments.is_empty() {
            return Err(Error::InvalidParameter {
                what: "course needs at least one primitive".into(),
            });
        }
        if self.lane_count == 0 {
            return Err(Error::InvalidParameter {
                what: "course lane count must be at least 1".into(),
            });
        }
        for (i, seg) in self.segments.iter().enumerate() {
            match *seg {
                CoursePrimitive::Straight { length_m } => {
                    if !(length_m.is_finite() && length_m > 0.0) {
                        return Err(Error::InvalidParameter {
                            what: format!("segment {i}: straight length {length_m} m"),
                        });
                    }
                }
                CoursePrimitive::Arc { radius_m, sweep_rad } => {
                    if !(radius_m.is_finite() && radius_m >= MIN_ARC_RADIUS_M) {
                        return Err(Error::InvalidParameter {
                            what: format!(
                                "segment {i}: arc radius {radius_m} m below the {MIN_ARC_RADIUS_M} m rural-road bound"
                            ),
                        });
                    }
                    if !(sweep_rad.is_finite() && sweep_rad != 0.0) {
                        return Err(Error::InvalidParameter {
                            what: format!("segment {i}: arc sweep {sweep_rad} rad"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(CoursePrimitive::length).sum()
    }

    /// Centerline pose at arc length `s`: world position and heading.
    pub fn pose_at(&self, s: f64) -> Result<(Vec3, f64)> {
        let total = self.total_length();
        if !(0.0..=total + 1e-9).contains(&s) || s.is_nan() {
            return Err(Error::OutOfCourse { s, length: total });
        }
        let mut pos = Vec3::ZERO;
        let mut heading = 0.0_f64;
        let mut remaining = s;
        for seg in &self.segments {
            let len = seg.length();
            let step = remaining.min(len);
            let (p, h) = advance(pos, heading, seg, step);
            if remaining <= len {
                return Ok((p, h));
            }
            pos = p;
            heading = h;
            remaining -= len;
        }
        Ok((pos, heading))
    }

    /// World point at centerline arc length `s`, shifted `lateral` meters
    /// to the left of the travel direction.
    pub fn point_at(&self, s: f64, lateral: f64) -> Result<Vec3> {
        let (pos, heading) = self.pose_at(s)?;
        Ok(pos + left_normal(heading) * lateral)
    }

    /// Centerline arc lengths where a line at constant `lateral` offset
    /// passes multiples of `spacing` of its own arc length. Used to place
    /// posts "every 30 m" as measured along the post line, not the
    /// centerline.
    fn stations_along_offset(&self, lateral: f64, spacing: f64) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut offset_len = 0.0; // arc length along the offset line
        let mut s = 0.0;
        let mut next = spacing;
        for seg in &self.segments {
            let len = seg.length();
            // d(offset arc)/d(center arc) is constant per primitive.
            let rate = (1.0 - lateral * seg.curvature()).max(0.0);
            let end = offset_len + rate * len;
            while next <= end + 1e-9 {
                if rate > 0.0 {
                    out.push(s + (next - offset_len) / rate);
                }
                next += spacing;
            }
            offset_len = end;
            s += len;
        }
        out
    }
}

fn left_normal(heading: f64) -> Vec3 {
    Vec3::new(-heading.sin(), heading.cos(), 0.0)
}

fn advance(pos: Vec3, heading: f64, seg: &CoursePrimitive, ds: f64) -> (Vec3, f64) {
    match *seg {
        CoursePrimitive::Straight { .. } => (
            pos + Vec3::new(heading.cos(), heading.sin(), 0.0) * ds,
            heading,
        ),
        CoursePrimitive::Arc { radius_m, sweep_rad } => {
            let sign = sweep_rad.signum();
            let dpsi = sign * ds / radius_m;
            let center = pos + left_normal(heading) * (sign * radius_m);
            let from_center = pos - center;
            let rotated = Vec3::new(
                from_center.x * dpsi.cos() - from_center.y * dpsi.sin(),
                from_center.x * dpsi.sin() + from_center.y * dpsi.cos(),
                0.0,
            );
            (center + rotated, heading + dpsi)
        }
    }
}

/// Detector-imperfection model for simulated delineator detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Per-axis Gaussian position noise, meters.
    pub position_sigma_m: f64,
    /// Probability that an individual post goes undetected.
    pub dropout_prob: f64,
    /// Expected false positives per 100 m of visible road.
    pub false_positive_rate_per_100m: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            position_sigma_m: 0.0,
            dropout_prob: 0.0,
            false_positive_rate_per_100m: 0.0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.position_sigma_m.is_finite() && self.position_sigma_m >= 0.0) {
            return Err(Error::InvalidParameter {
                what: format!("position sigma {} m", self.position_sigma_m),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidParameter {
                what: format!("dropout probability {} outside [0, 1)", self.dropout_prob),
            });
        }
        if !(self.false_positive_rate_per_100m.is_finite()
            && self.false_positive_rate_per_100m >= 0.0)
        {
            return Err(Error::InvalidParameter {
                what: format!(
                    "false positive rate {} per 100 m",
                    self.false_positive_rate_per_100m
                ),
            });
        }
        Ok(())
    }
}

/// Detector-error presets roughly spanning LiDAR-like to camera-like
/// position accuracy.
pub const SIGMA_PRESETS_M: [f64; 3] = [0.05, 0.15, 0.30];

/// A ground-truth road scene expressed in the ego frame.
///
/// `gt_markings` and the delineator lists are ego-frame; `ego_pose` records
/// where that frame sits on the course (world coordinates) so scenes taken
/// at different ego positions can be re-aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadScene {
    pub course: RoadCourse,
    /// World pose of the ego: position and heading.
    pub ego_position: Vec3,
    pub ego_heading_rad: f64,
    /// Centerline arc length of the ego on the course.
    pub ego_arclength_m: f64,
    pub ego_speed_mps: f64,
    /// Lane markings left to right, `lane_count + 1` of them, sampled every
    /// [`GT_STEP_M`]; parameters are world arc length.
    pub gt_markings: Vec<SampledCurve>,
    /// Delineator base points per side, ordered along the road.
    pub delineators_left: Vec<Vec3>,
    pub delineators_right: Vec<Vec3>,
    /// Seed this scene was generated under (recorded for reproducibility).
    pub seed: u64,
}

impl RoadScene {
    /// Transform a world point into this scene's ego frame.
    pub fn world_to_ego(&self, p: Vec3) -> Vec3 {
        let d = p - self.ego_position;
        let (sin, cos) = self.ego_heading_rad.sin_cos();
        Vec3::new(cos * d.x + sin * d.y, -sin * d.x + cos * d.y, d.z)
    }

    /// Transform an ego-frame point back to world coordinates.
    pub fn ego_to_world(&self, p: Vec3) -> Vec3 {
        let (sin, cos) = self.ego_heading_rad.sin_cos();
        Vec3::new(
            cos * p.x - sin * p.y + self.ego_position.x,
            sin * p.x + cos * p.y + self.ego_position.y,
            p.z + self.ego_position.z,
        )
    }

    /// Half the paved width: centerline to outer marking.
    pub fn half_width(&self) -> f64 {
        self.course.lane_count as f64 * self.course.layout.lane_width_m / 2.0
    }
}

/// Build the analytic scene at `ego_arclength` along the course.
///
/// Markings are exact lateral offsets of the centerline; posts sit one
/// delineator offset outside each outer marking, spaced every
/// `layout.delineator_spacing_m` along that marking. Everything is
/// expressed in the ego frame.
pub fn generate_scene(course: &RoadCourse, ego_arclength: f64, rng_seed: u64) -> Result<RoadScene> {
    course.validate()?;
    let (ego_position, ego_heading_rad) = course.pose_at(ego_arclength)?;

    let half = course.lane_count as f64 * course.layout.lane_width_m / 2.0;
    let post_lateral = half + course.layout.delineator_offset_m;
    let total = course.total_length();

    let mut scene = RoadScene {
        course: course.clone(),
        ego_position,
        ego_heading_rad,
        ego_arclength_m: ego_arclength,
        ego_speed_mps: DEFAULT_EGO_SPEED_MPS,
        gt_markings: Vec::with_capacity(course.lane_count + 1),
        delineators_left: Vec::new(),
        delineators_right: Vec::new(),
        seed: rng_seed,
    };

    // Markings, left to right: lateral = half, half - w, ..., -half.
    for j in 0..=course.lane_count {
        let lateral = half - j as f64 * course.layout.lane_width_m;
        let mut points = Vec::new();
        let mut params = Vec::new();
        let mut s = 0.0;
        while s < total - 1e-9 {
            points.push(scene.world_to_ego(course.point_at(s, lateral)?));
            params.push(s);
            s += GT_STEP_M;
        }
        points.push(scene.world_to_ego(course.point_at(total, lateral)?));
        params.push(total);
        scene.gt_markings.push(SampledCurve::new(points, params)?);
    }

    // Posts: spaced along each outer marking, offset outward by the
    // delineator offset from that marking.
    let spacing = course.layout.delineator_spacing_m;
    for s in course.stations_along_offset(half, spacing) {
        scene
            .delineators_left
            .push(scene.world_to_ego(course.point_at(s, post_lateral)?));
    }
    for s in course.stations_along_offset(-half, spacing) {
        scene
            .delineators_right
            .push(scene.world_to_ego(course.point_at(s, -post_lateral)?));
    }

    Ok(scene)
}

/// Simulate a delineator detector: posts ahead of the ego within range,
/// independent dropout, per-axis Gaussian position noise, and uniformly
/// scattered false positives in a ±10 m corridor around the road.
/// Deterministic for a given `noise.seed`.
pub fn simulate_detections(
    scene: &RoadScene,
    noise: &NoiseConfig,
    max_range_m: f64,
) -> Result<Vec<DelineatorDetection>> {
    noise.validate()?;
    if !(max_range_m.is_finite() && max_range_m > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("max detection range {max_range_m} m"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let gauss = Normal::new(0.0, noise.position_sigma_m).map_err(|_| Error::InvalidParameter {
        what: "position sigma rejected by the normal distribution".into(),
    })?;

    let in_range = |p: &Vec3| p.x >= 0.0 && p.x <= max_range_m;
    let mut out = Vec::new();
    for side in [&scene.delineators_left, &scene.delineators_right] {
        for post in side.iter().filter(|p| in_range(p)) {
            if noise.dropout_prob > 0.0 && rng.gen::<f64>() < noise.dropout_prob {
                continue;
            }
            let jitter = if noise.position_sigma_m > 0.0 {
                Vec3::new(
                    gauss.sample(&mut rng),
                    gauss.sample(&mut rng),
                    gauss.sample(&mut rng),
                )
            } else {
                Vec3::ZERO
            };
            out.push(DelineatorDetection {
                position: *post + jitter,
                confidence: 1.0,
                side_hint: SideHint::Unknown,
            });
        }
    }

    if noise.false_positive_rate_per_100m > 0.0 {
        let lambda = noise.false_positive_rate_per_100m * max_range_m / 100.0;
        let count = Poisson::new(lambda)
            .map(|p| p.sample(&mut rng) as usize)
            .unwrap_or(0);
        let total = scene.course.total_length();
        let corridor = scene.half_width() + scene.course.layout.delineator_offset_m + 10.0;
        for _ in 0..count {
            let s_start = scene.ego_arclength_m;
            let s_end = (s_start + max_range_m).min(total);
            let s = rng.gen_range(s_start..=s_end);
            let lateral = rng.gen_range(-corridor..=corridor);
            let p = scene.world_to_ego(scene.course.point_at(s, lateral)?);
            if in_range(&p) {
                out.push(DelineatorDetection {
                    position: p,
                    confidence: rng.gen_range(0.0..1.0),
                    side_hint: SideHint::Unknown,
                });
            }
        }
    }
    Ok(out)
}

/// Analytic ground-truth marking points ahead of the ego, every `step_m`
/// out to `range_m` (clamped to the course end), in the ego frame.
/// One list per marking, ordered left to right.
pub fn sample_ground_truth(
    scene: &RoadScene,
    step_m: f64,
    range_m: f64,
) -> Result<Vec<Vec<Vec3>>> {
    if !(step_m.is_finite() && step_m > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("ground-truth step {step_m} m"),
        });
    }
    if !(range_m.is_finite() && range_m >= 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("ground-truth range {range_m} m"),
        });
    }
    let course = &scene.course;
    let half = scene.half_width();
    let end = (scene.ego_arclength_m + range_m).min(course.total_length());
    let mut out = Vec::with_capacity(course.lane_count + 1);
    for j in 0..=course.lane_count {
        let lateral = half - j as f64 * course.layout.lane_width_m;
        let mut points = Vec::new();
        let mut s = scene.ego_arclength_m;
        while s <= end + 1e-9 {
            points.push(scene.world_to_ego(course.point_at(s.min(end), lateral)?));
            s += step_m;
        }
        out.push(points);
    }
    Ok(out)
}
