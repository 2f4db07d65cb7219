//! Evaluation suite: image-space accuracy under a pinhole camera,
//! lateral 3D accuracy, a lane-safety score, and runtime statistics.
//!
//! Conventions shared by the accuracy metrics:
//! - predicted markings are matched to ground-truth curves by lateral
//!   order (both run left to right);
//! - thresholds are inclusive: a deviation exactly at the threshold
//!   still counts as correct;
//! - counting is per ground-truth sample across all matched markings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{polyline, Vec3};
use crate::lanes::LaneModel;

/// Default pixel threshold for a correct 2D detection.
pub const DEFAULT_THRESHOLD_PX: f64 = 5.0;

/// Default lateral true-positive threshold, meters.
pub const DEFAULT_LATERAL_THRESHOLD_M: f64 = 0.10;

/// Camera mounting pose in the vehicle frame.
///
/// Yaw about z, then pitch about the left (y) axis (positive pitch tilts
/// the optical axis down), then roll about the forward axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraPose {
    pub position: Vec3,
    pub yaw_rad: f64,
    pub pitch_rad: f64,
    pub roll_rad: f64,
}

impl Default for CameraPose {
    fn default() -> Self {
        // 1.6 m above the rear-axle ground point, looking straight ahead.
        CameraPose {
            position: Vec3::new(0.0, 0.0, 1.6),
            yaw_rad: 0.0,
            pitch_rad: 0.0,
            roll_rad: 0.0,
        }
    }
}

/// Ideal pinhole camera: focal length from the horizontal field of view,
/// principal point at the image center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width_px: u32,
    pub height_px: u32,
    pub hfov_deg: f64,
    pub pose: CameraPose,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            width_px: 1920,
            height_px: 1080,
            hfov_deg: 110.0,
            pose: CameraPose::default(),
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidParameter {
                what: "camera resolution must be positive".into(),
            });
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::InvalidParameter {
                what: format!("horizontal FOV {} deg outside (0, 180)", self.hfov_deg),
            });
        }
        if !self.pose.position.is_finite() {
            return Err(Error::InvalidParameter {
                what: "camera position is not finite".into(),
            });
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        (self.width_px as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    fn to_camera_frame(&self, p: Vec3) -> Vec3 {
        let d = p - self.pose.position;
        // Inverse of R = Rz(yaw)·Ry(pitch)·Rx(roll): apply transposes in
        // reverse order. Camera frame keeps the vehicle convention:
        // x forward (depth), y left, z up.
        let (sy, cy) = self.pose.yaw_rad.sin_cos();
        let v = Vec3::new(cy * d.x + sy * d.y, -sy * d.x + cy * d.y, d.z);
        let (sp, cp) = self.pose.pitch_rad.sin_cos();
        let v = Vec3::new(cp * v.x - sp * v.z, v.y, sp * v.x + cp * v.z);
        let (sr, cr) = self.pose.roll_rad.sin_cos();
        Vec3::new(v.x, cr * v.y + sr * v.z, -sr * v.y + cr * v.z)
    }
}

/// Result of projecting a 3D point: pixel coordinates, or a marker for
/// points at or behind the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    Behind,
}

impl Projection {
    pub fn pixel(self) -> Option<(f64, f64)> {
        match self {
            Projection::Pixel { u, v } => Some((u, v)),
            Projection::Behind => None,
        }
    }
}

/// Project a vehicle-frame point through the pinhole model. Points behind
/// the image plane are flagged, never projected.
pub fn project(camera: &CameraModel, p: Vec3) -> Projection {
    let c = camera.to_camera_frame(p);
    if c.x <= 0.0 {
        return Projection::Behind;
    }
    let f = camera.focal_px();
    let u = camera.width_px as f64 / 2.0 - f * c.y / c.x;
    let v = camera.height_px as f64 / 2.0 - f * c.z / c.x;
    Projection::Pixel { u, v }
}

fn visible(camera: &CameraModel, u: f64, v: f64) -> bool {
    (0.0..=camera.width_px as f64).contains(&u) && (0.0..=camera.height_px as f64).contains(&v)
}

/// Predicted `u` at image row `v` by linear interpolation between
/// consecutive projected polyline vertices straddling the row; of several
/// crossings the one nearest `target_u` wins.
fn u_at_row(projected: &[Projection], v: f64, target_u: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |u: f64| {
        if best.map_or(true, |b| (u - target_u).abs() < (b - target_u).abs()) {
            best = Some(u);
        }
    };
    for w in projected.windows(2) {
        let (Some((u1, v1)), Some((u2, v2))) = (w[0].pixel(), w[1].pixel()) else {
            continue; // runs broken by behind-camera points
        };
        if (v1 - v) * (v2 - v) > 0.0 {
            continue;
        }
        if (v2 - v1).abs() < 1e-12 {
            if (v1 - v).abs() < 1e-9 {
                consider(u1);
                consider(u2);
            }
            continue;
        }
        let r = (v - v1) / (v2 - v1);
        consider(u1 + r * (u2 - u1));
    }
    best
}

/// Per-marking hit/total counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HitCount {
    pub hits: usize,
    pub total: usize,
}

impl HitCount {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

/// Image-space accuracy with per-marking counters. `accuracy` is absent
/// when no ground-truth sample is visible in the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelAccuracy {
    pub accuracy: Option<f64>,
    pub per_marking: Vec<HitCount>,
}

/// Fraction of visible ground-truth samples whose image row is matched by
/// the corresponding predicted marking within `threshold_px` columns
/// (inclusive). Ground-truth markings without a predicted counterpart
/// count as misses.
pub fn accuracy_2d(
    pred: &LaneModel,
    gt: &[Vec<Vec3>],
    camera: &CameraModel,
    threshold_px: f64,
) -> Result<PixelAccuracy> {
    camera.validate()?;
    if !(threshold_px.is_finite() && threshold_px > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("pixel threshold {threshold_px}"),
        });
    }
    let projected_pred: Vec<Vec<Projection>> = pred
        .markings()
        .iter()
        .map(|m| m.points().iter().map(|p| project(camera, *p)).collect())
        .collect();

    let mut per_marking = Vec::with_capacity(gt.len());
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, gt_marking) in gt.iter().enumerate() {
        let mut counter = HitCount::default();
        for gp in gt_marking {
            let Some((gu, gv)) = project(camera, *gp).pixel() else {
                continue;
            };
            if !visible(camera, gu, gv) {
                continue;
            }
            counter.total += 1;
            if let Some(proj) = projected_pred.get(i) {
                if let Some(pu) = u_at_row(proj, gv, gu) {
                    if (pu - gu).abs() <= threshold_px {
                        counter.hits += 1;
                    }
                }
            }
        }
        hits += counter.hits;
        total += counter.total;
        per_marking.push(counter);
    }
    Ok(PixelAccuracy {
        accuracy: (total > 0).then(|| hits as f64 / total as f64),
        per_marking,
    })
}

/// Lateral 3D accuracy with per-marking counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralAccuracy {
    pub accuracy: f64,
    pub per_marking: Vec<HitCount>,
    /// Set when the prediction had nothing to match against.
    pub empty_prediction: bool,
}

/// Fraction of ground-truth samples whose lateral distance to the matched
/// predicted marking is within `threshold_m` (inclusive).
///
/// The lateral distance is measured in the ground plane, perpendicular to
/// the local ground-truth tangent: a sideways ray from the sample either
/// hits the predicted polyline at distance |s| or misses (counted as
/// wrong). The ground-truth lists define the evaluation range; samples
/// beyond the prediction's reach therefore penalize short predictions.
/// With `restrict_to_pred_range` only samples within the prediction's
/// detection range enter the count (the safety score's convention).
pub fn accuracy_3d(
    pred: &LaneModel,
    gt: &[Vec<Vec3>],
    threshold_m: f64,
    restrict_to_pred_range: bool,
) -> Result<LateralAccuracy> {
    if !(threshold_m.is_finite() && threshold_m > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("lateral threshold {threshold_m} m"),
        });
    }
    let mut per_marking = Vec::with_capacity(gt.len());
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, gt_marking) in gt.iter().enumerate() {
        let mut counter = HitCount::default();
        let pred_points = pred.markings().get(i).map(|m| m.points());
        let mut along = 0.0_f64;
        for (k, gp) in gt_marking.iter().enumerate() {
            if k > 0 {
                along += gt_marking[k - 1].horizontal().distance(gp.horizontal());
            }
            if restrict_to_pred_range && along > pred.detection_range_m() + 1e-9 {
                continue;
            }
            counter.total += 1;
            let Some(points) = pred_points else { continue };
            // Local ground-truth tangent from neighboring samples.
            let a = if k > 0 { gt_marking[k - 1] } else { *gp };
            let b = if k + 1 < gt_marking.len() {
                gt_marking[k + 1]
            } else {
                *gp
            };
            let Some(tangent) = (b - a).horizontal().normalized() else {
                continue; // single-sample list: no lateral direction
            };
            let normal = Vec3::UP.cross(tangent);
            if let Some(s) = polyline::min_abs_crossing(points, *gp, normal) {
                if s <= threshold_m {
                    counter.hits += 1;
                }
            }
        }
        hits += counter.hits;
        total += counter.total;
        per_marking.push(counter);
    }
    let empty = pred.markings().is_empty() || total == 0;
    Ok(LateralAccuracy {
        accuracy: if total > 0 {
            hits as f64 / total as f64
        } else {
            0.0
        },
        per_marking,
        empty_prediction: empty,
    })
}

/// Reaction + braking parameters behind the required detection range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyParams {
    pub t_react_s: f64,
    pub a_brake_mps2: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        SafetyParams {
            t_react_s: 1.0,
            a_brake_mps2: 4.0,
        }
    }
}

impl SafetyParams {
    /// Reaction plus braking distance at the given speed.
    pub fn required_range_m(&self, speed_mps: f64) -> f64 {
        speed_mps * self.t_react_s + speed_mps * speed_mps / (2.0 * self.a_brake_mps2)
    }
}

/// Two-factor lane-safety score in [0, 1]: lateral accuracy over the
/// predicted range, times how much of the speed-dependent required range
/// (reaction + braking distance) the prediction covers.
pub fn safety_score(
    pred: &LaneModel,
    gt: &[Vec<Vec3>],
    ego_speed_mps: f64,
    lateral_threshold_m: f64,
    params: &SafetyParams,
) -> Result<f64> {
    if !(ego_speed_mps.is_finite() && ego_speed_mps >= 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("ego speed {ego_speed_mps} m/s"),
        });
    }
    let lateral = accuracy_3d(pred, gt, lateral_threshold_m, true)?.accuracy;
    let required = params.required_range_m(ego_speed_mps);
    let range_component = if required <= 0.0 {
        1.0
    } else {
        (pred.detection_range_m() / required).min(1.0)
    };
    Ok(lateral * range_component)
}

/// Mean, population standard deviation, and nearest-rank 95th percentile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub mean_ms: f64,
    pub sigma_ms: f64,
    pub q95_ms: f64,
}

/// Aggregate per-frame timings (milliseconds).
pub fn runtime_stats(samples_ms: &[f64]) -> Result<RuntimeStats> {
    if samples_ms.is_empty() {
        return Err(Error::InsufficientInput { needed: 1, got: 0 });
    }
    let n = samples_ms.len() as f64;
    let mean = samples_ms.iter().sum::<f64>() / n;
    let var = samples_ms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let mut sorted = samples_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * n).ceil() as usize).clamp(1, sorted.len());
    Ok(RuntimeStats {
        mean_ms: mean,
        sigma_ms: var.sqrt(),
        q95_ms: sorted[rank - 1],
    })
}

/// Per-marking evaluation detail inside a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkingEval {
    pub index: usize,
    pub acc2d: Option<f64>,
    pub acc3d: Option<f64>,
    pub hits_3d: usize,
    pub total_3d: usize,
}

/// All metrics for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame_id: u64,
    pub acc2d: Option<f64>,
    pub acc3d: f64,
    pub safety: f64,
    pub detection_range_m: f64,
    pub empty_prediction: bool,
    pub per_marking: Vec<MarkingEval>,
    /// Fit-stage error tag when the frame produced no model.
    pub error: Option<String>,
}

impl FrameEval {
    /// The all-zero evaluation for a frame whose fit failed.
    pub fn failed(frame_id: u64, error: String) -> Self {
        FrameEval {
            frame_id,
            acc2d: None,
            acc3d: 0.0,
            safety: 0.0,
            detection_range_m: 0.0,
            empty_prediction: true,
            per_marking: Vec::new(),
            error: Some(error),
        }
    }
}

/// Aggregated evaluation: per-frame results plus means over frames.
/// `acc2d` averages only frames where the metric was defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc2d: Option<f64>,
    pub acc3d: f64,
    pub safety: f64,
    pub detection_range_m: f64,
    pub per_marking: Vec<MarkingEval>,
    pub runtime: Option<RuntimeStats>,
    pub frames: Vec<FrameEval>,
}

/// Evaluate one fitted frame against its ground truth.
pub fn evaluate_frame(
    frame_id: u64,
    pred: &LaneModel,
    gt: &[Vec<Vec3>],
    camera: &CameraModel,
    threshold_px: f64,
    lateral_threshold_m: f64,
    ego_speed_mps: f64,
    safety_params: &SafetyParams,
) -> Result<FrameEval> {
    let px = accuracy_2d(pred, gt, camera, threshold_px)?;
    let lat = accuracy_3d(pred, gt, lateral_threshold_m, false)?;
    let safety = safety_score(pred, gt, ego_speed_mps, lateral_threshold_m, safety_params)?;
    let per_marking = lat
        .per_marking
        .iter()
        .enumerate()
        .map(|(index, c3)| MarkingEval {
            index,
            acc2d: px.per_marking.get(index).and_then(HitCount::accuracy),
            acc3d: c3.accuracy(),
            hits_3d: c3.hits,
            total_3d: c3.total,
        })
        .collect();
    Ok(FrameEval {
        frame_id,
        acc2d: px.accuracy,
        acc3d: lat.accuracy,
        safety,
        detection_range_m: pred.detection_range_m(),
        empty_prediction: lat.empty_prediction,
        per_marking,
        error: None,
    })
}

/// Fold per-frame evaluations into the aggregate report.
pub fn aggregate(frames: Vec<FrameEval>, runtime: Option<RuntimeStats>) -> EvalReport {
    let n = frames.len() as f64;
    let acc2d_frames: Vec<f64> = frames.iter().filter_map(|f| f.acc2d).collect();
    let acc2d = (!acc2d_frames.is_empty())
        .then(|| acc2d_frames.iter().sum::<f64>() / acc2d_frames.len() as f64);
    let (acc3d, safety, range) = if frames.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            frames.iter().map(|f| f.acc3d).sum::<f64>() / n,
            frames.iter().map(|f| f.safety).sum::<f64>() / n,
            frames.iter().map(|f| f.detection_range_m).sum::<f64>() / n,
        )
    };
    // Mean per-marking 3D accuracy by index over frames carrying it.
    let max_markings = frames.iter().map(|f| f.per_marking.len()).max().unwrap_or(0);
    let mut per_marking = Vec::with_capacity(max_markings);
    for index in 0..max_markings {
        let (mut hits, mut total) = (0usize, 0usize);
        let mut acc2: Vec<f64> = Vec::new();
        for f in &frames {
            if let Some(m) = f.per_marking.get(index) {
                hits += m.hits_3d;
                total += m.total_3d;
                if let Some(a) = m.acc2d {
                    acc2.push(a);
                }
            }
        }
        per_marking.push(MarkingEval {
            index,
            acc2d: (!acc2.is_empty()).then(|| acc2.iter().sum::<f64>() / acc2.len() as f64),
            acc3d: (total > 0).then(|| hits as f64 / total as f64),
            hits_3d: hits,
            total_3d: total,
        });
    }
    EvalReport {
        acc2d,
        acc3d,
        safety,
        detection_range_m: range,
        per_marking,
        runtime,
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanes::{fit_lanes, DelineatorDetection, MarkingMode, RoadLayoutConfig};
    use crate::scene::{generate_scene, sample_ground_truth, CoursePrimitive, RoadCourse};
    use approx::assert_relative_eq;

    fn camera() -> CameraModel {
        CameraModel::default()
    }

    #[test]
    fn optical_axis_hits_the_principal_point() {
        let p = project(&camera(), Vec3::new(10.0, 0.0, 1.6));
        let (u, v) = p.pixel().unwrap();
        assert_relative_eq!(u, 960.0, epsilon = 1e-9);
        assert_relative_eq!(v, 540.0, epsilon = 1e-9);
    }

    #[test]
    fn half_fov_reaches_the_image_edge() {
        let y = 10.0 * 55f64.to_radians().tan();
        let (u, _) = project(&camera(), Vec3::new(10.0, y, 1.6)).pixel().unwrap();
        assert_relative_eq!(u, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn points_behind_the_camera_are_flagged() {
        assert_eq!(project(&camera(), Vec3::new(-1.0, 0.0, 1.6)), Projection::Behind);
        assert_eq!(project(&camera(), Vec3::new(0.0, 2.0, 0.0)), Projection::Behind);
    }

    fn straight_scene_model() -> (crate::lanes::LaneModel, Vec<Vec<Vec3>>, f64) {
        let course = RoadCourse::new(
            vec![CoursePrimitive::Straight { length_m: 200.0 }],
            2,
            RoadLayoutConfig::default(),
        )
        .unwrap();
        let scene = generate_scene(&course, 0.0, 0).unwrap();
        let dets: Vec<DelineatorDetection> = scene
            .delineators_left
            .iter()
            .chain(&scene.delineators_right)
            .filter(|p| p.x >= 0.0 && p.x <= 100.0)
            .map(|p| DelineatorDetection::new(*p, 1.0))
            .collect();
        let model = fit_lanes(
            &dets,
            &RoadLayoutConfig::default(),
            10.0,
            MarkingMode::ShiftFromBoundaries,
        )
        .unwrap();
        let gt = sample_ground_truth(&scene, 1.0, 100.0).unwrap();
        (model, gt, scene.ego_speed_mps)
    }

    #[test]
    fn perfect_prediction_scores_one_everywhere() {
        let (model, gt, speed) = straight_scene_model();
        let px = accuracy_2d(&model, &gt, &camera(), DEFAULT_THRESHOLD_PX).unwrap();
        assert_eq!(px.accuracy, Some(1.0));
        let lat = accuracy_3d(&model, &gt, DEFAULT_LATERAL_THRESHOLD_M, false).unwrap();
        assert_eq!(lat.accuracy, 1.0);
        let s = safety_score(
            &model,
            &gt,
            speed,
            DEFAULT_LATERAL_THRESHOLD_M,
            &SafetyParams::default(),
        )
        .unwrap();
        assert_eq!(s, 1.0);
    }

    /// Build a model whose markings are the ground truth shifted laterally.
    fn shifted_model(base: &crate::lanes::LaneModel, dy: f64) -> crate::lanes::LaneModel {
        let markings: Vec<crate::geom::SampledCurve> = base
            .markings()
            .iter()
            .map(|m| {
                let pts: Vec<Vec3> = m
                    .points()
                    .iter()
                    .map(|p| Vec3::new(p.x, p.y + dy, p.z))
                    .collect();
                crate::geom::SampledCurve::new(pts, m.params().to_vec()).unwrap()
            })
            .collect();
        crate::lanes::LaneModel::from_parts(
            base.left_boundary().clone(),
            base.right_boundary().clone(),
            markings,
            base.lane_count(),
            base.detection_range_m(),
        )
        .unwrap()
    }

    #[test]
    fn large_lateral_shift_zeroes_2d_accuracy() {
        let (model, gt, _) = straight_scene_model();
        let shifted = shifted_model(&model, 5.0);
        let px = accuracy_2d(&shifted, &gt, &camera(), DEFAULT_THRESHOLD_PX).unwrap();
        // 5 m at under 100 m depth is far beyond 5 px.
        assert_eq!(px.accuracy, Some(0.0));
    }

    /// A lane model whose markings are hand-laid straight lines, free of
    /// fit-pipeline rounding; `dy` shifts them off the ground truth.
    fn exact_line_model(dy: f64) -> crate::lanes::LaneModel {
        let line = |y: f64| {
            let pts: Vec<Vec3> = (0..=200)
                .map(|i| Vec3::new(i as f64 * 0.5, y, 0.0))
                .collect();
            let params: Vec<f64> = (0..=200).map(|i| i as f64 * 0.5).collect();
            crate::geom::SampledCurve::new(pts, params).unwrap()
        };
        let chain = |y: f64| {
            crate::geom::BezierChain::from_waypoints(
                &[Vec3::new(0.0, y, 0.0), Vec3::new(100.0, y, 0.0)],
                &[Vec3::new(1.0, 0.0, 0.0); 2],
            )
            .unwrap()
        };
        crate::lanes::LaneModel::from_parts(
            chain(4.0),
            chain(-4.0),
            vec![line(3.5 + dy), line(dy), line(-3.5 + dy)],
            2,
            100.0,
        )
        .unwrap()
    }

    fn exact_line_gt() -> Vec<Vec<Vec3>> {
        [3.5, 0.0, -3.5]
            .iter()
            .map(|&y| (0..=100).map(|i| Vec3::new(i as f64, y, 0.0)).collect())
            .collect()
    }

    #[test]
    fn lateral_threshold_is_inclusive_at_the_boundary() {
        let gt = exact_line_gt();
        // Offset equal to the threshold in exact binary arithmetic
        // (0.125 = 2^-3, exact at every marking's magnitude): the
        // comparison must be <=, not <.
        let at = exact_line_model(0.125);
        assert_eq!(accuracy_3d(&at, &gt, 0.125, false).unwrap().accuracy, 1.0);
        // Just below the measured distance: everything fails, so the
        // boundary really is the dividing line.
        assert_eq!(
            accuracy_3d(&at, &gt, 0.124999, false).unwrap().accuracy,
            0.0
        );
        // The spec's literal pair at the 0.10 m default: a 0.101 m offset
        // fails every sample...
        let past = exact_line_model(0.101);
        assert_eq!(accuracy_3d(&past, &gt, 0.10, false).unwrap().accuracy, 0.0);
        // ...and a 0.10 m offset passes where the arithmetic is exact
        // (the centerline at y = 0).
        let at_default = exact_line_model(0.10);
        let lat = accuracy_3d(&at_default, &gt, 0.10, false).unwrap();
        assert_eq!(lat.per_marking[1].accuracy(), Some(1.0));
    }

    #[test]
    fn short_prediction_scores_the_covered_fraction() {
        let (model, gt, _) = straight_scene_model();
        // Truncate every marking at 50 m.
        let markings: Vec<crate::geom::SampledCurve> = model
            .markings()
            .iter()
            .map(|m| {
                let keep: Vec<Vec3> = m
                    .points()
                    .iter()
                    .filter(|p| p.x <= 50.0)
                    .cloned()
                    .collect();
                let params: Vec<f64> = m.params()[..keep.len()].to_vec();
                crate::geom::SampledCurve::new(keep, params).unwrap()
            })
            .collect();
        let short = crate::lanes::LaneModel::from_parts(
            model.left_boundary().clone(),
            model.right_boundary().clone(),
            markings,
            model.lane_count(),
            50.0,
        )
        .unwrap();
        let lat = accuracy_3d(&short, &gt, DEFAULT_LATERAL_THRESHOLD_M, false).unwrap();
        // 51 of 101 samples per marking lie within 50 m.
        assert_relative_eq!(lat.accuracy, 51.0 / 101.0, epsilon = 1e-12);
        let px = accuracy_2d(&short, &gt, &camera(), DEFAULT_THRESHOLD_PX).unwrap();
        assert!(px.accuracy.unwrap() <= 0.55);
    }

    #[test]
    fn safety_degrades_with_detection_range() {
        let (model, gt, _) = straight_scene_model();
        let required = SafetyParams::default().required_range_m(13.89);
        assert_relative_eq!(required, 38.0, epsilon = 0.1);
        // Clamp the model's range to 19 m: half the requirement.
        let half = crate::lanes::LaneModel::from_parts(
            model.left_boundary().clone(),
            model.right_boundary().clone(),
            model.markings().to_vec(),
            model.lane_count(),
            19.0,
        )
        .unwrap();
        let s = safety_score(&half, &gt, 13.89, 0.10, &SafetyParams::default()).unwrap();
        assert_relative_eq!(s, 19.0 / required, epsilon = 1e-9);
    }

    #[test]
    fn zero_speed_needs_no_range() {
        let (model, gt, _) = straight_scene_model();
        let s = safety_score(&model, &gt, 0.0, 0.10, &SafetyParams::default()).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn runtime_stats_of_a_single_sample() {
        let s = runtime_stats(&[2.0]).unwrap();
        assert_eq!((s.mean_ms, s.sigma_ms, s.q95_ms), (2.0, 0.0, 2.0));
    }

    #[test]
    fn runtime_stats_of_uniform_integers() {
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let s = runtime_stats(&samples).unwrap();
        assert_relative_eq!(s.mean_ms, 50.5, epsilon = 1e-12);
        assert_relative_eq!(s.sigma_ms, (9999.0_f64 / 12.0).sqrt(), epsilon = 1e-9);
        assert_eq!(s.q95_ms, 95.0);
    }

    #[test]
    fn runtime_stats_of_constant_list() {
        let s = runtime_stats(&[3.0; 7]).unwrap();
        assert_eq!((s.mean_ms, s.sigma_ms, s.q95_ms), (3.0, 0.0, 3.0));
    }

    #[test]
    fn runtime_stats_reject_empty_input() {
        assert!(matches!(
            runtime_stats(&[]),
            Err(Error::InsufficientInput { .. })
        ));
    }

    #[test]
    fn raising_the_threshold_never_hurts() {
        let (model, gt, _) = straight_scene_model();
        let shifted = shifted_model(&model, 0.07);
        let mut last = 0.0;
        for thr in [0.01, 0.05, 0.07, 0.10, 0.20] {
            let a = accuracy_3d(&shifted, &gt, thr, false).unwrap().accuracy;
            assert!(a >= last);
            last = a;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn metrics_are_translation_invariant() {
        let (model, gt, speed) = straight_scene_model();
        let (dx, dy) = (7.25, -3.5);
        let shift = |p: &Vec3| Vec3::new(p.x + dx, p.y + dy, p.z);
        let gt2: Vec<Vec<Vec3>> = gt
            .iter()
            .map(|m| m.iter().map(&shift).collect())
            .collect();
        let markings: Vec<crate::geom::SampledCurve> = model
            .markings()
            .iter()
            .map(|m| {
                crate::geom::SampledCurve::new(
                    m.points().iter().map(&shift).collect(),
                    m.params().to_vec(),
                )
                .unwrap()
            })
            .collect();
        let moved = crate::lanes::LaneModel::from_parts(
            model.left_boundary().clone(),
            model.right_boundary().clone(),
            markings,
            model.lane_count(),
            model.detection_range_m(),
        )
        .unwrap();
        let mut cam2 = camera();
        cam2.pose.position = Vec3::new(dx, dy, 1.6);

        let a0 = accuracy_2d(&model, &gt, &camera(), 5.0).unwrap().accuracy;
        let a1 = accuracy_2d(&moved, &gt2, &cam2, 5.0).unwrap().accuracy;
        assert_eq!(a0, a1);
        let b0 = accuracy_3d(&model, &gt, 0.10, false).unwrap().accuracy;
        let b1 = accuracy_3d(&moved, &gt2, 0.10, false).unwrap().accuracy;
        assert!((b0 - b1).abs() < 1e-9);
        let s0 = safety_score(&model, &gt, speed, 0.10, &SafetyParams::default()).unwrap();
        let s1 = safety_score(&moved, &gt2, speed, 0.10, &SafetyParams::default()).unwrap();
        assert!((s0 - s1).abs() < 1e-9);
    }

    #[test]
    fn no_visible_ground_truth_reports_absent() {
        let (model, _, _) = straight_scene_model();
        // All ground truth behind the camera.
        let gt = vec![vec![Vec3::new(-10.0, 3.5, 0.0), Vec3::new(-5.0, 3.5, 0.0)]];
        let px = accuracy_2d(&model, &gt, &camera(), 5.0).unwrap();
        assert_eq!(px.accuracy, None);
    }
}
