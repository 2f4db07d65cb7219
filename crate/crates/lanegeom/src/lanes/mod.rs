//! From noisy delineator detections to a full lane model.
//!
//! The pipeline: partition detections into road sides, order them along
//! the road, estimate per-post tangents, thread a C1 Bézier chain through
//! each side, then shift the boundary chains laterally into lane markings
//! and centerlines. The lane count falls out of the cross-road post
//! spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{polyline, BezierChain, SampledCurve, Vec3};

/// Which side of the road a detection belongs to, if the detector knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideHint {
    Left,
    Right,
    #[default]
    Unknown,
}

/// One detected delineator post (base point, vehicle frame, meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelineatorDetection {
    pub position: Vec3,
    /// Detector score in [0, 1].
    pub confidence: f64,
    #[serde(default)]
    pub side_hint: SideHint,
}

impl DelineatorDetection {
    pub fn new(position: Vec3, confidence: f64) -> Self {
        DelineatorDetection {
            position,
            confidence,
            side_hint: SideHint::Unknown,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() {
            return Err(Error::InvalidParameter {
                what: "detection position is not finite".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameter {
                what: format!("detection confidence {} outside [0, 1]", self.confidence),
            });
        }
        Ok(())
    }
}

/// Standardized rural-road layout constants.
///
/// Defaults: 3.50 m lanes, posts 0.50 m outside the outer marking,
/// nominal 30 m post spacing along the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoadLayoutConfig {
    pub lane_width_m: f64,
    pub delineator_offset_m: f64,
    pub delineator_spacing_m: f64,
    /// Detections below this confidence are dropped before fitting.
    pub min_confidence: f64,
}

impl Default for RoadLayoutConfig {
    fn default() -> Self {
        RoadLayoutConfig {
            lane_width_m: 3.50,
            delineator_offset_m: 0.50,
            delineator_spacing_m: 30.0,
            min_confidence: 0.0,
        }
    }
}

impl RoadLayoutConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lane_width_m", self.lane_width_m),
            ("delineator_offset_m", self.delineator_offset_m),
            ("delineator_spacing_m", self.delineator_spacing_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    what: format!("{name} = {v} must be positive"),
                });
            }
        }
        if self.lane_width_m <= 2.0 * self.delineator_offset_m {
            return Err(Error::InvalidParameter {
                what: format!(
                    "lane width {} m must exceed twice the delineator offset {} m",
                    self.lane_width_m, self.delineator_offset_m
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::InvalidParameter {
                what: format!("min_confidence {} outside [0, 1]", self.min_confidence),
            });
        }
        Ok(())
    }
}

/// How interior centerlines are derived from the boundary chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkingMode {
    /// Shift the left boundary rightwards in lane-width steps.
    #[default]
    ShiftFromBoundaries,
    /// Chain the midpoints of corresponding left/right posts and shift
    /// that center chain outwards.
    MidpointCenterline,
}

/// The reconstructed road: boundary chains through the posts, all lane
/// markings ordered left to right (`lane_count + 1` of them), and the
/// range over which the model is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneModel {
    left_boundary: BezierChain,
    right_boundary: BezierChain,
    markings: Vec<SampledCurve>,
    lane_count: usize,
    detection_range_m: f64,
    /// Set when corresponding post pairs disagree on the lane count
    /// (e.g. a merging lane); the maximum count wins.
    lane_count_disagreement: bool,
}

impl LaneModel {
    /// Assemble a model from parts, enforcing the `lane_count + 1` rule.
    pub fn from_parts(
        left_boundary: BezierChain,
        right_boundary: BezierChain,
        markings: Vec<SampledCurve>,
        lane_count: usize,
        detection_range_m: f64,
    ) -> Result<Self> {
        if lane_count == 0 {
            return Err(Error::InvalidParameter {
                what: "lane count must be at least 1".into(),
            });
        }
        if markings.len() != lane_count + 1 {
            return Err(Error::InvalidParameter {
                what: format!(
                    "{} markings for {} lanes; a road with n lanes needs n + 1 markings",
                    markings.len(),
                    lane_count
                ),
            });
        }
        Ok(LaneModel {
            left_boundary,
            right_boundary,
            markings,
            lane_count,
            detection_range_m,
            lane_count_disagreement: false,
        })
    }

    pub fn left_boundary(&self) -> &BezierChain {
        &self.left_boundary
    }
    pub fn right_boundary(&self) -> &BezierChain {
        &self.right_boundary
    }
    /// Lane markings ordered left to right: outer-left, centerlines,
    /// outer-right. Parameterized by arc length in meters.
    pub fn markings(&self) -> &[SampledCurve] {
        &self.markings
    }
    pub fn lane_count(&self) -> usize {
        self.lane_count
    }
    pub fn detection_range_m(&self) -> f64 {
        self.detection_range_m
    }
    pub fn lane_count_disagreement(&self) -> bool {
        self.lane_count_disagreement
    }

    pub fn validate(&self) -> Result<()> {
        if self.lane_count == 0 || self.markings.len() != self.lane_count + 1 {
            return Err(Error::InvalidParameter {
                what: "lane model violates the n + 1 markings rule".into(),
            });
        }
        Ok(())
    }
}

/// Partition detections into (left, right) of the road, each sorted by
/// the along-road coordinate.
///
/// Posts are projected into the frame of their principal axis (oriented
/// forward: positive x, ties toward positive y) and a midline is fitted
/// through all of them (a quadratic in the along-coordinate when there
/// are enough posts to support it, a line otherwise), so curved roads
/// split correctly too. Detections with a side hint keep it; the rest
/// take the sign of their residual about the midline. When the residual
/// spread is smaller than a lane width the posts form a single rail,
/// which goes left or right depending on which side of it the ego sits;
/// the other list comes back empty.
pub fn assign_sides(
    detections: &[DelineatorDetection],
    config: &RoadLayoutConfig,
) -> Result<(Vec<DelineatorDetection>, Vec<DelineatorDetection>)> {
    config.validate()?;
    let usable: Vec<&DelineatorDetection> = detections
        .iter()
        .filter(|d| d.validate().is_ok() && d.confidence >= config.min_confidence)
        .collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientInput {
            needed: 2,
            got: usable.len(),
        });
    }

    let axis = principal_axis(&usable);
    let normal = Vec3::UP.cross(axis); // left of the axis
    let centroid = usable
        .iter()
        .fold(Vec3::ZERO, |acc, d| acc + d.position)
        * (1.0 / usable.len() as f64);

    let along: Vec<f64> = usable.iter().map(|d| (d.position - centroid).dot(axis)).collect();
    let lateral: Vec<f64> = usable.iter().map(|d| (d.position - centroid).dot(normal)).collect();

    // Quadratic midlines need enough posts to see the curvature; below
    // that a line is the only defensible fit.
    let midline = fit_midline(&along, &lateral, usable.len() >= 6);
    let residual: Vec<f64> = along
        .iter()
        .zip(&lateral)
        .map(|(&s, &l)| l - midline.eval(s))
        .collect();
    let spread = residual.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - residual.iter().cloned().fold(f64::INFINITY, f64::min);

    let single_rail = spread < config.lane_width_m;
    // Residual of the ego origin about the rail midline: sitting right of
    // the rail means the rail is on the ego's left.
    let ego_s = (Vec3::ZERO - centroid).dot(axis);
    let ego_l = (Vec3::ZERO - centroid).dot(normal);
    let rail_is_left = ego_l - midline.eval(ego_s) < 0.0;

    let mut left = Vec::new();
    let mut right = Vec::new();
    for (d, &r) in usable.iter().zip(&residual) {
        let goes_left = match d.side_hint {
            SideHint::Left => true,
            SideHint::Right => false,
            SideHint::Unknown => {
                if single_rail {
                    rail_is_left
                } else {
                    r > 0.0
                }
            }
        };
        if goes_left {
            left.push(**d);
        } else {
            right.push(**d);
        }
    }
    let along_coord = |d: &DelineatorDetection| d.position.dot(axis);
    left.sort_by(|a, b| along_coord(a).total_cmp(&along_coord(b)));
    right.sort_by(|a, b| along_coord(a).total_cmp(&along_coord(b)));
    Ok((left, right))
}

/// Least-squares midline `l(s)` in the principal-axis frame.
struct Midline {
    coeffs: [f64; 3], // constant, linear, quadratic
}

impl Midline {
    fn eval(&self, s: f64) -> f64 {
        self.coeffs[0] + self.coeffs[1] * s + self.coeffs[2] * s * s
    }
}

fn fit_midline(s: &[f64], l: &[f64], quadratic: bool) -> Midline {
    // Normal equations for l = a + b·s (+ c·s²), solved by Cramer's rule.
    let n = s.len() as f64;
    let sum = |f: &dyn Fn(f64, f64) -> f64| s.iter().zip(l).map(|(&x, &y)| f(x, y)).sum::<f64>();
    let (s1, s2) = (sum(&|x, _| x), sum(&|x, _| x * x));
    let (t0, t1) = (sum(&|_, y| y), sum(&|x, y| x * y));
    if !quadratic {
        let det = n * s2 - s1 * s1;
        if det.abs() < 1e-12 {
            return Midline {
                coeffs: [t0 / n, 0.0, 0.0],
            };
        }
        let a = (t0 * s2 - s1 * t1) / det;
        let b = (n * t1 - s1 * t0) / det;
        return Midline {
            coeffs: [a, b, 0.0],
        };
    }
    let (s3, s4) = (sum(&|x, _| x * x * x), sum(&|x, _| x * x * x * x));
    let t2 = sum(&|x, y| x * x * y);
    let m = [[n, s1, s2], [s1, s2, s3], [s2, s3, s4]];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(&m);
    if det.abs() < 1e-9 {
        return fit_midline(s, l, false);
    }
    let rhs = [t0, t1, t2];
    let mut coeffs = [0.0; 3];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = rhs[row];
        }
        *c = det3(&mk) / det;
    }
    Midline { coeffs }
}

/// First principal component of the detection positions in the ground
/// plane, oriented forward.
fn principal_axis(detections: &[&DelineatorDetection]) -> Vec3 {
    let n = detections.len() as f64;
    let mean = detections
        .iter()
        .fold(Vec3::ZERO, |acc, d| acc + d.position)
        * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for d in detections {
        let p = d.position - mean;
        sxx += p.x * p.x;
        sxy += p.x * p.y;
        syy += p.y * p.y;
    }
    // Eigenvector of the larger eigenvalue of [[sxx, sxy], [sxy, syy]].
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let axis = Vec3::new(angle.cos(), angle.sin(), 0.0);
    // Forward orientation: the principal direction is sign-ambiguous.
    if axis.x < 0.0 || (axis.x == 0.0 && axis.y < 0.0) {
        -axis
    } else {
        axis
    }
}

/// Unit tangents along an ordered run of posts.
///
/// Interior posts use the central difference `p[i+1] − p[i−1]`; the ends
/// use the second-order one-sided difference (three posts) so that curved
/// boundaries keep their curvature into the first and last segment. With
/// only two posts both tangents are the chord.
pub fn estimate_tangents(posts: &[Vec3]) -> Result<Vec<Vec3>> {
    let n = posts.len();
    if n < 2 {
        return Err(Error::InsufficientInput { needed: 2, got: n });
    }
    let normalize = |v: Vec3, fallback: Option<Vec3>| -> Result<Vec3> {
        match v.normalized() {
            Some(u) => Ok(u),
            None => fallback.ok_or(Error::DegenerateGeometry {
                what: "coincident neighboring posts",
                param: None,
            }),
        }
    };
    let chord = |a: usize, b: usize| posts[b] - posts[a];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let raw = if i == 0 {
            if n >= 3 {
                let d = posts[1] * 4.0 - posts[0] * 3.0 - posts[2];
                // Guard against data where the one-sided stencil flips
                // direction; fall back to the chord.
                if d.dot(chord(0, 1)) > 0.0 {
                    d
                } else {
                    chord(0, 1)
                }
            } else {
                chord(0, 1)
            }
        } else if i == n - 1 {
            if n >= 3 {
                let d = posts[n - 1] * 3.0 - posts[n - 2] * 4.0 + posts[n - 3];
                if d.dot(chord(n - 2, n - 1)) > 0.0 {
                    d
                } else {
                    chord(n - 2, n - 1)
                }
            } else {
                chord(0, 1)
            }
        } else {
            posts[i + 1] - posts[i - 1]
        };
        out.push(normalize(raw, None)?);
    }
    Ok(out)
}

/// Thread a C1 Bézier chain through ordered post positions.
pub fn build_boundary(posts: &[Vec3]) -> Result<BezierChain> {
    let tangents = estimate_tangents(posts)?;
    BezierChain::from_waypoints(posts, &tangents)
}

/// Lane count from the cross-road distance between corresponding posts.
///
/// The post lines sit one delineator offset outside each outer marking,
/// so the paved width is `d − 2·offset`; dividing by the lane width and
/// rounding gives the count (at least 1). With the default 0.50 m offset
/// the subtraction is the familiar 1.0 m.
pub fn estimate_lane_count(d_delineators: f64, config: &RoadLayoutConfig) -> Result<usize> {
    config.validate()?;
    let min_plausible = 2.0 * config.delineator_offset_m + 0.5 * config.lane_width_m;
    if !(d_delineators.is_finite() && d_delineators > min_plausible) {
        return Err(Error::ImplausibleGeometry {
            what: format!(
                "cross-road post spacing {d_delineators} m below the plausible minimum {min_plausible} m"
            ),
        });
    }
    let lanes = (d_delineators - 2.0 * config.delineator_offset_m) / config.lane_width_m;
    Ok((lanes.round() as usize).max(1))
}

/// Match left and right posts into corresponding pairs.
///
/// Greedy on the smallest along-road coordinate difference, each post used
/// at most once, and pairs never cross (monotone in both indices).
/// Leftover posts simply stay unpaired.
pub fn pair_delineators(left: &[Vec3], right: &[Vec3]) -> Vec<(usize, usize)> {
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    // Along-road direction from the overall sweep of both rails.
    let mut dir = Vec3::ZERO;
    for side in [left, right] {
        if side.len() >= 2 {
            dir = dir + (side[side.len() - 1] - side[0]);
        }
    }
    let axis = dir.normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let sl: Vec<f64> = left.iter().map(|p| p.dot(axis)).collect();
    let sr: Vec<f64> = right.iter().map(|p| p.dot(axis)).collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(sl.len() * sr.len());
    for (i, &a) in sl.iter().enumerate() {
        for (j, &b) in sr.iter().enumerate() {
            candidates.push(((a - b).abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut used_l = vec![false; sl.len()];
    let mut used_r = vec![false; sr.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        if used_l[i] || used_r[j] {
            continue;
        }
        let monotone = pairs
            .iter()
            .all(|&(pi, pj)| (i > pi) == (j > pj));
        if monotone {
            used_l[i] = true;
            used_r[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_by_key(|&(i, _)| i);
    pairs
}

/// Sampling step for markings, meters (also the models-file step).
pub const MARKING_STEP_M: f64 = 0.5;

fn samples_per_segment_for(chain: &BezierChain, step_m: f64) -> usize {
    let longest = chain
        .segments()
        .iter()
        .map(|s| s.p0().distance(s.p3()))
        .fold(0.0, f64::max);
    ((longest / step_m).ceil() as usize + 1).max(2)
}

/// Cross-road spacing between the post rails: for each left post the
/// distance to the right rail, measured to the closest point of the right
/// chain so that longitudinally staggered posts (normal on curves, where
/// spacing runs along each marking) still measure the perpendicular road
/// width. On straight roads with side-by-side posts this equals the
/// post-to-post distance.
///
/// Returns the mean spacing, the lane count it implies (maximum over
/// posts when they disagree, e.g. across a merge), and the disagreement
/// flag.
fn cross_spacing(
    left: &BezierChain,
    right: &BezierChain,
    config: &RoadLayoutConfig,
) -> Result<(f64, usize, bool)> {
    let rail: Vec<Vec3> = right
        .sample_uniform(samples_per_segment_for(right, MARKING_STEP_M))?
        .points()
        .to_vec();
    let (first, last) = (rail[0], *rail.last().unwrap());
    let mut interior: Vec<f64> = Vec::new();
    let mut clamped: Vec<f64> = Vec::new();
    for p in left.joints() {
        if let Some((foot, d)) = polyline::closest_point(&rail, p) {
            // A foot pinned to a rail end usually means the joint lies
            // beyond the other rail's extent and the distance runs
            // diagonally; prefer proper perpendicular feet.
            if foot.distance(first) < 1e-9 || foot.distance(last) < 1e-9 {
                clamped.push(d);
            } else {
                interior.push(d);
            }
        }
    }
    let spacings = if interior.is_empty() { clamped } else { interior };
    if spacings.is_empty() {
        return Err(Error::GeometryMismatch {
            what: "no corresponding posts between the two boundaries".into(),
        });
    }
    let mut counts: Vec<usize> = Vec::with_capacity(spacings.len());
    for &d in &spacings {
        counts.push(estimate_lane_count(d, config)?);
    }
    let max_count = *counts.iter().max().unwrap();
    let disagreement = counts.iter().any(|&c| c != max_count);
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    Ok((mean, max_count, disagreement))
}

fn overlap_along_axis(left: &BezierChain, right: &BezierChain) -> f64 {
    let dir = (left.end_point() - left.start_point()) + (right.end_point() - right.start_point());
    let axis = dir.normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let (l0, l1) = (left.start_point().dot(axis), left.end_point().dot(axis));
    let (r0, r1) = (right.start_point().dot(axis), right.end_point().dot(axis));
    l1.min(r1) - l0.max(r0)
}

/// Derive all lane markings from the two boundary chains.
///
/// The outer markings compensate the post offset: the left boundary
/// shifts one offset to the right, the right boundary one offset to the
/// left. Interior centerlines divide the measured paved width into
/// `lane_count` equal lanes: in `ShiftFromBoundaries` mode by repeated
/// shifts off the left boundary, in `MidpointCenterline` mode by chaining
/// midpoints of corresponding posts and shifting that center chain.
pub fn derive_markings(
    left: &BezierChain,
    right: &BezierChain,
    config: &RoadLayoutConfig,
    mode: MarkingMode,
) -> Result<LaneModel> {
    config.validate()?;
    let overlap = overlap_along_axis(left, right);
    if overlap <= 0.0 {
        return Err(Error::GeometryMismatch {
            what: format!(
                "boundary chains do not overlap along the road (gap {:.2} m)",
                -overlap
            ),
        });
    }

    let offset = config.delineator_offset_m;
    let (mean_spacing, lane_count, disagreement) = cross_spacing(left, right, config)?;
    // Width actually painted on the ground, divided evenly; keeps the
    // centerlines centered when the real road runs wider or narrower
    // than the nominal lane width.
    let effective_width = (mean_spacing - 2.0 * offset) / lane_count as f64;

    let sps_left = samples_per_segment_for(left, MARKING_STEP_M);
    let sps_right = samples_per_segment_for(right, MARKING_STEP_M);

    let mut markings: Vec<SampledCurve> = Vec::with_capacity(lane_count + 1);
    markings.push(left.offset(-offset, sps_left)?);
    match mode {
        MarkingMode::ShiftFromBoundaries => {
            for i in 1..lane_count {
                let d = offset + i as f64 * effective_width;
                markings.push(left.offset(-d, sps_left)?);
            }
        }
        MarkingMode::MidpointCenterline => {
            let lj = left.joints();
            let rj = right.joints();
            let pairs = pair_delineators(&lj, &rj);
            if pairs.len() < 2 {
                return Err(Error::GeometryMismatch {
                    what: "midpoint centerline needs at least two corresponding post pairs".into(),
                });
            }
            let mids: Vec<Vec3> = pairs
                .iter()
                .map(|&(i, j)| lj[i].lerp(rj[j], 0.5))
                .collect();
            let center_chain = build_boundary(&mids)?;
            let sps_mid = samples_per_segment_for(&center_chain, MARKING_STEP_M);
            for i in 1..lane_count {
                let d = (lane_count as f64 / 2.0 - i as f64) * effective_width;
                markings.push(center_chain.offset(d, sps_mid)?);
            }
        }
    }
    markings.push(right.offset(offset, sps_right)?);

    // Arc-length parameters are what the metrics and file formats expect.
    let markings: Vec<SampledCurve> = markings
        .iter()
        .map(|m| m.reparameterized_by_arc_length())
        .collect::<Result<_>>()?;

    // Adjacent markings must stay at least half a lane apart, otherwise
    // the reconstruction is self-contradictory.
    for (i, w) in markings.windows(2).enumerate() {
        let other = w[1].points();
        for p in w[0].points().iter().step_by(4) {
            if let Some((_, d)) = polyline::closest_point(other, *p) {
                if d < 0.5 * config.lane_width_m {
                    return Err(Error::ImplausibleGeometry {
                        what: format!(
                            "markings {i} and {} come within {d:.2} m, closer than half a lane",
                            i + 1
                        ),
                    });
                }
            }
        }
    }

    let detection_range = markings
        .first()
        .unwrap()
        .arc_length()
        .min(markings.last().unwrap().arc_length());

    Ok(LaneModel {
        left_boundary: left.clone(),
        right_boundary: right.clone(),
        markings,
        lane_count,
        detection_range_m: detection_range,
        lane_count_disagreement: disagreement,
    })
}

/// Full pipeline: side assignment, boundary fitting (with a single-side
/// fallback), marking derivation, and straight extrapolation of every
/// marking by `extrapolation_m`.
///
/// Extrapolation beyond the 10 m cap is rejected here; callers holding an
/// explicit override go through [`fit_lanes_with_policy`].
pub fn fit_lanes(
    detections: &[DelineatorDetection],
    config: &RoadLayoutConfig,
    extrapolation_m: f64,
    mode: MarkingMode,
) -> Result<LaneModel> {
    fit_lanes_with_policy(
        detections,
        config,
        extrapolation_m,
        mode,
        &crate::geom::ExtrapolationPolicy::default(),
    )
}

/// [`fit_lanes`] with an explicit extrapolation cap policy.
pub fn fit_lanes_with_policy(
    detections: &[DelineatorDetection],
    config: &RoadLayoutConfig,
    extrapolation_m: f64,
    mode: MarkingMode,
    policy: &crate::geom::ExtrapolationPolicy,
) -> Result<LaneModel> {
    if !extrapolation_m.is_finite() || extrapolation_m < 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("extrapolation {extrapolation_m} m"),
        });
    }
    if extrapolation_m > policy.hard_cap_m && !policy.allow_beyond_cap {
        return Err(Error::RangePolicy {
            requested_m: extrapolation_m,
            cap_m: policy.hard_cap_m,
        });
    }

    let (left_dets, right_dets) = assign_sides(detections, config)?;
    let left_posts: Vec<Vec3> = left_dets.iter().map(|d| d.position).collect();
    let right_posts: Vec<Vec3> = right_dets.iter().map(|d| d.position).collect();

    // The nominal two-lane road width, post line to post line.
    let fallback_shift = 2.0 * config.delineator_offset_m + 2.0 * config.lane_width_m;

    let (left, right) = match (left_posts.len() >= 2, right_posts.len() >= 2) {
        (true, true) => (build_boundary(&left_posts)?, build_boundary(&right_posts)?),
        (true, false) => {
            let left = build_boundary(&left_posts)?;
            let right = synthesize_parallel_boundary(&left_posts, -fallback_shift)?;
            (left, right)
        }
        (false, true) => {
            let right = build_boundary(&right_posts)?;
            let left = synthesize_parallel_boundary(&right_posts, fallback_shift)?;
            (left, right)
        }
        (false, false) => {
            return Err(Error::InsufficientInput {
                needed: 2,
                got: left_posts.len().max(right_posts.len()),
            })
        }
    };

    let mut model = derive_markings(&left, &right, config, mode)?;

    if extrapolation_m > 0.0 {
        model.markings = model
            .markings
            .iter()
            .map(|m| m.extended_straight(extrapolation_m, MARKING_STEP_M))
            .collect::<Result<_>>()?;
        model.detection_range_m += extrapolation_m;
    }
    Ok(model)
}

/// When only one post rail is visible, invent the other one a constant
/// lateral shift away (positive shifts left). Exact on straights; on
/// curves the parallel of a circle is still a circle, so the joint-wise
/// shift stays honest there too.
fn synthesize_parallel_boundary(posts: &[Vec3], shift_m: f64) -> Result<BezierChain> {
    let tangents = estimate_tangents(posts)?;
    let mut shifted = Vec::with_capacity(posts.len());
    for (p, t) in posts.iter().zip(&tangents) {
        let n = Vec3::UP.cross(*t).normalized().ok_or(Error::DegenerateGeometry {
            what: "vertical tangent while synthesizing the missing boundary",
            param: None,
        })?;
        shifted.push(*p + n * shift_m);
    }
    BezierChain::from_waypoints(&shifted, &tangents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::EXTRAPOLATION_CAP_M;
    use approx::assert_relative_eq;

    fn det(x: f64, y: f64) -> DelineatorDetection {
        DelineatorDetection::new(Vec3::new(x, y, 0.0), 1.0)
    }

    /// Two post rails of a straight two-lane road, `n` posts per side.
    fn straight_scene(n: usize, half_spread: f64) -> Vec<DelineatorDetection> {
        let mut out = Vec::new();
        for i in 0..n {
            let x = 30.0 * i as f64;
            out.push(det(x, half_spread));
            out.push(det(x, -half_spread));
        }
        out
    }

    fn rotate_z(p: Vec3, angle: f64) -> Vec3 {
        Vec3::new(
            p.x * angle.cos() - p.y * angle.sin(),
            p.x * angle.sin() + p.y * angle.cos(),
            p.z,
        )
    }

    #[test]
    fn sides_split_by_sign_on_a_straight_road() {
        let (left, right) = assign_sides(&straight_scene(4, 4.25), &RoadLayoutConfig::default()).unwrap();
        assert_eq!(left.len(), 4);
        assert_eq!(right.len(), 4);
        assert!(left.iter().all(|d| d.position.y > 0.0));
        assert!(right.iter().all(|d| d.position.y < 0.0));
        // Sorted along the road.
        assert!(left.windows(2).all(|w| w[0].position.x < w[1].position.x));
    }

    #[test]
    fn side_partition_survives_rotation() {
        let config = RoadLayoutConfig::default();
        let scene = straight_scene(4, 4.25);
        let (l0, r0) = assign_sides(&scene, &config).unwrap();
        let angle = 30f64.to_radians();
        let rotated: Vec<DelineatorDetection> = scene
            .iter()
            .map(|d| DelineatorDetection::new(rotate_z(d.position, angle), d.confidence))
            .collect();
        let (l1, r1) = assign_sides(&rotated, &config).unwrap();
        assert_eq!(l0.len(), l1.len());
        assert_eq!(r0.len(), r1.len());
        for (a, b) in l0.iter().zip(&l1) {
            assert!(rotate_z(a.position, angle).distance(b.position) < 1e-12);
        }
        for (a, b) in r0.iter().zip(&r1) {
            assert!(rotate_z(a.position, angle).distance(b.position) < 1e-12);
        }
    }

    #[test]
    fn sides_split_on_a_tight_arc() {
        // Rails on concentric radius-96/104 circles, staggered because the
        // 30 m spacing runs along each marking. A straight split axis puts
        // both rails on the same side near the sweep ends; the midline fit
        // must not.
        let r = 100.0;
        let mut dets = Vec::new();
        for (rad, mark_rad) in [(96.0, 96.5), (104.0, 103.5)] {
            let mut k = 0;
            loop {
                let s_center = 30.0 * k as f64 * (r / mark_rad);
                if s_center > 100.0 {
                    break;
                }
                let a = s_center / r;
                dets.push(det(rad * a.sin(), r - rad * a.cos()));
                k += 1;
            }
        }
        let (left, right) = assign_sides(&dets, &RoadLayoutConfig::default()).unwrap();
        assert_eq!(left.len(), 4);
        assert_eq!(right.len(), 4);
        let center = Vec3::new(0.0, r, 0.0);
        assert!(left.iter().all(|d| (d.position.distance(center) - 96.0).abs() < 1e-9));
        assert!(right.iter().all(|d| (d.position.distance(center) - 104.0).abs() < 1e-9));
    }

    #[test]
    fn curved_scene_keeps_the_standard_lane_count() {
        // Staggered rails on an arc must still measure the perpendicular
        // 8 m road width, not the diagonal post-to-post distance.
        let r = 100.0;
        let mut dets = Vec::new();
        for (rad, mark_rad) in [(96.0, 96.5), (104.0, 103.5)] {
            for k in 0..5 {
                let a = 30.0 * k as f64 * (r / mark_rad) / r;
                dets.push(det(rad * a.sin(), r - rad * a.cos()));
            }
        }
        let model = fit_lanes(
            &dets,
            &RoadLayoutConfig::default(),
            0.0,
            MarkingMode::ShiftFromBoundaries,
        )
        .unwrap();
        assert_eq!(model.lane_count(), 2);
        assert!(!model.lane_count_disagreement());
    }

    #[test]
    fn single_detection_is_insufficient() {
        let err = assign_sides(&[det(0.0, 4.0)], &RoadLayoutConfig::default());
        assert!(matches!(err, Err(Error::InsufficientInput { .. })));
    }

    #[test]
    fn one_sided_scene_leaves_the_other_list_empty() {
        // Only the left rail visible: posts at y = +4, ego at the origin
        // (right of the rail).
        let scene: Vec<DelineatorDetection> =
            (0..4).map(|i| det(30.0 * i as f64, 4.0)).collect();
        let (left, right) = assign_sides(&scene, &RoadLayoutConfig::default()).unwrap();
        assert_eq!(left.len(), 4);
        assert!(right.is_empty());

        let scene: Vec<DelineatorDetection> =
            (0..4).map(|i| det(30.0 * i as f64, -4.0)).collect();
        let (left, right) = assign_sides(&scene, &RoadLayoutConfig::default()).unwrap();
        assert!(left.is_empty());
        assert_eq!(right.len(), 4);
    }

    #[test]
    fn side_hints_override_geometry() {
        let mut scene = straight_scene(3, 4.25);
        scene[0].side_hint = SideHint::Right; // geometrically left
        let (left, right) = assign_sides(&scene, &RoadLayoutConfig::default()).unwrap();
        assert_eq!(left.len(), 2);
        assert_eq!(right.len(), 4);
    }

    #[test]
    fn collinear_posts_get_unit_x_tangents() {
        let posts: Vec<Vec3> = (0..4).map(|i| Vec3::new(30.0 * i as f64, 0.0, 0.0)).collect();
        for t in estimate_tangents(&posts).unwrap() {
            assert!((t - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn circle_posts_get_circle_tangents() {
        let r = 100.0;
        let posts: Vec<Vec3> = (0..5)
            .map(|i| {
                let a = 30.0 * i as f64 / r;
                Vec3::new(r * a.sin(), r - r * a.cos(), 0.0)
            })
            .collect();
        let tangents = estimate_tangents(&posts).unwrap();
        for (i, t) in tangents.iter().enumerate() {
            let a = 30.0 * i as f64 / r;
            let truth = Vec3::new(a.cos(), a.sin(), 0.0);
            let angle = t.dot(truth).clamp(-1.0, 1.0).acos();
            assert!(angle < 0.01, "tangent {i} off by {angle} rad");
        }
    }

    #[test]
    fn two_posts_share_the_chord_tangent() {
        let posts = [Vec3::ZERO, Vec3::new(30.0, 10.0, 0.0)];
        let tangents = estimate_tangents(&posts).unwrap();
        let chord = (posts[1] - posts[0]).normalized().unwrap();
        assert!((tangents[0] - chord).norm() < 1e-12);
        assert!((tangents[1] - chord).norm() < 1e-12);
    }

    #[test]
    fn coincident_posts_are_degenerate() {
        let posts = [Vec3::ZERO, Vec3::ZERO, Vec3::new(30.0, 0.0, 0.0)];
        assert!(matches!(
            estimate_tangents(&posts),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn boundary_through_collinear_posts_is_straight() {
        let posts: Vec<Vec3> = (0..3).map(|i| Vec3::new(30.0 * i as f64, 0.0, 0.0)).collect();
        let chain = build_boundary(&posts).unwrap();
        assert_eq!(chain.len(), 2);
        let samples = chain.sample_uniform(32).unwrap();
        assert!(samples.points().iter().all(|p| p.y.abs() < 1e-12));
    }

    #[test]
    fn boundary_through_circle_posts_stays_near_the_circle() {
        let r = 100.0;
        let center = Vec3::new(0.0, r, 0.0);
        let posts: Vec<Vec3> = (0..5)
            .map(|i| {
                let a = 30.0 * i as f64 / r;
                Vec3::new(r * a.sin(), r - r * a.cos(), 0.0)
            })
            .collect();
        let chain = build_boundary(&posts).unwrap();
        let samples = chain.sample_uniform(128).unwrap();
        let worst = samples
            .points()
            .iter()
            .map(|p| (p.distance(center) - r).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "boundary radial error {worst} exceeds 0.05 m");
    }

    #[test]
    fn two_posts_make_a_single_segment_boundary() {
        let chain = build_boundary(&[Vec3::ZERO, Vec3::new(30.0, 0.0, 0.0)]).unwrap();
        assert_eq!(chain.len(), 1);
    }

    #[test]
    fn lane_counts_from_the_paper_spacings() {
        let config = RoadLayoutConfig::default();
        assert_eq!(estimate_lane_count(8.0, &config).unwrap(), 2);
        assert_eq!(estimate_lane_count(4.5, &config).unwrap(), 1);
        assert_eq!(estimate_lane_count(11.5, &config).unwrap(), 3);
    }

    #[test]
    fn implausible_spacing_is_rejected() {
        let config = RoadLayoutConfig::default();
        assert!(matches!(
            estimate_lane_count(2.0, &config),
            Err(Error::ImplausibleGeometry { .. })
        ));
    }

    #[test]
    fn pairing_is_identity_on_a_symmetric_road() {
        let left: Vec<Vec3> = (0..5).map(|i| Vec3::new(30.0 * i as f64, 4.0, 0.0)).collect();
        let right: Vec<Vec3> = (0..5).map(|i| Vec3::new(30.0 * i as f64, -4.0, 0.0)).collect();
        let pairs = pair_delineators(&left, &right);
        assert_eq!(pairs, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn pairing_skips_missing_posts_monotonically() {
        let left: Vec<Vec3> = (0..6).map(|i| Vec3::new(30.0 * i as f64, 4.0, 0.0)).collect();
        // Right side lost every other post.
        let right: Vec<Vec3> = (0..6)
            .step_by(2)
            .map(|i| Vec3::new(30.0 * i as f64, -4.0, 0.0))
            .collect();
        let pairs = pair_delineators(&left, &right);
        assert_eq!(pairs, vec![(0, 0), (2, 1), (4, 2)]);
        // Brute-force oracle: the optimal monotone matching by total
        // along-road difference must agree.
        let oracle = brute_force_pairs(&left, &right);
        assert_eq!(pairs, oracle);
    }

    #[test]
    fn empty_side_pairs_to_nothing() {
        let left: Vec<Vec3> = (0..3).map(|i| Vec3::new(30.0 * i as f64, 4.0, 0.0)).collect();
        assert!(pair_delineators(&left, &[]).is_empty());
    }

    /// Exhaustive monotone matching of maximum size, then minimum total
    /// along-road difference. Only usable for small inputs.
    fn brute_force_pairs(left: &[Vec3], right: &[Vec3]) -> Vec<(usize, usize)> {
        fn go(
            i: usize,
            j_min: usize,
            left: &[Vec3],
            right: &[Vec3],
            current: &mut Vec<(usize, usize)>,
            best: &mut (usize, f64, Vec<(usize, usize)>),
        ) {
            let cost: f64 = current
                .iter()
                .map(|&(a, b)| (left[a].x - right[b].x).abs())
                .sum();
            if current.len() > best.0 || (current.len() == best.0 && cost < best.1) {
                *best = (current.len(), cost, current.clone());
            }
            if i >= left.len() {
                return;
            }
            go(i + 1, j_min, left, right, current, best);
            for j in j_min..right.len() {
                current.push((i, j));
                go(i + 1, j + 1, left, right, current, best);
                current.pop();
            }
        }
        let mut best = (0, f64::INFINITY, Vec::new());
        go(0, 0, left, right, &mut Vec::new(), &mut best);
        best.2
    }

    #[test]
    fn markings_of_a_symmetric_straight_road() {
        // Posts at ±4.25 with a 0.5 m offset: outer markings at ±3.75 and
        // the centerline dead center, even though the road runs wider than
        // the nominal 3.5 m lanes.
        let config = RoadLayoutConfig::default();
        let left = build_boundary(
            &(0..5).map(|i| Vec3::new(30.0 * i as f64, 4.25, 0.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let right = build_boundary(
            &(0..5).map(|i| Vec3::new(30.0 * i as f64, -4.25, 0.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let model = derive_markings(&left, &right, &config, MarkingMode::ShiftFromBoundaries).unwrap();
        assert_eq!(model.lane_count(), 2);
        assert_eq!(model.markings().len(), 3);
        let expect = [3.75, 0.0, -3.75];
        for (marking, y) in model.markings().iter().zip(expect) {
            for p in marking.points() {
                assert_relative_eq!(p.y, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn both_centerline_modes_agree_on_clean_straights() {
        let config = RoadLayoutConfig::default();
        let left_posts: Vec<Vec3> = (0..5).map(|i| Vec3::new(30.0 * i as f64, 4.25, 0.0)).collect();
        let right_posts: Vec<Vec3> = (0..5).map(|i| Vec3::new(30.0 * i as f64, -4.25, 0.0)).collect();
        let left = build_boundary(&left_posts).unwrap();
        let right = build_boundary(&right_posts).unwrap();
        let shift = derive_markings(&left, &right, &config, MarkingMode::ShiftFromBoundaries).unwrap();
        let midpoint = derive_markings(&left, &right, &config, MarkingMode::MidpointCenterline).unwrap();
        let a = &shift.markings()[1];
        let b = &midpoint.markings()[1];
        for p in a.points() {
            let (_, d) = polyline::closest_point(b.points(), *p).unwrap();
            assert!(d < 1e-9, "centerline modes disagree by {d} m");
        }
    }

    #[test]
    fn one_lane_road_gets_two_markings() {
        let config = RoadLayoutConfig::default();
        // Posts 4.5 m apart across the road: a single 3.5 m lane.
        let left = build_boundary(
            &(0..4).map(|i| Vec3::new(30.0 * i as f64, 2.25, 0.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let right = build_boundary(
            &(0..4).map(|i| Vec3::new(30.0 * i as f64, -2.25, 0.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let model = derive_markings(&left, &right, &config, MarkingMode::ShiftFromBoundaries).unwrap();
        assert_eq!(model.lane_count(), 1);
        assert_eq!(model.markings().len(), 2);
    }

    #[test]
    fn non_overlapping_chains_are_a_mismatch() {
        let left = build_boundary(&[Vec3::new(0.0, 4.0, 0.0), Vec3::new(30.0, 4.0, 0.0)]).unwrap();
        let right =
            build_boundary(&[Vec3::new(100.0, -4.0, 0.0), Vec3::new(130.0, -4.0, 0.0)]).unwrap();
        assert!(matches!(
            derive_markings(&left, &right, &RoadLayoutConfig::default(), MarkingMode::ShiftFromBoundaries),
            Err(Error::GeometryMismatch { .. })
        ));
    }

    #[test]
    fn fit_lanes_recovers_a_noise_free_straight_scene() {
        let config = RoadLayoutConfig::default();
        let scene = straight_scene(6, 4.0); // standard two-lane geometry
        let model = fit_lanes(&scene, &config, 0.0, MarkingMode::ShiftFromBoundaries).unwrap();
        assert_eq!(model.lane_count(), 2);
        let expect = [3.5, 0.0, -3.5];
        for (marking, y) in model.markings().iter().zip(expect) {
            for p in marking.points() {
                assert!((p.y - y).abs() < 1e-6, "marking off truth by {}", (p.y - y).abs());
            }
        }
    }

    #[test]
    fn single_side_fallback_stays_close_on_straights() {
        let config = RoadLayoutConfig::default();
        let scene: Vec<DelineatorDetection> =
            (0..6).map(|i| det(30.0 * i as f64, 4.0)).collect(); // right side fully dropped
        let model = fit_lanes(&scene, &config, 0.0, MarkingMode::ShiftFromBoundaries).unwrap();
        assert_eq!(model.lane_count(), 2);
        let expect = [3.5, 0.0, -3.5];
        for (marking, y) in model.markings().iter().zip(expect) {
            for p in marking.points() {
                assert!((p.y - y).abs() < 0.05);
            }
        }
    }

    #[test]
    fn fit_lanes_rejects_empty_input() {
        assert!(matches!(
            fit_lanes(&[], &RoadLayoutConfig::default(), 0.0, MarkingMode::ShiftFromBoundaries),
            Err(Error::InsufficientInput { .. })
        ));
    }

    #[test]
    fn fit_lanes_enforces_the_extrapolation_cap() {
        let scene = straight_scene(4, 4.0);
        let config = RoadLayoutConfig::default();
        assert!(matches!(
            fit_lanes(&scene, &config, EXTRAPOLATION_CAP_M + 1.0, MarkingMode::ShiftFromBoundaries),
            Err(Error::RangePolicy { .. })
        ));
        let policy = crate::geom::ExtrapolationPolicy {
            allow_beyond_cap: true,
            ..Default::default()
        };
        assert!(fit_lanes_with_policy(
            &scene,
            &config,
            EXTRAPOLATION_CAP_M + 1.0,
            MarkingMode::ShiftFromBoundaries,
            &policy
        )
        .is_ok());
    }

    #[test]
    fn extrapolation_extends_the_detection_range() {
        let scene = straight_scene(4, 4.0); // posts to x = 90
        let config = RoadLayoutConfig::default();
        let plain = fit_lanes(&scene, &config, 0.0, MarkingMode::ShiftFromBoundaries).unwrap();
        let extended = fit_lanes(&scene, &config, 10.0, MarkingMode::ShiftFromBoundaries).unwrap();
        assert_relative_eq!(
            extended.detection_range_m(),
            plain.detection_range_m() + 10.0,
            epsilon = 1e-9
        );
        let last = extended.markings()[1].last();
        assert!((last.x - 100.0).abs() < 1e-6);
    }
}
