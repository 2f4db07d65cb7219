use serde::{Deserialize, Serialize};

use super::bezier::normal_left_of;
use super::{CubicBezier, SampledCurve, Vec3, EPS_C1, EPS_DEGENERATE, EXTRAPOLATION_CAP_M};
use crate::error::{Error, Result};

/// An ordered run of cubic Bézier segments joined with positional (C0)
/// and velocity (C1) continuity, representing one boundary, marking, or
/// centerline.
///
/// C0 holds exactly: consecutive segments share the joint value bitwise.
/// C1 holds to within [`EPS_C1`]: the control points flanking a joint are
/// mirror images through it, so the one-sided derivatives agree.
///
/// The global parameter runs over `[0, len]`, segment `i` covering
/// `[i, i+1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierChain {
    segments: Vec<CubicBezier>,
}

/// Cap policy for straight-line extrapolation past the chain end.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtrapolationPolicy {
    pub hard_cap_m: f64,
    pub allow_beyond_cap: bool,
}

impl Default for ExtrapolationPolicy {
    fn default() -> Self {
        ExtrapolationPolicy {
            hard_cap_m: EXTRAPOLATION_CAP_M,
            allow_beyond_cap: false,
        }
    }
}

/// Sampling step used when a caller does not care about the exact count.
const EXTENSION_STEP_M: f64 = 0.5;

impl BezierChain {
    /// Validate and wrap hand-assembled segments.
    pub fn new(segments: Vec<CubicBezier>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InsufficientInput { needed: 1, got: 0 });
        }
        for (i, w) in segments.windows(2).enumerate() {
            if w[0].p3() != w[1].p0() {
                return Err(Error::BrokenChain {
                    what: format!("segments {i} and {} do not share a joint", i + 1),
                });
            }
            let mirrored = w[0].p3() * 2.0 - w[0].p2();
            let gap = mirrored.distance(w[1].p1());
            if gap > EPS_C1 {
                return Err(Error::BrokenChain {
                    what: format!(
                        "velocity continuity violated at joint {}: control-point mirror gap {gap:.3e} m",
                        i + 1
                    ),
                });
            }
        }
        Ok(BezierChain { segments })
    }

    /// Build one segment per consecutive waypoint pair.
    ///
    /// The first segment uses the supplied start tangent; at every interior
    /// joint the outgoing control point is the mirror `2·joint − p2` of the
    /// incoming one, overriding the tangent-based handle so velocity
    /// continuity holds by construction. End tangents of each pair shape
    /// the incoming handle as usual.
    pub fn from_waypoints(waypoints: &[Vec3], tangents: &[Vec3]) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InsufficientInput {
                needed: 2,
                got: waypoints.len(),
            });
        }
        if tangents.len() != waypoints.len() {
            return Err(Error::MismatchedLengths {
                left: waypoints.len(),
                right: tangents.len(),
            });
        }
        let mut segments: Vec<CubicBezier> = Vec::with_capacity(waypoints.len() - 1);
        for i in 0..waypoints.len() - 1 {
            let seg = CubicBezier::between(
                waypoints[i],
                waypoints[i + 1],
                tangents[i],
                tangents[i + 1],
            )?;
            let seg = if let Some(prev) = segments.last() {
                let p1 = prev.p3() * 2.0 - prev.p2();
                CubicBezier::new(seg.p0(), p1, seg.p2(), seg.p3())?
            } else {
                seg
            };
            segments.push(seg);
        }
        Ok(BezierChain { segments })
    }

    pub fn segments(&self) -> &[CubicBezier] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one segment
    }

    /// Waypoints the chain passes through: each segment start plus the
    /// final endpoint.
    pub fn joints(&self) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = self.segments.iter().map(|s| s.p0()).collect();
        out.push(self.end_point());
        out
    }

    pub fn start_point(&self) -> Vec3 {
        self.segments[0].p0()
    }

    pub fn end_point(&self) -> Vec3 {
        self.segments.last().unwrap().p3()
    }

    /// Derivative at the very end of the chain.
    pub fn end_tangent(&self) -> Result<Vec3> {
        self.segments.last().unwrap().tangent(1.0)
    }

    fn locate(&self, u: f64) -> Result<(usize, f64)> {
        let max = self.segments.len() as f64;
        if !(0.0..=max).contains(&u) || u.is_nan() {
            return Err(Error::ParamOutOfRange { t: u });
        }
        let idx = (u.floor() as usize).min(self.segments.len() - 1);
        Ok((idx, u - idx as f64))
    }

    /// Position at global parameter `u ∈ [0, len]`.
    pub fn eval(&self, u: f64) -> Result<Vec3> {
        let (idx, t) = self.locate(u)?;
        self.segments[idx].eval(t)
    }

    /// Derivative (w.r.t. the local segment parameter) at global `u`.
    pub fn tangent(&self, u: f64) -> Result<Vec3> {
        let (idx, t) = self.locate(u)?;
        self.segments[idx].tangent(t)
    }

    /// Uniform samples of the chain itself, `samples_per_segment >= 2`,
    /// parameterized by the global parameter.
    pub fn sample_uniform(&self, samples_per_segment: usize) -> Result<SampledCurve> {
        self.sample_with(samples_per_segment, |_, point, _| Ok(point))
    }

    /// Pointwise lateral offset of the whole chain: each sample moves by
    /// `d` meters along the left unit normal (positive `d` shifts left,
    /// negative right).
    ///
    /// The offset of a polynomial curve is not polynomial, so the result
    /// is a [`SampledCurve`]. A vertical tangent at any sample is an error
    /// carrying the offending global parameter.
    pub fn offset(&self, d: f64, samples_per_segment: usize) -> Result<SampledCurve> {
        if !d.is_finite() {
            return Err(Error::InvalidParameter {
                what: format!("offset distance {d}"),
            });
        }
        self.sample_with(samples_per_segment, |u, point, tangent| {
            let n = normal_left_of(tangent, Some(u))?;
            Ok(point + n * d)
        })
    }

    fn sample_with(
        &self,
        samples_per_segment: usize,
        mut f: impl FnMut(f64, Vec3, Vec3) -> Result<Vec3>,
    ) -> Result<SampledCurve> {
        if samples_per_segment < 2 {
            return Err(Error::InvalidParameter {
                what: format!("samples_per_segment = {samples_per_segment}, need at least 2"),
            });
        }
        let steps = samples_per_segment - 1;
        let mut points = Vec::with_capacity(self.segments.len() * steps + 1);
        let mut params = Vec::with_capacity(points.capacity());
        for (i, seg) in self.segments.iter().enumerate() {
            let first = if i == 0 { 0 } else { 1 }; // joints emitted once
            for j in first..=steps {
                let t = j as f64 / steps as f64;
                let u = i as f64 + t;
                let point = seg.eval_unchecked(t);
                let tangent = seg.tangent(t).map_err(|e| match e {
                    Error::DegenerateGeometry { what, .. } => Error::DegenerateGeometry {
                        what,
                        param: Some(u),
                    },
                    other => other,
                })?;
                points.push(f(u, point, tangent)?);
                params.push(u);
            }
        }
        SampledCurve::new(points, params)
    }

    /// Straight-line continuation past the chain end along the end tangent.
    ///
    /// Returns samples of the appended stretch only, anchored at the chain
    /// endpoint and parameterized by meters along the extension.
    /// `distance_m == 0` is the empty extension (`None`). Distances beyond
    /// the policy cap are rejected unless the policy allows them.
    pub fn extrapolate(
        &self,
        distance_m: f64,
        policy: &ExtrapolationPolicy,
    ) -> Result<Option<SampledCurve>> {
        if !distance_m.is_finite() || distance_m < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("extrapolation distance {distance_m} m"),
            });
        }
        if distance_m > policy.hard_cap_m && !policy.allow_beyond_cap {
            return Err(Error::RangePolicy {
                requested_m: distance_m,
                cap_m: policy.hard_cap_m,
            });
        }
        if distance_m == 0.0 {
            return Ok(None);
        }
        let dir = self
            .end_tangent()?
            .normalized()
            .ok_or(Error::DegenerateGeometry {
                what: "zero end tangent",
                param: None,
            })?;
        let anchor = self.end_point();
        let mut points = vec![anchor];
        let mut params = vec![0.0];
        let mut traveled = EXTENSION_STEP_M;
        while traveled < distance_m - EPS_DEGENERATE {
            points.push(anchor + dir * traveled);
            params.push(traveled);
            traveled += EXTENSION_STEP_M;
        }
        points.push(anchor + dir * distance_m);
        params.push(distance_m);
        Ok(Some(SampledCurve::new(points, params)?))
    }

    /// Polyline arc length over uniform parameter samples. Nondecreasing
    /// when the sampling is refined (inscribed polylines only get longer).
    pub fn arc_length(&self, samples_per_segment: usize) -> Result<f64> {
        Ok(self.sample_uniform(samples_per_segment)?.arc_length())
    }
}
