use serde::{Deserialize, Serialize};

use super::{Vec3, DEFAULT_HANDLE_FRACTION, EPS_DEGENERATE};
use crate::error::{Error, Result};

/// One cubic Bézier segment:
/// B(t) = (1−t)³·p0 + 3(1−t)²t·p1 + 3(1−t)t²·p2 + t³·p3, t ∈ [0, 1].
///
/// `p0`/`p3` are the endpoints, `p1`/`p2` the interior control points.
/// Zero-length segments (p0 == p3) are rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicBezier {
    p0: Vec3,
    p1: Vec3,
    p2: Vec3,
    p3: Vec3,
}

impl CubicBezier {
    pub fn new(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3) -> Result<Self> {
        for (name, p) in [("p0", p0), ("p1", p1), ("p2", p2), ("p3", p3)] {
            if !p.is_finite() {
                return Err(Error::InvalidParameter {
                    what: format!("control point {name} is not finite"),
                });
            }
        }
        if p0.distance(p3) < EPS_DEGENERATE {
            return Err(Error::DegenerateGeometry {
                what: "zero-length segment (coincident endpoints)",
                param: None,
            });
        }
        Ok(CubicBezier { p0, p1, p2, p3 })
    }

    /// Build a segment between two points whose tangent directions are known.
    ///
    /// The interior control points sit along the endpoint tangents at
    /// `alpha_frac` / `beta_frac` of the chord length (≈ 1/3 by default):
    /// p1 = start + α·t_start, p2 = end − β·t_end with α = alpha_frac·‖end−start‖.
    /// Tangents are normalized internally; zero tangents are rejected.
    pub fn from_endpoint_tangents(
        start: Vec3,
        end: Vec3,
        t_start: Vec3,
        t_end: Vec3,
        alpha_frac: f64,
        beta_frac: f64,
    ) -> Result<Self> {
        for (name, f) in [("alpha_frac", alpha_frac), ("beta_frac", beta_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter {
                    what: format!("{name} = {f} outside (0, 1)"),
                });
            }
        }
        let chord = start.distance(end);
        if chord < EPS_DEGENERATE {
            return Err(Error::DegenerateGeometry {
                what: "coincident endpoints",
                param: None,
            });
        }
        let t_start = t_start.normalized().ok_or(Error::DegenerateGeometry {
            what: "zero start tangent",
            param: None,
        })?;
        let t_end = t_end.normalized().ok_or(Error::DegenerateGeometry {
            what: "zero end tangent",
            param: None,
        })?;
        let p1 = start + t_start * (alpha_frac * chord);
        let p2 = end - t_end * (beta_frac * chord);
        CubicBezier::new(start, p1, p2, end)
    }

    /// `from_endpoint_tangents` with the default 1/3 handle fraction.
    pub fn between(start: Vec3, end: Vec3, t_start: Vec3, t_end: Vec3) -> Result<Self> {
        Self::from_endpoint_tangents(
            start,
            end,
            t_start,
            t_end,
            DEFAULT_HANDLE_FRACTION,
            DEFAULT_HANDLE_FRACTION,
        )
    }

    pub fn p0(&self) -> Vec3 {
        self.p0
    }
    pub fn p1(&self) -> Vec3 {
        self.p1
    }
    pub fn p2(&self) -> Vec3 {
        self.p2
    }
    pub fn p3(&self) -> Vec3 {
        self.p3
    }

    fn check_param(t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) || t.is_nan() {
            Err(Error::ParamOutOfRange { t })
        } else {
            Ok(())
        }
    }

    /// Position on the curve. Errors outside [0, 1]; extrapolation goes
    /// through the chain-level extrapolation operation, never through eval.
    pub fn eval(&self, t: f64) -> Result<Vec3> {
        Self::check_param(t)?;
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> Vec3 {
        let mt = 1.0 - t;
        let mt2 = mt * mt;
        let t2 = t * t;
        self.p0 * (mt2 * mt) + self.p1 * (3.0 * mt2 * t) + self.p2 * (3.0 * mt * t2) + self.p3 * (t2 * t)
    }

    /// First derivative dB/dt (not normalized):
    /// 3(1−t)²(p1−p0) + 6(1−t)t(p2−p1) + 3t²(p3−p2).
    ///
    /// Errors when the derivative vanishes (all contributing control-point
    /// differences zero at this parameter).
    pub fn tangent(&self, t: f64) -> Result<Vec3> {
        Self::check_param(t)?;
        let d = self.tangent_unchecked(t);
        if d.norm() < EPS_DEGENERATE {
            return Err(Error::DegenerateGeometry {
                what: "zero tangent",
                param: Some(t),
            });
        }
        Ok(d)
    }

    pub(crate) fn tangent_unchecked(&self, t: f64) -> Vec3 {
        let mt = 1.0 - t;
        (self.p1 - self.p0) * (3.0 * mt * mt)
            + (self.p2 - self.p1) * (6.0 * mt * t)
            + (self.p3 - self.p2) * (3.0 * t * t)
    }

    /// Unit normal pointing to the left of the travel direction:
    /// N(t) = U × T(t) / ‖U × T(t)‖ with U the global up vector.
    ///
    /// Horizontal tangents give a horizontal normal. A tangent parallel to
    /// U (vertical) has no left direction and errors.
    pub fn normal_left(&self, t: f64) -> Result<Vec3> {
        let tangent = self.tangent(t)?;
        normal_left_of(tangent, Some(t))
    }
}

/// Left normal of an arbitrary tangent vector (shared with chain sampling).
pub(crate) fn normal_left_of(tangent: Vec3, param: Option<f64>) -> Result<Vec3> {
    let n = Vec3::UP.cross(tangent);
    n.normalized().ok_or(Error::DegenerateGeometry {
        what: "tangent parallel to the up vector",
        param,
    })
}
