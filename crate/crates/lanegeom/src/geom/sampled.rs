use serde::{Deserialize, Serialize};

use super::{polyline, Vec3, EPS_DEGENERATE};
use crate::error::{Error, Result};

/// A curve materialized as ordered samples.
///
/// Pointwise lateral offsets of a Bézier are not themselves Bézier curves,
/// so offset results (lane markings, centerlines) live in this form. Each
/// point carries a strictly increasing parameter value; what the parameter
/// means (global chain parameter, arc length) is up to the producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    points: Vec<Vec3>,
    params: Vec<f64>,
}

impl SampledCurve {
    pub fn new(points: Vec<Vec3>, params: Vec<f64>) -> Result<Self> {
        if points.len() != params.len() {
            return Err(Error::MismatchedLengths {
                left: points.len(),
                right: params.len(),
            });
        }
        if points.len() < 2 {
            return Err(Error::InsufficientInput {
                needed: 2,
                got: points.len(),
            });
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "non-finite sample point".into(),
            });
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter {
                what: "sample parameters must be strictly increasing".into(),
            });
        }
        Ok(SampledCurve { points, params })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor guarantees at least two points
    }

    pub fn first(&self) -> Vec3 {
        self.points[0]
    }

    pub fn last(&self) -> Vec3 {
        *self.points.last().unwrap()
    }

    /// Polyline length over the samples.
    pub fn arc_length(&self) -> f64 {
        polyline::length(&self.points)
    }

    /// Direction of the final polyline edge, unit length.
    pub fn end_direction(&self) -> Result<Vec3> {
        let n = self.points.len();
        (self.points[n - 1] - self.points[n - 2])
            .normalized()
            .ok_or(Error::DegenerateGeometry {
                what: "coincident trailing samples",
                param: Some(self.params[n - 1]),
            })
    }

    /// Same samples, re-parameterized by cumulative polyline arc length
    /// (meters from the first sample).
    pub fn reparameterized_by_arc_length(&self) -> Result<Self> {
        let mut params = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        params.push(0.0);
        for w in self.points.windows(2) {
            let step = w[0].distance(w[1]);
            if step < EPS_DEGENERATE {
                return Err(Error::DegenerateGeometry {
                    what: "coincident samples make arc-length parameters non-increasing",
                    param: None,
                });
            }
            acc += step;
            params.push(acc);
        }
        SampledCurve::new(self.points.clone(), params)
    }

    /// Continue the curve past its last sample along the final edge
    /// direction, appending samples every `step_m` (and one exactly at
    /// `distance_m`). `distance_m <= 0` returns the curve unchanged.
    ///
    /// Appended parameters continue the existing ones by traveled meters.
    pub fn extended_straight(&self, distance_m: f64, step_m: f64) -> Result<Self> {
        if !(distance_m.is_finite() && step_m.is_finite()) || step_m <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("extension distance {distance_m} m / step {step_m} m"),
            });
        }
        if distance_m <= 0.0 {
            return Ok(self.clone());
        }
        let dir = self.end_direction()?;
        let anchor = self.last();
        let base_param = *self.params.last().unwrap();
        let mut points = self.points.clone();
        let mut params = self.params.clone();
        let mut traveled = step_m;
        while traveled < distance_m - EPS_DEGENERATE {
            points.push(anchor + dir * traveled);
            params.push(base_param + traveled);
            traveled += step_m;
        }
        points.push(anchor + dir * distance_m);
        params.push(base_param + distance_m);
        SampledCurve::new(points, params)
    }
}
