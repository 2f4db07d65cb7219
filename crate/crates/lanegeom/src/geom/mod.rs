//! Pure geometry kernel: cubic Bézier segments, C1 chains, lateral
//! offsets, extrapolation, and arc-length sampling.
//!
//! Everything in here is a pure function over immutable values; the types
//! are `Copy`/`Clone` data and safe to share across threads.
//!
//! Coordinate frame: ego-vehicle frame with x forward, y left, z up,
//! origin at the rear-axle ground point, meters.

mod bezier;
mod chain;
pub mod polyline;
mod sampled;
mod vec3;

pub use bezier::CubicBezier;
pub use chain::{BezierChain, ExtrapolationPolicy};
pub use sampled::SampledCurve;
pub use vec3::Vec3;

/// Zero-length / cross-product degeneracy floor. Double-precision noise
/// level for meter-scale geometry.
pub const EPS_DEGENERATE: f64 = 1e-12;

/// Velocity-continuity tolerance at chain joints, meters.
pub const EPS_C1: f64 = 1e-9;

/// Fraction of the chord length used for tangent handles when nothing
/// else is requested.
pub const DEFAULT_HANDLE_FRACTION: f64 = 1.0 / 3.0;

/// Hard cap on straight-line extrapolation, meters. Beyond this the
/// chord-vs-arc error on plausible rural curvature grows past half a
/// meter, so longer extensions need an explicit override.
pub const EXTRAPOLATION_CAP_M: f64 = 10.0;
