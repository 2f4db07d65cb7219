use thiserror::Error;

/// Errors produced by the geometry kernel and the lane pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A curve parameter left the unit interval. Evaluation never
    /// extrapolates; use the explicit extrapolation operation instead.
    #[error("curve parameter t = {t} outside [0, 1]")]
    ParamOutOfRange { t: f64 },

    /// A direction could not be derived: zero-length tangent, vertical
    /// tangent, coincident points. `param` carries the chain parameter
    /// when the failure happened while sampling a chain.
    #[error("degenerate geometry: {what}{}", param.map(|p| format!(" (at chain parameter {p})")).unwrap_or_default())]
    DegenerateGeometry {
        what: &'static str,
        param: Option<f64>,
    },

    /// Fewer usable inputs than the operation requires.
    #[error("insufficient input: needed {needed}, got {got}")]
    InsufficientInput { needed: usize, got: usize },

    /// Paired input slices disagree in length.
    #[error("mismatched input lengths: {left} vs {right}")]
    MismatchedLengths { left: usize, right: usize },

    /// A value violates its documented range or a config invariant.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// Inputs describe a road that cannot exist under the layout rules.
    #[error("implausible geometry: {what}")]
    ImplausibleGeometry { what: String },

    /// Two inputs that must describe the same stretch of road do not overlap.
    #[error("geometry mismatch: {what}")]
    GeometryMismatch { what: String },

    /// Extrapolation beyond the configured hard cap without an override.
    #[error("extrapolation of {requested_m} m exceeds the {cap_m} m cap (set the override to allow)")]
    RangePolicy { requested_m: f64, cap_m: f64 },

    /// An arc-length position outside the course extent.
    #[error("arc length {s} m outside course of length {length} m")]
    OutOfCourse { s: f64, length: f64 },

    /// A hand-assembled chain violates positional or velocity continuity.
    #[error("broken chain: {what}")]
    BrokenChain { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
