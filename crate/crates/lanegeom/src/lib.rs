//! Lane geometry from roadside delineator posts.
//!
//! Rural roads carry standardized vertical posts (delineators) along both
//! edges. Given 3D detections of those posts, this crate reconstructs the
//! road: C1-continuous piecewise cubic Bézier boundary curves through the
//! posts, lateral offsets turning boundaries into lane markings and
//! centerlines, and a lane count read off the cross-road post spacing.
//! A synthetic scene generator and an evaluation suite (image-space
//! accuracy, lateral 3D accuracy, a safety score, runtime statistics)
//! close the loop without needing real sensor data.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`geom`]: Bézier segments, chains, offsets, extrapolation.
//! - [`lanes`]: detections in, [`lanes::LaneModel`] out.
//! - [`scene`]: parametric ground-truth roads and simulated detections.
//! - [`metrics`]: pinhole projection and the evaluation metrics.
//! - [`io`]: JSON file formats and configuration.
//! - [`bench`]: the in-memory runtime benchmark harness.
//!
//! The long-form guide lives in `book/`; its code snippets run as
//! doc-tests so they cannot drift from the API.

pub mod bench;
#[cfg(doctest)]
mod book;
pub mod cli;
pub mod error;
pub mod geom;
pub mod io;
pub mod lanes;
pub mod metrics;
pub mod scene;

pub use error::{Error, Result};
pub use geom::{BezierChain, CubicBezier, ExtrapolationPolicy, SampledCurve, Vec3};
