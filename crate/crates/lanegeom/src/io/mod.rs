//! File formats and pipeline configuration.
//!
//! Everything on disk is versioned, human-readable JSON with fixed field
//! names, chosen so datasets, models, and reports diff cleanly and the
//! oracles stay inspectable. Readers reject unknown major versions.
//!
//! Formats:
//! - **dataset**: a [`RoadCourse`] plus per-frame detections ([`FrameRecord`]).
//! - **models**: fitted lane models (markings sampled every 0.5 m) with
//!   per-frame timings and aggregate runtime statistics.
//! - **report**: per-frame and aggregate evaluation results.
//! - **keypoints**: image-space lane keypoints at fixed rows, one `u`
//!   column list per marking (−2 marks rows the marking does not reach),
//!   following the keypoint-rows convention of lane-detection benchmarks.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error as CoreError;
use crate::geom::EXTRAPOLATION_CAP_M;
use crate::lanes::{DelineatorDetection, LaneModel, MarkingMode, RoadLayoutConfig};
use crate::metrics::{
    CameraModel, EvalReport, RuntimeStats, SafetyParams, DEFAULT_LATERAL_THRESHOLD_M,
    DEFAULT_THRESHOLD_PX,
};
use crate::scene::{NoiseConfig, RoadCourse, DEFAULT_EGO_SPEED_MPS};

/// Current major format version; bump on breaking schema changes.
pub const FORMAT_VERSION: u32 = 1;

/// Errors from the file layer, mapped onto process exit codes by the CLI.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {detail}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        detail: String,
    },
    #[error("{path}: format version {found}, this build reads version {expected}")]
    Version {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("frame-id join failed: {missing:?} present in the dataset but absent from the models file")]
    Join { missing: Vec<u64> },
    #[error(transparent)]
    Invalid(#[from] CoreError),
}

pub type IoResult<T> = std::result::Result<T, FormatError>;

/// One recorded frame: where the ego was on the course, what the detector
/// reported, and how fast the ego was going.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    /// Ego centerline arc length on the dataset's course.
    pub ego_arclength_m: f64,
    pub ego_speed_mps: f64,
    /// Seed the frame's scene and detections were generated under.
    pub seed: u64,
    pub detections: Vec<DelineatorDetection>,
}

/// Dataset file: the shared course plus frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: u32,
    pub course: RoadCourse,
    pub noise: NoiseConfig,
    /// Detector range the frames were simulated with.
    pub max_range_m: f64,
    pub frames: Vec<FrameRecord>,
}

/// One fitted frame: a model or an error tag, plus the fit wall-clock of
/// the geometric pipeline only (I/O and detection simulation excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFrame {
    pub frame_id: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<LaneModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub fit_time_ms: f64,
}

/// Models file: fitted frames plus aggregate runtime statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsFile {
    pub version: u32,
    pub frames: Vec<FittedFrame>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime: Option<RuntimeStats>,
}

/// Report file: the aggregate evaluation plus per-frame details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Keypoint export: per-frame lane keypoints at shared image rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFile {
    pub version: u32,
    /// Image rows (v coordinates) the keypoints are sampled at, from just
    /// below the horizon to the bottom of the image.
    pub h_samples: Vec<u32>,
    pub frames: Vec<KeypointFrame>,
}

/// Keypoints of one frame: `lanes[m][r]` is the u coordinate of marking
/// `m` at row `h_samples[r]`, or −2 where the marking does not cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub frame_id: u64,
    pub lanes: Vec<Vec<f64>>,
}

/// Column value marking "no keypoint at this row".
pub const NO_KEYPOINT: f64 = -2.0;

/// Everything the CLI needs in one place, JSON-overridable field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub layout: RoadLayoutConfig,
    pub noise: NoiseConfig,
    pub camera: CameraModel,
    pub safety: SafetyParams,
    /// Straight extension of every marking past the last post.
    pub extrapolation_m: f64,
    /// Image-space true-positive threshold.
    pub threshold_px: f64,
    /// Lateral true-positive threshold.
    pub lateral_threshold_m: f64,
    pub marking_mode: MarkingMode,
    /// Detector range for simulated detections.
    pub detection_range_m: f64,
    /// Ground-truth sampling step for evaluation.
    pub eval_step_m: f64,
    /// How far ahead of the ego the evaluation looks.
    pub eval_range_m: f64,
    pub ego_speed_mps: f64,
    /// Ego advance between generated frames.
    pub ego_step_m: f64,
    /// Row spacing of the keypoint export.
    pub keypoint_row_step_px: u32,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            layout: RoadLayoutConfig::default(),
            noise: NoiseConfig::default(),
            camera: CameraModel::default(),
            safety: SafetyParams::default(),
            extrapolation_m: EXTRAPOLATION_CAP_M,
            threshold_px: DEFAULT_THRESHOLD_PX,
            lateral_threshold_m: DEFAULT_LATERAL_THRESHOLD_M,
            marking_mode: MarkingMode::ShiftFromBoundaries,
            detection_range_m: 100.0,
            eval_step_m: 1.0,
            eval_range_m: 100.0,
            ego_speed_mps: DEFAULT_EGO_SPEED_MPS,
            ego_step_m: 5.0,
            keypoint_row_step_px: 10,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, allow_long_extrapolation: bool) -> crate::error::Result<()> {
        self.layout.validate()?;
        self.noise.validate()?;
        self.camera.validate()?;
        for (name, v) in [
            ("threshold_px", self.threshold_px),
            ("lateral_threshold_m", self.lateral_threshold_m),
            ("detection_range_m", self.detection_range_m),
            ("eval_step_m", self.eval_step_m),
            ("ego_step_m", self.ego_step_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::InvalidParameter {
                    what: format!("{name} = {v} must be positive"),
                });
            }
        }
        for (name, v) in [
            ("extrapolation_m", self.extrapolation_m),
            ("eval_range_m", self.eval_range_m),
            ("ego_speed_mps", self.ego_speed_mps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::InvalidParameter {
                    what: format!("{name} = {v} must be nonnegative"),
                });
            }
        }
        if self.keypoint_row_step_px == 0 {
            return Err(CoreError::InvalidParameter {
                what: "keypoint_row_step_px must be positive".into(),
            });
        }
        if self.extrapolation_m > EXTRAPOLATION_CAP_M && !allow_long_extrapolation {
            return Err(CoreError::RangePolicy {
                requested_m: self.extrapolation_m,
                cap_m: EXTRAPOLATION_CAP_M,
            });
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serialize a value as pretty JSON to `path` (atomic enough for tooling:
/// write then flush).
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> IoResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| FormatError::Parse {
        path: path.display().to_string(),
        line: 0,
        column: 0,
        detail: e.to_string(),
    })?;
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    file.write_all(b"\n").map_err(|e| io_err(path, e))?;
    Ok(())
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> IoResult<T> {
    serde_json::from_str(text).map_err(|e| FormatError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        detail: e.to_string(),
    })
}

/// Read a value whose type carries a top-level `version` field.
fn load_versioned<T: DeserializeOwned>(path: &Path, version_of: impl Fn(&T) -> u32) -> IoResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: T = parse_json(path, &text)?;
    let found = version_of(&value);
    if found != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path.display().to_string(),
            found,
            expected: FORMAT_VERSION,
        });
    }
    Ok(value)
}

pub fn load_dataset(path: &Path) -> IoResult<DatasetFile> {
    let data: DatasetFile = load_versioned(path, |d: &DatasetFile| d.version)?;
    data.course.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    for f in &data.frames {
        if !seen.insert(f.frame_id) {
            return Err(FormatError::Invalid(CoreError::InvalidParameter {
                what: format!("duplicate frame id {}", f.frame_id),
            }));
        }
    }
    Ok(data)
}

pub fn save_dataset(path: &Path, data: &DatasetFile) -> IoResult<()> {
    save_json(path, data)
}

pub fn load_models(path: &Path) -> IoResult<ModelsFile> {
    let models: ModelsFile = load_versioned(path, |m: &ModelsFile| m.version)?;
    for f in &models.frames {
        if let Some(model) = &f.model {
            model.validate()?;
        }
    }
    Ok(models)
}

pub fn save_models(path: &Path, models: &ModelsFile) -> IoResult<()> {
    save_json(path, models)
}

pub fn load_report(path: &Path) -> IoResult<ReportFile> {
    load_versioned(path, |r: &ReportFile| r.version)
}

pub fn save_report(path: &Path, report: &ReportFile) -> IoResult<()> {
    save_json(path, report)
}

pub fn load_config(path: &Path) -> IoResult<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_json(path, &text)
}

/// Image rows for the keypoint export: uniform from just below the
/// horizon row (the principal row for a level camera) down to the last
/// image row.
pub fn keypoint_rows(camera: &CameraModel, row_step_px: u32) -> Vec<u32> {
    let horizon = (camera.height_px as f64 / 2.0).ceil() as u32;
    let mut rows = Vec::new();
    let mut v = horizon + row_step_px;
    while v < camera.height_px {
        rows.push(v);
        v += row_step_px;
    }
    rows
}

/// Project a lane model into image-row keypoints.
pub fn export_keypoints(
    model: &LaneModel,
    camera: &CameraModel,
    rows: &[u32],
) -> crate::error::Result<Vec<Vec<f64>>> {
    use crate::metrics::{project, Projection};
    camera.validate()?;
    let mut lanes = Vec::with_capacity(model.markings().len());
    for marking in model.markings() {
        let projected: Vec<Projection> = marking
            .points()
            .iter()
            .map(|p| project(camera, *p))
            .collect();
        let mut cols = Vec::with_capacity(rows.len());
        for &row in rows {
            let v = row as f64;
            let mut best: Option<f64> = None;
            for w in projected.windows(2) {
                let (Some((u1, v1)), Some((u2, v2))) = (w[0].pixel(), w[1].pixel()) else {
                    continue;
                };
                if (v1 - v) * (v2 - v) > 0.0 || (v2 - v1).abs() < 1e-12 {
                    continue;
                }
                let r = (v - v1) / (v2 - v1);
                let u = u1 + r * (u2 - u1);
                if (0.0..=camera.width_px as f64).contains(&u) {
                    // Keep the crossing nearest the camera (largest v
                    // change happens close in; rows are unique for sane
                    // road geometry, so first hit wins).
                    best.get_or_insert(u);
                }
            }
            cols.push(best.unwrap_or(NO_KEYPOINT));
        }
        lanes.push(cols);
    }
    Ok(lanes)
}
