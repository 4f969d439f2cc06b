//! Recording data model, file ingestion, contact-onset detection and
//! synthetic fixtures.
//!
//! A recording lives in a directory described by a TOML manifest:
//!
//! ```toml
//! name = "rough_foam"
//! force = "force.csv"          # time_s,force_n
//! skin_temp = "skin_temp.csv"  # time_s,temp_c
//! heat_flux = "heat_flux.csv"  # time_s,flux_w_m2
//! image = "surface.pgm"        # 8-bit grayscale PGM (P5) or PNG
//! mm_per_pixel = 0.05
//! thermal_conductivity = 0.03  # optional, W/(m·K)
//! ```
//!
//! Paths are resolved relative to the manifest's directory.

mod fixture;
mod image;
mod io;
mod onset;
mod series;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::fixture::{generate_fixture, Archetype};
pub use self::image::SurfaceImage;
pub use self::io::{load_recording, read_trace, save_recording, trace_csv, Manifest};
pub use self::onset::{detect_contact_onset, NoContactOnset, OnsetParams, DEFAULT_HOLD_S, DEFAULT_ONSET_THRESHOLD};
pub use self::series::{TimeSeries, Unit, STEP_REL_TOL};

/// Physiological skin-temperature band; values outside only warn.
pub const SKIN_TEMP_BOUNDS_C: (f64, f64) = (15.0, 45.0);

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("bad CSV header in {path}: expected `time_s,{expected}`, found `{found}`")]
    BadHeader { path: PathBuf, expected: &'static str, found: String },
    #[error("unit mismatch in {path}: expected column `{expected}`, found `{found}`")]
    UnitMismatch { path: PathBuf, expected: &'static str, found: String },
    #[error("unparseable value in {path} at row {row}: `{text}`")]
    ParseValue { path: PathBuf, row: usize, text: String },
    #[error("non-monotonic timestamps at sample {index}")]
    NonMonotonicTimestamps { index: usize },
    #[error("non-uniform sampling step at sample {index}: {step} s vs mean {expected} s")]
    NonUniformStep { index: usize, step: f64, expected: f64 },
    #[error("timestamp/value length mismatch ({timestamps} vs {values})")]
    LengthMismatch { timestamps: usize, values: usize },
    #[error("series too short ({len} samples, need at least 2)")]
    TooShort { len: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("negative force {value} N at sample {index}")]
    NegativeForce { index: usize, value: f64 },
    #[error("image {path} has {bits}-bit channels, expected 8")]
    BitDepth { path: PathBuf, bits: u16 },
    #[error("cannot decode image {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },
    #[error("image must be at least 3x3, got {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("pixel buffer holds {found} values, expected {expected}")]
    ImageSize { expected: usize, found: usize },
    #[error("mm_per_pixel must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("unknown texture archetype `{0}`")]
    UnknownArchetype(String),
}

impl IngestError {
    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        IngestError::Io { path: path.to_path_buf(), reason: e.to_string() }
    }
}

/// One surface's multimodal measurement bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureRecording {
    pub name: String,
    pub press_force: TimeSeries,
    pub skin_temp: TimeSeries,
    pub heat_flux: TimeSeries,
    pub image: SurfaceImage,
    /// Object thermal conductivity in W/(m·K), when known.
    pub thermal_conductivity_hint: Option<f64>,
}

impl TextureRecording {
    /// Checks units and the non-negative force invariant.
    pub fn new(
        name: impl Into<String>,
        press_force: TimeSeries,
        skin_temp: TimeSeries,
        heat_flux: TimeSeries,
        image: SurfaceImage,
        thermal_conductivity_hint: Option<f64>,
    ) -> Result<Self, IngestError> {
        let check = |s: &TimeSeries, unit: Unit| {
            if s.unit() == unit {
                Ok(())
            } else {
                Err(IngestError::UnitMismatch {
                    path: PathBuf::new(),
                    expected: unit.column(),
                    found: s.unit().column().to_string(),
                })
            }
        };
        check(&press_force, Unit::Newton)?;
        check(&skin_temp, Unit::Celsius)?;
        check(&heat_flux, Unit::WattPerSquareMeter)?;
        if let Some((index, &value)) = press_force.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(IngestError::NegativeForce { index, value });
        }
        Ok(Self { name: name.into(), press_force, skin_temp, heat_flux, image, thermal_conductivity_hint })
    }

    /// Non-fatal findings, such as skin temperatures outside the physiological band.
    pub fn ingestion_warnings(&self) -> Vec<String> {
        let (lo, hi) = SKIN_TEMP_BOUNDS_C;
        let outside = self.skin_temp.values().iter().filter(|v| **v < lo || **v > hi).count();
        if outside > 0 {
            vec![format!(
                "{}: {outside} skin-temperature samples outside [{lo}, {hi}] °C",
                self.name
            )]
        } else {
            Vec::new()
        }
    }
}
