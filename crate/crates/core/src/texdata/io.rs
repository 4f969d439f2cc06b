use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IngestError, SurfaceImage, TextureRecording, TimeSeries, Unit};

/// On-disk description of one texture recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub force: PathBuf,
    pub skin_temp: PathBuf,
    pub heat_flux: PathBuf,
    pub image: PathBuf,
    pub mm_per_pixel: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_conductivity: Option<f64>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, IngestError> {
        if !path.exists() {
            return Err(IngestError::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| IngestError::Manifest { path: path.to_path_buf(), reason: e.message().to_string() })
    }
}

/// Canonical CSV text for a trace: header, then `{t},{v}` rows with
/// shortest round-trip float formatting and LF endings.
pub fn trace_csv(series: &TimeSeries) -> String {
    let mut out = String::with_capacity(series.len() * 24);
    out.push_str("time_s,");
    out.push_str(series.unit().column());
    out.push('\n');
    for (t, v) in series.iter() {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

/// Reads a two-column trace CSV whose value column must match `unit`.
pub fn read_trace(path: &Path, unit: Unit) -> Result<TimeSeries, IngestError> {
    if !path.exists() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| IngestError::io(path, e))?;
    let headers = reader.headers().map_err(|e| IngestError::io(path, e))?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found.len() != 2 || found[0] != "time_s" {
        return Err(IngestError::BadHeader { path: path.to_path_buf(), expected: unit.column(), found: found.join(",") });
    }
    if found[1] != unit.column() {
        return Err(match Unit::from_column(found[1]) {
            Some(_) => IngestError::UnitMismatch {
                path: path.to_path_buf(),
                expected: unit.column(),
                found: found[1].to_string(),
            },
            None => IngestError::BadHeader { path: path.to_path_buf(), expected: unit.column(), found: found.join(",") },
        });
    }

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| IngestError::io(path, e))?;
        let parse = |field: Option<&str>| -> Result<f64, IngestError> {
            let text = field.unwrap_or("");
            text.trim().parse::<f64>().map_err(|_| IngestError::ParseValue {
                path: path.to_path_buf(),
                row,
                text: text.to_string(),
            })
        };
        timestamps.push(parse(record.get(0))?);
        values.push(parse(record.get(1))?);
    }
    TimeSeries::new(timestamps, values, unit)
}

/// Loads and validates the recording described by a manifest file.
pub fn load_recording(manifest_path: &Path) -> Result<TextureRecording, IngestError> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };

    let force = read_trace(&resolve(&manifest.force), Unit::Newton)?;
    let skin = read_trace(&resolve(&manifest.skin_temp), Unit::Celsius)?;
    let flux = read_trace(&resolve(&manifest.heat_flux), Unit::WattPerSquareMeter)?;
    let image = SurfaceImage::load(&resolve(&manifest.image), manifest.mm_per_pixel)?;
    TextureRecording::new(manifest.name, force, skin, flux, image, manifest.thermal_conductivity)
}

/// Writes `manifest.toml`, the three trace CSVs and `surface.pgm` into
/// `dir`. Returns the manifest path.
pub fn save_recording(rec: &TextureRecording, dir: &Path) -> Result<PathBuf, IngestError> {
    fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let manifest = Manifest {
        name: rec.name.clone(),
        force: "force.csv".into(),
        skin_temp: "skin_temp.csv".into(),
        heat_flux: "heat_flux.csv".into(),
        image: "surface.pgm".into(),
        mm_per_pixel: rec.image.mm_per_pixel(),
        thermal_conductivity: rec.thermal_conductivity_hint,
    };
    let write = |name: &Path, body: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| IngestError::io(&p, e))
    };
    write(&manifest.force, trace_csv(&rec.press_force).as_bytes())?;
    write(&manifest.skin_temp, trace_csv(&rec.skin_temp).as_bytes())?;
    write(&manifest.heat_flux, trace_csv(&rec.heat_flux).as_bytes())?;
    write(&manifest.image, &rec.image.to_pgm())?;
    let text = toml::to_string(&manifest).map_err(|e| IngestError::io(dir, e))?;
    let manifest_path = dir.join("manifest.toml");
    fs::write(&manifest_path, text).map_err(|e| IngestError::io(&manifest_path, e))?;
    Ok(manifest_path)
}
