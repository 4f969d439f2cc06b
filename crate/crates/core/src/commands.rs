//! Per-texture command bundle and its on-disk form.
//!
//! A rendered texture directory holds:
//!
//! - `commands.toml`: actuator segments, polynomial coefficients and wave metadata
//! - `pressure.csv`: actuator displacement and speed sampled at 100 Hz
//! - `thermal.csv`: display temperature the polynomial was fitted to
//! - `roughness.csv`: valve transitions (`time_s,state`, 1 = ON)
//! - `roughness_1khz.csv`: the same wave as a dense 1 kHz binary trace
//!
//! Only `commands.toml` and `roughness.csv` are needed to reload a set.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roughness::{RoughnessWave, Transition, ValveState};
use crate::softness::{PressureProfile, Segment};
use crate::thermal::{Poly7, ThermalCommand, POLY_TERMS};

pub const COMMANDS_FILE: &str = "commands.toml";
pub const PRESSURE_FILE: &str = "pressure.csv";
pub const THERMAL_FILE: &str = "thermal.csv";
pub const ROUGHNESS_FILE: &str = "roughness.csv";
pub const ROUGHNESS_DENSE_FILE: &str = "roughness_1khz.csv";
pub const PRESSURE_CSV_RATE_HZ: f64 = 100.0;
pub const DENSE_RATE_HZ: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum CommandSetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Thermal channel as stored: the fitted polynomial plus fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub coeffs: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub onset_s: f64,
    pub fit_rmse_c: f64,
    pub clamped_samples: usize,
}

impl ThermalSpec {
    pub fn poly(&self) -> Poly7 {
        let mut coeffs = [0.0; POLY_TERMS];
        coeffs.copy_from_slice(&self.coeffs);
        Poly7 { coeffs, t_start: self.t_start, t_end: self.t_end }
    }
}

impl From<&ThermalCommand> for ThermalSpec {
    fn from(c: &ThermalCommand) -> Self {
        Self {
            coeffs: c.poly.coeffs.to_vec(),
            t_start: c.poly.t_start,
            t_end: c.poly.t_end,
            onset_s: c.onset,
            fit_rmse_c: c.fit_rmse,
            clamped_samples: c.clamped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PressureSpec {
    target_displacement_mm: f64,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveSpec {
    duration_s: f64,
    nominal_speed_mm_s: f64,
    initial_state: u8,
    transitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandsFile {
    name: String,
    pressure: PressureSpec,
    thermal: ThermalSpec,
    roughness: WaveSpec,
}

/// Everything the ring needs to render one texture.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandSet {
    pub name: String,
    pub profile: PressureProfile,
    pub thermal: ThermalSpec,
    pub wave: RoughnessWave,
}

impl CommandSet {
    pub fn new(name: impl Into<String>, profile: PressureProfile, thermal: &ThermalCommand, wave: RoughnessWave) -> Self {
        Self { name: name.into(), profile, thermal: thermal.into(), wave }
    }

    /// Commanded temperature `s` seconds into static contact.
    pub fn thermal_target(&self, s: f64) -> f64 {
        let p = self.thermal.poly();
        p.eval_held(p.t_start + s)
    }

    pub fn initial_temp(&self) -> f64 {
        self.thermal.poly().eval_tau(0.0)
    }

    fn commands_file(&self) -> CommandsFile {
        CommandsFile {
            name: self.name.clone(),
            pressure: PressureSpec {
                target_displacement_mm: self.profile.target_displacement_mm(),
                segments: self.profile.segments().to_vec(),
            },
            thermal: self.thermal.clone(),
            roughness: WaveSpec {
                duration_s: self.wave.duration_s(),
                nominal_speed_mm_s: self.wave.nominal_speed_mm_s(),
                initial_state: self.wave.initial().bit(),
                transitions: self.wave.transitions().len(),
            },
        }
    }

    pub fn commands_toml(&self) -> String {
        toml::to_string(&self.commands_file()).expect("command set serializes")
    }

    /// Writes the command files into `dir`, creating it if needed.
    /// `display_csv` is the fitted display-temperature trace, when available.
    pub fn write_dir(&self, dir: &Path, display_csv: Option<&str>) -> Result<Vec<PathBuf>, CommandSetError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut files = vec![
            (COMMANDS_FILE, self.commands_toml()),
            (PRESSURE_FILE, self.profile.to_csv(PRESSURE_CSV_RATE_HZ)),
            (ROUGHNESS_FILE, self.wave.to_csv()),
            (ROUGHNESS_DENSE_FILE, self.wave.dense_csv(DENSE_RATE_HZ)),
        ];
        if let Some(csv) = display_csv {
            files.push((THERMAL_FILE, csv.to_owned()));
        }
        files
            .into_iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                write_atomic(&path, &body).map_err(|e| io_err(&path, e))?;
                Ok(path)
            })
            .collect()
    }

    pub fn read_dir(dir: &Path) -> Result<Self, CommandSetError> {
        let path = dir.join(COMMANDS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let fmt = |message: String| CommandSetError::Format { path: path.clone(), message };
        let file: CommandsFile = toml::from_str(&text).map_err(|e| fmt(e.to_string()))?;

        let segments: [Segment; 3] = file
            .pressure
            .segments
            .try_into()
            .map_err(|s: Vec<Segment>| fmt(format!("expected 3 pressure segments, found {}", s.len())))?;
        let profile = PressureProfile::from_segments(segments, file.pressure.target_displacement_mm)
            .ok_or_else(|| fmt("pressure segments do not form a rise/hold/fall profile".into()))?;
        if file.thermal.coeffs.len() != POLY_TERMS {
            return Err(fmt(format!("expected {POLY_TERMS} polynomial coefficients, found {}", file.thermal.coeffs.len())));
        }
        if !(file.thermal.t_end > file.thermal.t_start) {
            return Err(fmt("thermal t_end must exceed t_start".into()));
        }

        let wave_path = dir.join(ROUGHNESS_FILE);
        let transitions = read_transitions(&wave_path)?;
        let spec = &file.roughness;
        let initial = ValveState::from_bit(spec.initial_state).ok_or_else(|| fmt(format!("initial_state must be 0 or 1, found {}", spec.initial_state)))?;
        let wave = RoughnessWave::new(initial, transitions, spec.duration_s, spec.nominal_speed_mm_s);
        if wave.transitions().len() != spec.transitions {
            return Err(CommandSetError::Format {
                path: wave_path,
                message: format!("expected {} alternating transitions, found {}", spec.transitions, wave.transitions().len()),
            });
        }
        Ok(Self { name: file.name, profile, thermal: file.thermal, wave })
    }
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn io_err(path: &Path, source: std::io::Error) -> CommandSetError {
    CommandSetError::Io { path: path.to_path_buf(), source }
}

fn read_transitions(path: &Path) -> Result<Vec<Transition>, CommandSetError> {
    let fmt = |message: String| CommandSetError::Format { path: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => fmt(format!("{other:?}")),
    })?;
    let headers = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "state"] {
        return Err(fmt(format!("expected header time_s,state, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (row, record) in reader.deserialize::<(f64, u8)>().enumerate() {
        let (time_s, bit) = record.map_err(|e| fmt(format!("row {}: {e}", row + 2)))?;
        let state = ValveState::from_bit(bit).ok_or_else(|| fmt(format!("row {}: state must be 0 or 1", row + 2)))?;
        out.push(Transition { time_s, state });
    }
    Ok(out)
}
