//! Run configuration and the per-texture render pipeline.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commands::CommandSet;
use crate::evalstats::default_labels;
use crate::plantsim::PlantParams;
use crate::roughness::{render_roughness, RoughnessConfig, RoughnessError};
use crate::softness::{fit_press, slope_range_of, PressureProfile, ProfileConfig, SoftnessError, SoftnessRender};
use crate::texdata::{load_recording, IngestError, TextureRecording};
use crate::thermal::{render_thermal, ThermalCommand, ThermalConfig, ThermalError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftnessSettings {
    /// Press-slope range mapped onto `speed_range`; derived from all
    /// configured textures when absent.
    pub slope_range: Option<(f64, f64)>,
    pub speed_range: (f64, f64),
    pub target_displacement_mm: f64,
    pub hold_duration_s: f64,
}

impl Default for SoftnessSettings {
    fn default() -> Self {
        Self { slope_range: None, speed_range: (2.0, 20.0), target_displacement_mm: 8.0, hold_duration_s: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Training round left out of the statistics; 0 keeps every round.
    pub exclude_round: u32,
    pub labels: Vec<String>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { exclude_round: 1, labels: default_labels() }
    }
}

impl EvalSettings {
    pub fn excluded(&self) -> Option<u32> {
        (self.exclude_round != 0).then_some(self.exclude_round)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Texture manifest paths, relative to the config file.
    #[serde(default)]
    pub textures: Vec<PathBuf>,
    #[serde(default)]
    pub softness: SoftnessSettings,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub roughness: RoughnessConfig,
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default)]
    pub eval: EvalSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        for p in &mut cfg.textures {
            if p.is_relative() {
                *p = base_dir.join(&p);
            }
        }
        Ok(cfg)
    }

    /// Reads and validates a config; texture paths must exist.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::from_toml(&text, base).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if let Some(p) = self.textures.iter().find(|p| !p.is_file()) {
            return invalid(format!("texture manifest {} does not exist", p.display()));
        }
        let s = &self.softness;
        if !(s.speed_range.0 > 0.0 && s.speed_range.0 < s.speed_range.1) {
            return invalid(format!("softness.speed_range {:?} must be increasing and positive", s.speed_range));
        }
        if let Some((lo, hi)) = s.slope_range {
            if !(lo > 0.0 && lo < hi) {
                return invalid(format!("softness.slope_range {:?} must be increasing and positive", (lo, hi)));
            }
        }
        if !(s.target_displacement_mm > 0.0) || !(s.hold_duration_s >= 0.0) {
            return invalid("softness.target_displacement_mm must be positive and hold_duration_s non-negative".into());
        }
        let t = &self.thermal;
        if !(t.r_skin_display > 0.0 && t.skin_cutoff_hz > 0.0 && t.flux_cutoff_hz > 0.0 && t.onset_threshold_w_m2 > 0.0 && t.onset_hold_s >= 0.0) {
            return invalid("thermal settings must be positive".into());
        }
        let r = &self.roughness;
        if r.kernel_px.is_multiple_of(2) || !(r.speed_mm_s > 0.0 && r.f_max_hz > 0.0 && r.duration_s > 0.0) || !(0.0..1.0).contains(&r.prominence_fraction) {
            return invalid("roughness: kernel_px must be odd; speed, f_max and duration positive; prominence_fraction in [0, 1)".into());
        }
        if let Some((name, f)) = r.manual_frequency_hz.iter().find(|(_, f)| !(**f > 0.0)) {
            return invalid(format!("roughness.manual_frequency_hz.{name} must be positive, got {f}"));
        }
        if r.f_max_hz > self.plant.pneumatic.valve_f_max_hz {
            return invalid(format!("roughness.f_max_hz {} exceeds the valve limit {}", r.f_max_hz, self.plant.pneumatic.valve_f_max_hz));
        }
        self.plant.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.eval.labels.len() < 2 {
            return invalid("eval.labels needs at least two textures".into());
        }
        Ok(())
    }

    pub fn profile_config(&self, slope_range: (f64, f64)) -> ProfileConfig {
        ProfileConfig {
            slope_range,
            speed_range: self.softness.speed_range,
            target_displacement_mm: self.softness.target_displacement_mm,
            hold_duration_s: self.softness.hold_duration_s,
        }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{name}: softness: {source}")]
    Softness { name: String, source: SoftnessError },
    #[error("{name}: thermal: {source}")]
    Thermal { name: String, source: ThermalError },
    #[error("{name}: roughness: {source}")]
    Roughness { name: String, source: RoughnessError },
    #[error("unknown texture '{0}'")]
    UnknownTexture(String),
}

pub fn load_textures(cfg: &RunConfig) -> Result<Vec<TextureRecording>, IngestError> {
    cfg.textures.iter().map(|p| load_recording(p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTexture {
    pub softness: SoftnessRender,
    pub thermal: ThermalCommand,
    pub commands: CommandSet,
}

/// Press-slope range across a texture set.
pub fn fleet_slope_range(recs: &[TextureRecording]) -> Result<(f64, f64), RenderError> {
    let slopes = recs
        .iter()
        .map(|r| fit_press(r).map(|(_, s)| s.press).map_err(|source| RenderError::Softness { name: r.name.clone(), source }))
        .collect::<Result<Vec<_>, _>>()?;
    slope_range_of(&slopes).map_err(|source| RenderError::Softness { name: "texture set".into(), source })
}

pub fn render_texture(rec: &TextureRecording, cfg: &RunConfig, slope_range: (f64, f64)) -> Result<RenderedTexture, RenderError> {
    let name = || rec.name.clone();
    let softness = crate::softness::render_softness(rec, &cfg.profile_config(slope_range))
        .map_err(|source| RenderError::Softness { name: name(), source })?;
    let thermal = render_thermal(rec, &cfg.thermal).map_err(|source| RenderError::Thermal { name: name(), source })?;
    let wave = render_roughness(rec, &cfg.roughness).map_err(|source| RenderError::Roughness { name: name(), source })?;
    let commands = CommandSet::new(rec.name.clone(), softness.profile.clone(), &thermal, wave);
    Ok(RenderedTexture { softness, thermal, commands })
}

/// Renders the selected textures (all when `selected` is `None`). The slope
/// range always spans every configured texture so a texture's output does
/// not depend on the selection.
pub fn render_set(recs: &[TextureRecording], cfg: &RunConfig, selected: Option<&[String]>) -> Result<Vec<RenderedTexture>, RenderError> {
    if let Some(names) = selected {
        if let Some(missing) = names.iter().find(|n| !recs.iter().any(|r| &r.name == *n)) {
            return Err(RenderError::UnknownTexture(missing.clone()));
        }
    }
    let slope_range = match cfg.softness.slope_range {
        Some(r) => r,
        None => fleet_slope_range(recs)?,
    };
    recs.iter()
        .filter(|r| selected.is_none_or(|names| names.contains(&r.name)))
        .map(|r| render_texture(r, cfg, slope_range))
        .collect()
}

pub fn summary_csv(rendered: &[RenderedTexture]) -> String {
    let mut out = String::from(
        "texture,press_slope_n_s,lift_slope_n_s,rise_speed_mm_s,fall_speed_mm_s,rise_s,hold_s,fall_s,onset_s,initial_temp_c,final_temp_c,fit_rmse_c,clamped_samples,transitions,on_rate_hz\n",
    );
    for r in rendered {
        let p: &PressureProfile = &r.commands.profile;
        let c = &r.commands;
        let end = c.thermal.t_end - c.thermal.t_start;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.name,
            r.softness.slopes.press,
            r.softness.slopes.lift,
            p.rise().speed_mm_s,
            p.fall().speed_mm_s,
            p.rise().duration_s,
            p.plateau().duration_s,
            p.fall().duration_s,
            c.thermal.onset_s,
            c.initial_temp(),
            c.thermal_target(end),
            c.thermal.fit_rmse_c,
            c.thermal.clamped_samples,
            c.wave.transitions().len(),
            c.wave.on_rate_hz()
        );
    }
    out
}
