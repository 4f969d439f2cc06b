//! Thermal rendering with the semi-infinite body contact model.
//!
//! During contact the skin and object surfaces exchange the same flux through
//! a contact resistance, `q'' = (T_skin - T_object) / R_skin,object`. A display
//! reproducing that flux through its own resistance must sit at
//! `T_display = T_skin - q'' · R_skin,display`, which only needs the measured
//! skin temperature and heat flux.

mod filter;
mod poly;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::filter::{lowpass, Biquad};
pub use self::poly::{fit_poly7, Poly7, PolyFit, POLY_ORDER, POLY_TERMS};
use crate::texdata::{detect_contact_onset, NoContactOnset, OnsetParams, TextureRecording, TimeSeries, Unit};

/// Contact resistance of the silicone tube display, m²K/W.
pub const DEFAULT_R_SKIN_DISPLAY: f64 = 0.0015;
/// Commandable range, bounded by the cold and hot supply tanks.
pub const DISPLAY_BOUNDS_C: (f64, f64) = (5.0, 42.5);
pub const DEFAULT_SKIN_CUTOFF_HZ: f64 = 10.0;
pub const DEFAULT_FLUX_CUTOFF_HZ: f64 = 1.0;
/// Fits worse than this attach a quality warning.
pub const RMSE_WARN_C: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error(transparent)]
    NoContactOnset(#[from] NoContactOnset),
    #[error("thermal conductivity must be positive, got {0} W/(m·K)")]
    NonPositiveConductivity(f64),
    #[error("contact resistance must be positive, got {0} m²K/W")]
    NonPositiveResistance(f64),
    #[error("cutoff {cutoff_hz} Hz is at or above the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("invalid cutoff frequency {0} Hz")]
    InvalidCutoff(f64),
    #[error("skin-temperature and heat-flux traces do not share a time base")]
    Misaligned,
    #[error("fewer than two samples remain after the contact onset")]
    EmptyAfterTrim,
    #[error("polynomial fit needs at least {needed} samples, got {found}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("polynomial fit is rank deficient")]
    RankDeficient,
}

/// Skin–object contact resistance for an even surface pressed at about 2 N:
/// `R = (0.37 + k) / (1870 · k)`.
pub fn contact_resistance(k_object: f64) -> Result<f64, ThermalError> {
    if !(k_object > 0.0) {
        return Err(ThermalError::NonPositiveConductivity(k_object));
    }
    Ok((0.37 + k_object) / (1870.0 * k_object))
}

/// Filtered, onset-trimmed traces on a shared time base.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalInputs {
    skin_temp: TimeSeries,
    heat_flux: TimeSeries,
    onset: f64,
    r_skin_display: f64,
}

impl ThermalInputs {
    /// Trims both traces to `t >= onset`.
    pub fn new(skin_temp: &TimeSeries, heat_flux: &TimeSeries, onset: f64, r_skin_display: f64) -> Result<Self, ThermalError> {
        if !(r_skin_display > 0.0) {
            return Err(ThermalError::NonPositiveResistance(r_skin_display));
        }
        if !skin_temp.same_time_base(heat_flux) {
            return Err(ThermalError::Misaligned);
        }
        let first = skin_temp.timestamps().iter().position(|t| *t >= onset).ok_or(ThermalError::EmptyAfterTrim)?;
        let skin_temp = skin_temp.tail_from(first).ok_or(ThermalError::EmptyAfterTrim)?;
        let heat_flux = heat_flux.tail_from(first).ok_or(ThermalError::EmptyAfterTrim)?;
        Ok(Self { skin_temp, heat_flux, onset, r_skin_display })
    }

    pub fn skin_temp(&self) -> &TimeSeries {
        &self.skin_temp
    }

    pub fn heat_flux(&self) -> &TimeSeries {
        &self.heat_flux
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn r_skin_display(&self) -> f64 {
        self.r_skin_display
    }
}

/// Pointwise `T_skin - q'' · R`, without clamping.
pub fn display_temperature_raw(skin: &[f64], flux: &[f64], r_skin_display: f64) -> Vec<f64> {
    skin.iter().zip(flux).map(|(t, q)| t - q * r_skin_display).collect()
}

/// Display temperature after clamping to [`DISPLAY_BOUNDS_C`].
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayTemperature {
    pub series: TimeSeries,
    /// Samples that had to be clamped.
    pub clamped: usize,
}

pub fn display_temperature(inputs: &ThermalInputs) -> DisplayTemperature {
    let (lo, hi) = DISPLAY_BOUNDS_C;
    let raw = display_temperature_raw(inputs.skin_temp.values(), inputs.heat_flux.values(), inputs.r_skin_display);
    let clamped = raw.iter().filter(|v| **v < lo || **v > hi).count();
    let values = raw.into_iter().map(|v| v.clamp(lo, hi)).collect();
    DisplayTemperature { series: inputs.skin_temp.with_values(values).with_unit(Unit::Celsius), clamped }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalConfig {
    pub r_skin_display: f64,
    pub skin_cutoff_hz: f64,
    pub flux_cutoff_hz: f64,
    pub onset_threshold_w_m2: f64,
    pub onset_hold_s: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        let onset = OnsetParams::default();
        Self {
            r_skin_display: DEFAULT_R_SKIN_DISPLAY,
            skin_cutoff_hz: DEFAULT_SKIN_CUTOFF_HZ,
            flux_cutoff_hz: DEFAULT_FLUX_CUTOFF_HZ,
            onset_threshold_w_m2: onset.threshold,
            onset_hold_s: onset.hold_s,
        }
    }
}

impl ThermalConfig {
    pub fn onset_params(&self) -> OnsetParams {
        OnsetParams { threshold: self.onset_threshold_w_m2, hold_s: self.onset_hold_s }
    }
}

/// The thermal channel's output for one texture.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalCommand {
    pub display_temp: TimeSeries,
    pub poly: Poly7,
    pub fit_rmse: f64,
    pub onset: f64,
    pub clamped: usize,
    pub warnings: Vec<String>,
}

impl ThermalCommand {
    /// Commanded temperature `s` seconds into the static-contact phase,
    /// holding the end value afterwards.
    pub fn target_at(&self, s: f64) -> f64 {
        self.poly.eval_held(self.poly.t_start + s)
    }

    pub fn initial_temp(&self) -> f64 {
        self.poly.eval_tau(0.0)
    }

    /// `time_s,display_temp_c` over the trimmed trace.
    pub fn display_csv(&self) -> String {
        let mut out = String::from("time_s,display_temp_c\n");
        for (t, v) in self.display_temp.iter() {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }
}

/// Filter → trim → display temperature → degree-7 fit.
pub fn render_thermal(rec: &TextureRecording, config: &ThermalConfig) -> Result<ThermalCommand, ThermalError> {
    let skin = lowpass(&rec.skin_temp, config.skin_cutoff_hz)?;
    let flux = lowpass(&rec.heat_flux, config.flux_cutoff_hz)?;
    let onset = detect_contact_onset(&flux, config.onset_params())?;
    let inputs = ThermalInputs::new(&skin, &flux, onset, config.r_skin_display)?;
    let display = display_temperature(&inputs);
    let fit = fit_poly7(&display.series)?;

    let mut warnings = Vec::new();
    if display.clamped > 0 {
        warnings.push(format!(
            "{}: {} display-temperature samples clamped to [{}, {}] °C",
            rec.name, display.clamped, DISPLAY_BOUNDS_C.0, DISPLAY_BOUNDS_C.1
        ));
    }
    if fit.rmse > RMSE_WARN_C {
        warnings.push(format!("{}: polynomial fit rmse {:.3} °C exceeds {RMSE_WARN_C} °C", rec.name, fit.rmse));
    }
    Ok(ThermalCommand {
        display_temp: display.series,
        poly: fit.poly,
        fit_rmse: fit.rmse,
        onset,
        clamped: display.clamped,
        warnings,
    })
}
