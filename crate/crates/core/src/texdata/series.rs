use std::fmt;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Relative tolerance on the sampling step.
pub const STEP_REL_TOL: f64 = 1e-6;

/// Physical unit carried by a [`TimeSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Newton,
    Celsius,
    WattPerSquareMeter,
}

impl Unit {
    /// CSV value-column header for this unit.
    pub fn column(self) -> &'static str {
        match self {
            Unit::Newton => "force_n",
            Unit::Celsius => "temp_c",
            Unit::WattPerSquareMeter => "flux_w_m2",
        }
    }

    pub fn from_column(name: &str) -> Option<Unit> {
        match name {
            "force_n" => Some(Unit::Newton),
            "temp_c" => Some(Unit::Celsius),
            "flux_w_m2" => Some(Unit::WattPerSquareMeter),
            _ => None,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Newton => "N",
            Unit::Celsius => "°C",
            Unit::WattPerSquareMeter => "W/m²",
        };
        f.write_str(s)
    }
}

/// A uniformly sampled, unit-tagged signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
    unit: Unit,
}

impl TimeSeries {
    /// Validates length, monotonicity and step uniformity.
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>, unit: Unit) -> Result<Self, IngestError> {
        if timestamps.len() != values.len() {
            return Err(IngestError::LengthMismatch {
                timestamps: timestamps.len(),
                values: values.len(),
            });
        }
        if timestamps.len() < 2 {
            return Err(IngestError::TooShort { len: timestamps.len() });
        }
        if let Some(index) = timestamps
            .iter()
            .zip(&values)
            .position(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(IngestError::NonFinite { index });
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(IngestError::NonMonotonicTimestamps { index: i + 1 });
            }
        }
        let n = timestamps.len();
        let mean_step = (timestamps[n - 1] - timestamps[0]) / (n - 1) as f64;
        for (i, w) in timestamps.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - mean_step).abs() > STEP_REL_TOL * mean_step {
                return Err(IngestError::NonUniformStep { index: i + 1, step, expected: mean_step });
            }
        }
        Ok(Self { timestamps, values, unit })
    }

    /// Builds `t0 + i * step` timestamps for the given values.
    pub fn uniform(t0: f64, step: f64, values: Vec<f64>, unit: Unit) -> Result<Self, IngestError> {
        let timestamps = (0..values.len()).map(|i| t0 + i as f64 * step).collect();
        Self::new(timestamps, values, unit)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }

    /// Mean sampling step in seconds.
    pub fn step(&self) -> f64 {
        (self.end() - self.start()) / (self.len() - 1) as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.step()
    }

    /// Same time base, new values. Length must match.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "value count must match time base");
        Self { timestamps: self.timestamps.clone(), values, unit: self.unit }
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    /// Keeps samples from `index` on. Returns `None` when fewer than two remain.
    pub fn tail_from(&self, index: usize) -> Option<Self> {
        if self.len().saturating_sub(index) < 2 {
            return None;
        }
        Some(Self {
            timestamps: self.timestamps[index..].to_vec(),
            values: self.values[index..].to_vec(),
            unit: self.unit,
        })
    }

    /// True when both series share exactly the same timestamps.
    pub fn same_time_base(&self, other: &TimeSeries) -> bool {
        self.timestamps == other.timestamps
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.timestamps.iter().copied().zip(self.values.iter().copied())
    }
}
