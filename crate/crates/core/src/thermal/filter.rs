use std::f64::consts::{PI, SQRT_2};

use super::ThermalError;
use crate::texdata::TimeSeries;

/// Second-order Butterworth low-pass section (bilinear transform with
/// pre-warped cutoff).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, ThermalError> {
        let nyquist = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0) || !cutoff_hz.is_finite() {
            return Err(ThermalError::InvalidCutoff(cutoff_hz));
        }
        if cutoff_hz >= nyquist {
            return Err(ThermalError::CutoffAboveNyquist { cutoff_hz, nyquist_hz: nyquist });
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
        })
    }

    /// Direct form II transposed, zero initial state.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (mut z1, mut z2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = b0 * v + z1;
                z1 = b1 * v - a1 * y + z2;
                z2 = b2 * v - a2 * y;
                y
            })
            .collect()
    }

    /// Runs the section on deviations from the first sample, so a constant
    /// input passes through bit-for-bit.
    fn run_anchored(&self, x: &[f64]) -> Vec<f64> {
        let x0 = x[0];
        let dev: Vec<f64> = x.iter().map(|v| v - x0).collect();
        self.run(&dev).into_iter().map(|v| v + x0).collect()
    }

    /// Forward-backward application with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Vec<f64> {
        let n = x.len();
        let pad = pad.min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));

        let mut y = self.run_anchored(&ext);
        y.reverse();
        let mut y = self.run_anchored(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase second-order low-pass. DC gain is exactly one.
pub fn lowpass(series: &TimeSeries, cutoff_hz: f64) -> Result<TimeSeries, ThermalError> {
    let fs = series.sample_rate();
    let section = Biquad::butterworth_lowpass(cutoff_hz, fs)?;
    // Three time constants of padding at each end.
    let pad = (3.0 * fs / cutoff_hz).ceil() as usize;
    Ok(series.with_values(section.filtfilt(series.values(), pad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::texdata::Unit;

    fn sine(freq: f64, fs: f64, seconds: f64) -> TimeSeries {
        let n = (fs * seconds) as usize;
        let v = (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect();
        TimeSeries::uniform(0.0, 1.0 / fs, v, Unit::Celsius).unwrap()
    }

    /// Independent magnitude of the bilinear-transformed analog Butterworth:
    /// |H| = 1 / sqrt(1 + (tan(pi f/fs) / tan(pi fc/fs))^4); forward-backward squares it.
    fn zero_phase_gain(f: f64, fc: f64, fs: f64) -> f64 {
        let r = (PI * f / fs).tan() / (PI * fc / fs).tan();
        1.0 / (1.0 + r.powi(4))
    }

    fn mid_amplitude(s: &TimeSeries) -> f64 {
        let v = s.values();
        let n = v.len();
        v[n / 4..3 * n / 4].iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn constant_passes_exactly() {
        let s = TimeSeries::uniform(0.0, 0.01, vec![31.7; 500], Unit::Celsius).unwrap();
        assert_eq!(lowpass(&s, 1.0).unwrap(), s);
        assert_eq!(lowpass(&s, 10.0).unwrap(), s);
    }

    #[test]
    fn slow_sine_preserved() {
        let fs = 100.0;
        let oracle = zero_phase_gain(0.05, 1.0, fs);
        assert!(oracle > 0.98);
        let out = lowpass(&sine(0.05, fs, 80.0), 1.0).unwrap();
        let amp = mid_amplitude(&out);
        assert!((amp - oracle).abs() < 0.01, "amp {amp} oracle {oracle}");
        assert!(amp > 0.98);
    }

    #[test]
    fn fast_sine_attenuated() {
        let fs = 1000.0;
        let oracle = zero_phase_gain(50.0, 1.0, fs);
        assert!(oracle < 0.01);
        let out = lowpass(&sine(50.0, fs, 20.0), 1.0).unwrap();
        let amp = mid_amplitude(&out);
        assert!(amp < 0.01, "amp {amp}");
        assert!(amp <= oracle * 1.5 + 1e-9, "amp {amp} oracle {oracle}");
    }

    #[test]
    fn matches_oracle_across_band() {
        let fs = 200.0;
        for f in [0.2, 0.5, 1.0, 2.0, 4.0] {
            let oracle = zero_phase_gain(f, 1.0, fs);
            let amp = mid_amplitude(&lowpass(&sine(f, fs, 60.0), 1.0).unwrap());
            assert!((amp - oracle).abs() < 5e-3, "f {f}: amp {amp} oracle {oracle}");
        }
    }

    #[test]
    fn nyquist_rejected() {
        let s = sine(1.0, 100.0, 2.0);
        assert!(matches!(lowpass(&s, 50.0), Err(ThermalError::CutoffAboveNyquist { .. })));
        assert!(matches!(lowpass(&s, 0.0), Err(ThermalError::InvalidCutoff(_))));
    }

    #[test]
    fn second_pass_changes_in_band_sine_by_less_than_ripple() {
        let fs = 100.0;
        let f = 0.2;
        let s = sine(f, fs, 60.0);
        let once = lowpass(&s, 1.0).unwrap();
        let twice = lowpass(&once, 1.0).unwrap();
        let a1 = mid_amplitude(&once);
        let a2 = mid_amplitude(&twice);
        // Single-pass deviation from unity at this frequency bounds the change.
        let ripple = 1.0 - zero_phase_gain(f, 1.0, fs);
        assert!((a1 - a2).abs() <= ripple + 1e-3, "{a1} {a2} {ripple}");
    }
}
