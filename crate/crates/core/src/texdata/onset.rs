use thiserror::Error;

use super::TimeSeries;

/// Flux magnitude (W/m²) above which the finger is taken to be in contact.
pub const DEFAULT_ONSET_THRESHOLD: f64 = 50.0;
/// How long (s) the flux must stay above threshold.
pub const DEFAULT_HOLD_S: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsetParams {
    pub threshold: f64,
    pub hold_s: f64,
}

impl Default for OnsetParams {
    fn default() -> Self {
        Self { threshold: DEFAULT_ONSET_THRESHOLD, hold_s: DEFAULT_HOLD_S }
    }
}

impl OnsetParams {
    /// Number of sampling steps spanned by the hold window on this series.
    /// Computed from the step ratio so that shifting the time axis cannot
    /// flip the count through rounding.
    pub fn hold_steps(&self, series: &TimeSeries) -> usize {
        (self.hold_s / series.step() - 1e-6).ceil().max(0.0) as usize
    }
}

/// The flux never stayed above threshold long enough: the recording holds no contact.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("no contact onset: |flux| never exceeds {threshold} W/m² for {hold_s} s")]
pub struct NoContactOnset {
    pub threshold: f64,
    pub hold_s: f64,
}

/// First time the flux magnitude exceeds the threshold and stays above it
/// for the hold duration.
pub fn detect_contact_onset(flux: &TimeSeries, params: OnsetParams) -> Result<f64, NoContactOnset> {
    let hold = params.hold_steps(flux);
    let values = flux.values();
    let mut run_start: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.abs() > params.threshold {
            let start = *run_start.get_or_insert(i);
            if i - start >= hold {
                return Ok(flux.timestamps()[start]);
            }
        } else {
            run_start = None;
        }
    }
    Err(NoContactOnset { threshold: params.threshold, hold_s: params.hold_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::texdata::Unit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn flux(values: Vec<f64>, t0: f64) -> TimeSeries {
        TimeSeries::uniform(t0, 0.01, values, Unit::WattPerSquareMeter).unwrap()
    }

    #[test]
    fn step_onset() {
        let v: Vec<f64> = (0..500).map(|i| if i < 200 { 0.0 } else { 800.0 }).collect();
        let t = detect_contact_onset(&flux(v, 0.0), OnsetParams::default()).unwrap();
        assert!((t - 2.0).abs() <= 0.01 + 1e-12, "onset {t}");
    }

    #[test]
    fn zero_flux_has_no_onset() {
        assert!(detect_contact_onset(&flux(vec![0.0; 100], 0.0), OnsetParams::default()).is_err());
    }

    #[test]
    fn short_excursion_is_ignored() {
        // 0.1 s spike, then sustained contact at 3 s.
        let v: Vec<f64> = (0..500)
            .map(|i| match i {
                100..=109 => 400.0,
                i if i >= 300 => 400.0,
                _ => 0.0,
            })
            .collect();
        let t = detect_contact_onset(&flux(v, 0.0), OnsetParams::default()).unwrap();
        assert!((t - 3.0).abs() < 1e-9);
    }

    #[test]
    fn negative_flux_counts_by_magnitude() {
        let v: Vec<f64> = (0..300).map(|i| if i < 100 { 0.0 } else { -300.0 }).collect();
        let t = detect_contact_onset(&flux(v, 0.0), OnsetParams::default()).unwrap();
        assert!((t - 1.0).abs() < 1e-9);
    }

    /// Exhaustive scan: first index whose whole hold window is above threshold.
    fn brute_force_onset(s: &TimeSeries, p: OnsetParams) -> Option<f64> {
        let t = s.timestamps();
        let v = s.values();
        (0..v.len()).find_map(|i| {
            let window: Vec<usize> = (i..v.len()).filter(|&j| t[j] - t[i] <= p.hold_s + 1e-9).collect();
            let covers = t[*window.last().unwrap()] - t[i] >= p.hold_s - 1e-9;
            (covers && window.iter().all(|&j| v[j].abs() > p.threshold)).then_some(t[i])
        })
    }

    #[test]
    fn noisy_ramp_matches_brute_force() {
        let p = OnsetParams::default();
        // Ramp crossing the threshold at 1.4 s.
        let slope = 500.0;
        let start = 1.4 - p.threshold / slope;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 5.0).unwrap();
            let v: Vec<f64> = (0..400)
                .map(|i| {
                    let t = i as f64 * 0.01;
                    (slope * (t - start)).max(0.0) + noise.sample(&mut rng)
                })
                .collect();
            let s = flux(v, 0.0);
            let got = detect_contact_onset(&s, p).unwrap();
            assert_eq!(Some(got), brute_force_onset(&s, p));
            assert!(got >= 1.4 - p.hold_s && got <= 1.4 + p.hold_s + 0.02, "seed {seed}: {got}");
        }
    }

    #[test]
    fn translation_equivariant() {
        let v: Vec<f64> = (0..300).map(|i| if i < 137 { 3.0 } else { 90.0 }).collect();
        let base = detect_contact_onset(&flux(v.clone(), 0.0), OnsetParams::default()).unwrap();
        for shift in [0.005, 1.0, 17.3, 1234.567] {
            let shifted = detect_contact_onset(&flux(v.clone(), shift), OnsetParams::default()).unwrap();
            assert!((shifted - (base + shift)).abs() < 1e-9, "shift {shift}");
        }
    }
}
