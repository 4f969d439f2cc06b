//! Softness rendering: press-force trace → trapezoidal syringe displacement.
//!
//! The press and lift slopes of the recorded force are mapped affinely onto
//! the linear actuator's speed range; stiffer surfaces therefore inflate and
//! deflate the pouch faster. The static-contact phase is a plateau with the
//! actuator held still.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::texdata::{TextureRecording, TimeSeries};

/// Fractional drop from peak force that marks lift-off.
pub const LIFT_DROP_FRACTION: f64 = 0.05;
/// Moving-average window used before locating the peak.
pub const PEAK_SMOOTHING_S: f64 = 0.1;
/// The press ends at the first local maximum of the smoothed force once it
/// is within this fraction of its global maximum; a flat noisy plateau has
/// no stable argmax.
pub const PEAK_REACH_FRACTION: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoftnessError {
    #[error("force trace has no interior peak")]
    NoInteriorPeak,
    #[error("force never drops {:.0}% below its peak after the press", LIFT_DROP_FRACTION * 100.0)]
    NoLiftOff,
    #[error("{phase} interval holds {samples} samples, need at least 2")]
    DegenerateInterval { phase: &'static str, samples: usize },
    #[error("fitted slopes have the wrong sign (press {press} N/s, lift {lift} N/s)")]
    InvalidSlopes { press: f64, lift: f64 },
    #[error("empty or invalid range [{0}, {1}]")]
    EmptyRange(f64, f64),
}

/// Time intervals of one press-hold-lift gesture, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressPhases {
    pub press: (f64, f64),
    pub hold: (f64, f64),
    pub lift: (f64, f64),
}

/// Least-squares force slopes in N/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    pub press: f64,
    pub lift: f64,
}

impl SlopePair {
    pub fn new(press: f64, lift: f64) -> Result<Self, SoftnessError> {
        if press > 0.0 && lift < 0.0 {
            Ok(Self { press, lift })
        } else {
            Err(SoftnessError::InvalidSlopes { press, lift })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_s: f64,
    pub speed_mm_s: f64,
}

/// Rise / plateau / fall actuator command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureProfile {
    segments: [Segment; 3],
    target_displacement_mm: f64,
}

impl PressureProfile {
    /// Builds the trapezoid from signed speeds. `rise_speed > 0`, `fall_speed < 0`.
    pub fn trapezoid(rise_speed: f64, fall_speed: f64, target_mm: f64, hold_s: f64) -> Self {
        assert!(rise_speed > 0.0 && fall_speed < 0.0 && target_mm > 0.0 && hold_s >= 0.0);
        Self {
            segments: [
                Segment { duration_s: target_mm / rise_speed, speed_mm_s: rise_speed },
                Segment { duration_s: hold_s, speed_mm_s: 0.0 },
                Segment { duration_s: target_mm / -fall_speed, speed_mm_s: fall_speed },
            ],
            target_displacement_mm: target_mm,
        }
    }

    /// Rebuilds a profile from stored segments, checking the shape.
    pub fn from_segments(segments: [Segment; 3], target_mm: f64) -> Option<Self> {
        let [r, p, f] = segments;
        let ok = r.speed_mm_s > 0.0
            && p.speed_mm_s == 0.0
            && f.speed_mm_s < 0.0
            && target_mm > 0.0
            && ((r.speed_mm_s * r.duration_s) - target_mm).abs() <= 1e-9 * target_mm
            && ((-f.speed_mm_s * f.duration_s) - target_mm).abs() <= 1e-9 * target_mm;
        ok.then_some(Self { segments, target_displacement_mm: target_mm })
    }

    pub fn segments(&self) -> &[Segment; 3] {
        &self.segments
    }

    pub fn rise(&self) -> Segment {
        self.segments[0]
    }

    pub fn plateau(&self) -> Segment {
        self.segments[1]
    }

    pub fn fall(&self) -> Segment {
        self.segments[2]
    }

    pub fn target_displacement_mm(&self) -> f64 {
        self.target_displacement_mm
    }

    pub fn hold_duration_s(&self) -> f64 {
        self.segments[1].duration_s
    }

    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Sum of speed × duration over all segments.
    pub fn net_displacement_mm(&self) -> f64 {
        self.segments.iter().map(|s| s.speed_mm_s * s.duration_s).sum()
    }

    /// Commanded actuator speed at `t` seconds after the start; 0 outside.
    pub fn speed_at(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for s in &self.segments {
            if t >= start && t < start + s.duration_s {
                return s.speed_mm_s;
            }
            start += s.duration_s;
        }
        0.0
    }

    /// Piecewise-linear displacement at `t`.
    pub fn displacement_at(&self, t: f64) -> f64 {
        let [r, p, f] = self.segments;
        if t <= 0.0 {
            0.0
        } else if t < r.duration_s {
            r.speed_mm_s * t
        } else if t < r.duration_s + p.duration_s {
            self.target_displacement_mm
        } else if t < r.duration_s + p.duration_s + f.duration_s {
            self.target_displacement_mm + f.speed_mm_s * (t - r.duration_s - p.duration_s)
        } else {
            0.0
        }
    }

    /// `time_s,displacement_mm,speed_mm_s` sampled at `rate_hz` over the profile.
    pub fn to_csv(&self, rate_hz: f64) -> String {
        let n = (self.total_duration_s() * rate_hz).floor() as usize;
        let mut out = String::from("time_s,displacement_mm,speed_mm_s\n");
        for k in 0..=n {
            let t = k as f64 / rate_hz;
            let _ = writeln!(out, "{t},{},{}", self.displacement_at(t), self.speed_at(t));
        }
        out
    }
}

/// Mapping and shape parameters for [`build_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub slope_range: (f64, f64),
    pub speed_range: (f64, f64),
    pub target_displacement_mm: f64,
    pub hold_duration_s: f64,
}

/// Centered moving average; the window shrinks at the edges.
fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Splits a press-hold-lift force trace into its three phases.
pub fn segment_phases(force: &TimeSeries) -> Result<PressPhases, SoftnessError> {
    let raw = force.values();
    let t = force.timestamps();
    let n = raw.len();
    let window = ((PEAK_SMOOTHING_S / force.step()).round() as usize) | 1;
    let half = window / 2;
    let smooth = moving_average(raw, window);

    let top = first_argmax(&smooth);
    let reach = smooth[top] * (1.0 - PEAK_REACH_FRACTION);
    let mut coarse = smooth.iter().position(|v| *v >= reach).unwrap_or(top);
    let eps = 1e-12 * smooth[top].abs();
    while coarse + 1 < n && smooth[coarse + 1] > smooth[coarse] + eps {
        coarse += 1;
    }
    let lo = coarse.saturating_sub(half);
    let hi = (coarse + half + 1).min(n);
    let peak = lo + first_argmax(&raw[lo..hi]);
    if peak == 0 || peak == n - 1 || top == n - 1 {
        return Err(SoftnessError::NoInteriorPeak);
    }

    let lift_level = (1.0 - LIFT_DROP_FRACTION) * smooth[top];
    let lift = (peak + 1..n).find(|&i| smooth[i] < lift_level).ok_or(SoftnessError::NoLiftOff)?;
    if lift == n - 1 {
        return Err(SoftnessError::NoLiftOff);
    }

    let contact_level = LIFT_DROP_FRACTION * raw[peak];
    let start = (0..peak).rev().find(|&i| raw[i] <= contact_level).unwrap_or(0);
    let end = (lift + 1..n).find(|&i| raw[i] <= contact_level).unwrap_or(n - 1);

    Ok(PressPhases {
        press: (t[start], t[peak]),
        hold: (t[peak], t[lift]),
        lift: (t[lift], t[end]),
    })
}

/// Ordinary least-squares slope of the samples with time in `[a, b]`.
fn ls_slope(series: &TimeSeries, (a, b): (f64, f64), phase: &'static str) -> Result<f64, SoftnessError> {
    let pts: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t >= a && *t <= b).collect();
    if pts.len() < 2 {
        return Err(SoftnessError::DegenerateInterval { phase, samples: pts.len() });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let fm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, f)| (t - tm) * (f - fm)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn compute_slopes(force: &TimeSeries, phases: &PressPhases) -> Result<SlopePair, SoftnessError> {
    let press = ls_slope(force, phases.press, "press")?;
    let lift = ls_slope(force, phases.lift, "lift")?;
    SlopePair::new(press, lift)
}

/// Affine slope → speed map, clamping the slope into `slope_range`.
pub fn map_slope_to_speed(slope: f64, slope_range: (f64, f64), speed_range: (f64, f64)) -> Result<f64, SoftnessError> {
    let (s_min, s_max) = slope_range;
    let (v_min, v_max) = speed_range;
    if !(s_min < s_max) || !s_min.is_finite() || !s_max.is_finite() {
        return Err(SoftnessError::EmptyRange(s_min, s_max));
    }
    if !(v_min < v_max) || !v_min.is_finite() || !v_max.is_finite() {
        return Err(SoftnessError::EmptyRange(v_min, v_max));
    }
    let s = slope.clamp(s_min, s_max);
    Ok(v_min + (s - s_min) * (v_max - v_min) / (s_max - s_min))
}

pub fn build_profile(slopes: SlopePair, config: &ProfileConfig) -> Result<PressureProfile, SoftnessError> {
    let rise = map_slope_to_speed(slopes.press, config.slope_range, config.speed_range)?;
    let fall = -map_slope_to_speed(-slopes.lift, config.slope_range, config.speed_range)?;
    if !(config.target_displacement_mm > 0.0) || !(config.hold_duration_s >= 0.0) {
        return Err(SoftnessError::EmptyRange(0.0, config.target_displacement_mm));
    }
    Ok(PressureProfile::trapezoid(rise, fall, config.target_displacement_mm, config.hold_duration_s))
}

/// Min/max of a set of fitted press slopes, for use as `slope_range`.
pub fn slope_range_of(press_slopes: &[f64]) -> Result<(f64, f64), SoftnessError> {
    let lo = press_slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = press_slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(SoftnessError::EmptyRange(lo, hi))
    }
}

/// Everything the softness stage derives from one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftnessRender {
    pub phases: PressPhases,
    pub slopes: SlopePair,
    pub profile: PressureProfile,
}

/// Phase segmentation and slope fit only; used to derive `slope_range`
/// across a texture set before any profile is built.
pub fn fit_press(rec: &TextureRecording) -> Result<(PressPhases, SlopePair), SoftnessError> {
    let phases = segment_phases(&rec.press_force)?;
    let slopes = compute_slopes(&rec.press_force, &phases)?;
    Ok((phases, slopes))
}

pub fn render_softness(rec: &TextureRecording, config: &ProfileConfig) -> Result<SoftnessRender, SoftnessError> {
    let (phases, slopes) = fit_press(rec)?;
    let profile = build_profile(slopes, config)?;
    Ok(SoftnessRender { phases, slopes, profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::texdata::Unit;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const DT: f64 = 0.01;

    fn force(f: impl Fn(f64) -> f64, end: f64) -> TimeSeries {
        let n = (end / DT).round() as usize + 1;
        TimeSeries::uniform(0.0, DT, (0..n).map(|i| f(i as f64 * DT)).collect(), Unit::Newton).unwrap()
    }

    /// 0 → 3 N over `rise` s, flat until `hold_end`, down at 2 N/s.
    fn trapezoid_force(rise: f64, hold_end: f64) -> TimeSeries {
        force(
            move |t| {
                if t < rise {
                    3.0 * t / rise
                } else if t < hold_end {
                    3.0
                } else {
                    (3.0 - 2.0 * (t - hold_end)).max(0.0)
                }
            },
            hold_end + 3.0,
        )
    }

    fn config() -> ProfileConfig {
        ProfileConfig {
            slope_range: (0.2, 2.0),
            speed_range: (2.0, 20.0),
            target_displacement_mm: 8.0,
            hold_duration_s: 30.0,
        }
    }

    #[test]
    fn triangle_peak_location() {
        let f = force(|t| (3.0 - (t - 3.0).abs()).max(0.0), 6.0);
        let p = segment_phases(&f).unwrap();
        assert!((p.press.1 - 3.0).abs() <= DT + 1e-12);
    }

    #[test]
    fn trapezoid_phases() {
        let f = trapezoid_force(1.5, 31.5);
        let p = segment_phases(&f).unwrap();
        assert!(p.press.0 <= 0.1, "{p:?}");
        assert!((p.press.1 - 1.5).abs() < 1e-9, "{p:?}");
        assert_eq!(p.hold.0, p.press.1);
        assert_eq!(p.lift.0, p.hold.1);
        assert!((p.hold.1 - 31.5).abs() <= 0.1, "{p:?}");
        // Brute-force scan of the stated rule: first sample after the
        // plateau below 95% of 3 N on this noise-free ramp.
        let crossing = 31.5 + 0.15 / 2.0;
        assert!(p.hold.1 >= crossing - 1e-9 && p.hold.1 <= crossing + 0.06, "{p:?}");
    }

    #[test]
    fn monotone_trace_has_no_peak() {
        let f = force(|t| t, 5.0);
        assert_eq!(segment_phases(&f), Err(SoftnessError::NoInteriorPeak));
    }

    #[test]
    fn analytic_slopes() {
        let fast = trapezoid_force(1.5, 31.5);
        let s = compute_slopes(&fast, &segment_phases(&fast).unwrap()).unwrap();
        assert!((s.press - 2.0).abs() < 1e-9, "{s:?}");
        assert!((s.lift + 2.0).abs() < 1e-9, "{s:?}");
        let slow = trapezoid_force(15.0, 45.0);
        let s = compute_slopes(&slow, &segment_phases(&slow).unwrap()).unwrap();
        assert!((s.press - 0.2).abs() < 1e-9, "{s:?}");
    }

    /// Closed-form least squares on the exact noisy samples, independent of
    /// the phase segmentation path.
    #[test]
    fn noisy_slope_within_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let clean = trapezoid_force(1.5, 31.5);
        let noisy = clean.with_values(clean.values().iter().map(|v| (v + noise.sample(&mut rng)).max(0.0)).collect());
        let phases = segment_phases(&noisy).unwrap();
        let s = compute_slopes(&noisy, &phases).unwrap();
        assert!((s.press - 2.0).abs() / 2.0 < 0.05, "{s:?}");
        assert!((s.lift + 2.0).abs() / 2.0 < 0.05, "{s:?}");
    }

    #[test]
    fn degenerate_interval() {
        let f = trapezoid_force(1.5, 31.5);
        let phases = PressPhases { press: (0.503, 0.505), hold: (0.505, 31.5), lift: (31.5, 33.0) };
        assert!(matches!(
            compute_slopes(&f, &phases),
            Err(SoftnessError::DegenerateInterval { phase: "press", .. })
        ));
    }

    #[test]
    fn slope_speed_map_examples() {
        let r = (0.2, 2.0);
        let v = (2.0, 20.0);
        assert_eq!(map_slope_to_speed(0.2, r, v).unwrap(), 2.0);
        assert!((map_slope_to_speed(1.1, r, v).unwrap() - 11.0).abs() < 1e-12);
        assert!((map_slope_to_speed(0.65, r, v).unwrap() - 6.5).abs() < 1e-12);
        assert_eq!(map_slope_to_speed(9.0, r, v).unwrap(), 20.0);
        assert!(matches!(map_slope_to_speed(1.0, (1.0, 1.0), v), Err(SoftnessError::EmptyRange(..))));
        assert!(matches!(map_slope_to_speed(1.0, r, (5.0, 2.0)), Err(SoftnessError::EmptyRange(..))));
    }

    #[test]
    fn stiff_profile_rises_faster() {
        let stiff = build_profile(SlopePair::new(2.0, -2.0).unwrap(), &config()).unwrap();
        let soft = build_profile(SlopePair::new(0.2, -0.2).unwrap(), &config()).unwrap();
        assert!(stiff.rise().speed_mm_s > soft.rise().speed_mm_s);
        assert!(stiff.rise().duration_s < soft.rise().duration_s);
    }

    #[test]
    fn symmetric_trapezoid() {
        let p = build_profile(SlopePair::new(0.9, -0.9).unwrap(), &config()).unwrap();
        assert_eq!(p.rise().speed_mm_s, -p.fall().speed_mm_s);
        assert_eq!(p.rise().duration_s, p.fall().duration_s);
        assert_eq!(p.plateau().speed_mm_s, 0.0);
        assert_eq!(p.hold_duration_s(), 30.0);
    }

    #[test]
    fn csv_samples_trapezoid() {
        let p = PressureProfile::trapezoid(4.0, -8.0, 8.0, 1.0);
        let csv = p.to_csv(100.0);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "time_s,displacement_mm,speed_mm_s");
        assert_eq!(rows[1], "0,0,4");
        assert_eq!(rows.len(), 1 + 401);
        assert!((p.displacement_at(2.5) - 8.0).abs() < 1e-12);
        assert!((p.displacement_at(3.25) - 6.0).abs() < 1e-12);
        assert!((p.displacement_at(3.5) - 4.0).abs() < 1e-12);
        assert_eq!(p.displacement_at(4.0), 0.0);
    }

    proptest! {
        #[test]
        fn profile_invariants(press in 0.01f64..5.0, lift in 0.01f64..5.0, target in 0.5f64..20.0, hold in 0.0f64..60.0) {
            let cfg = ProfileConfig { target_displacement_mm: target, hold_duration_s: hold, ..config() };
            let p = build_profile(SlopePair::new(press, -lift).unwrap(), &cfg).unwrap();
            let r = p.rise();
            let f = p.fall();
            prop_assert!(r.speed_mm_s > 0.0 && f.speed_mm_s < 0.0);
            prop_assert_eq!(p.plateau().speed_mm_s, 0.0);
            prop_assert!((r.speed_mm_s * r.duration_s - target).abs() <= 1e-9 * target);
            prop_assert!((-f.speed_mm_s * f.duration_s - target).abs() <= 1e-9 * target);
            prop_assert!(p.net_displacement_mm().abs() <= 1e-9);
        }

        #[test]
        fn map_is_monotone(a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let va = map_slope_to_speed(a, (0.2, 2.0), (2.0, 20.0)).unwrap();
            let vb = map_slope_to_speed(b, (0.2, 2.0), (2.0, 20.0)).unwrap();
            if a > b {
                prop_assert!(va >= vb);
                if b >= 0.2 && a <= 2.0 { prop_assert!(va > vb); }
            }
        }

        #[test]
        fn slope_fit_is_homogeneous(scale in 0.1f64..10.0) {
            let f = trapezoid_force(1.5, 31.5);
            let scaled = f.with_values(f.values().iter().map(|v| v * scale).collect());
            let base = compute_slopes(&f, &segment_phases(&f).unwrap()).unwrap();
            let s = compute_slopes(&scaled, &segment_phases(&scaled).unwrap()).unwrap();
            prop_assert_eq!(segment_phases(&f).unwrap(), segment_phases(&scaled).unwrap());
            prop_assert!((s.press - scale * base.press).abs() <= 1e-9 * scale * base.press);
            prop_assert!((s.lift - scale * base.lift).abs() <= 1e-9 * scale * base.lift.abs());
        }
    }
}
