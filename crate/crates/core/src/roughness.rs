//! Roughness rendering: surface image → timed binary valve wave.
//!
//! The image is box-filtered, its mid-height row is scanned for prominent
//! intensity extrema, minima open the valve and maxima close it. Pixel
//! positions become times at the sliding speed, and any toggling faster than
//! the valve can follow is replaced by a uniform wave at the valve limit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::texdata::{SurfaceImage, TextureRecording};

pub const DEFAULT_SPEED_MM_S: f64 = 50.0;
pub const DEFAULT_F_MAX_HZ: f64 = 300.0;
pub const DEFAULT_KERNEL_PX: usize = 5;
pub const DEFAULT_PROMINENCE_FRACTION: f64 = 0.05;
pub const DEFAULT_SLIDE_DURATION_S: f64 = 10.0;
/// Slack on the minimum-gap comparison for float rounding of transition times.
pub const GAP_EPS_S: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoughnessError {
    #[error("kernel size must be odd, got {0}")]
    EvenKernel(usize),
    #[error("kernel size {kernel} exceeds image dimension {limit}")]
    OversizedKernel { kernel: usize, limit: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Box-filtered image with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub mm_per_pixel: f64,
}

impl FilteredImage {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

impl From<&SurfaceImage> for FilteredImage {
    fn from(img: &SurfaceImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.pixels().iter().map(|p| f64::from(*p)).collect(),
            mm_per_pixel: img.mm_per_pixel(),
        }
    }
}

/// Mean filter with edge replication; output keeps the input size.
pub fn mean_filter(img: &SurfaceImage, kernel_px: usize) -> Result<FilteredImage, RoughnessError> {
    if kernel_px.is_multiple_of(2) {
        return Err(RoughnessError::EvenKernel(kernel_px));
    }
    let limit = img.width().min(img.height());
    if kernel_px > limit {
        return Err(RoughnessError::OversizedKernel { kernel: kernel_px, limit });
    }
    let src = FilteredImage::from(img);
    if kernel_px == 1 {
        return Ok(src);
    }
    let (w, h) = (src.width, src.height);
    let r = (kernel_px / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = (-r..=r).map(|d| src.data[y * w + clamp(x as isize + d, w)]).sum();
        }
    }
    let area = (kernel_px * kernel_px) as f64;
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| rows[clamp(y as isize + d, h) * w + x]).sum();
            data[y * w + x] = s / area;
        }
    }
    Ok(FilteredImage { width: w, height: h, data, mm_per_pixel: src.mm_per_pixel })
}

/// One row of intensities; positions are the pixel indices `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSignal {
    pub intensities: Vec<f64>,
    pub mm_per_pixel: f64,
}

impl ScanSignal {
    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn range(&self) -> f64 {
        let lo = self.intensities.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.intensities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// Row `floor(height / 2)`.
pub fn extract_scanline(img: &FilteredImage) -> ScanSignal {
    let y = img.height / 2;
    ScanSignal {
        intensities: img.data[y * img.width..(y + 1) * img.width].to_vec(),
        mm_per_pixel: img.mm_per_pixel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PeakKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub prominence: f64,
    pub kind: PeakKind,
}

/// Interleaved maxima and minima of a scanline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

impl PeakSet {
    pub fn is_empty(&self) -> bool {
        self.maxima.is_empty() && self.minima.is_empty()
    }

    /// Both kinds merged in index order.
    pub fn merged(&self) -> Vec<(usize, PeakKind)> {
        let mut all: Vec<(usize, PeakKind)> = self
            .maxima
            .iter()
            .map(|i| (*i, PeakKind::Maximum))
            .chain(self.minima.iter().map(|i| (*i, PeakKind::Minimum)))
            .collect();
        all.sort_by_key(|p| p.0);
        all
    }
}

/// Local maxima, one per plateau (its middle sample, rounded down).
/// The first and last samples never qualify.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height above the higher of the two lowest points reached before the
/// signal climbs above the peak (or ends) on either side.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left = left.min(v);
    }
    let mut right = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right = right.min(v);
    }
    h - left.max(right)
}

/// Prominence filter, then greedy separation in descending prominence
/// (ties: lower index first). Returns kept peaks with their prominences.
fn select_maxima(x: &[f64], min_separation: usize, min_prominence: f64) -> Vec<(usize, f64)> {
    let mut candidates: Vec<(usize, f64)> = local_maxima(x)
        .into_iter()
        .map(|i| (i, prominence(x, i)))
        .filter(|(_, p)| *p >= min_prominence)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut blocked = vec![false; x.len()];
    let mut kept = Vec::new();
    for (i, p) in candidates {
        if blocked[i] {
            continue;
        }
        kept.push((i, p));
        let lo = i.saturating_sub(min_separation - 1);
        let hi = (i + min_separation).min(x.len());
        blocked[lo..hi].iter_mut().for_each(|b| *b = true);
    }
    kept.sort_by_key(|k| k.0);
    kept
}

/// Prominent maxima and minima with a minimum same-kind separation, repaired
/// to strictly alternate by dropping the less prominent of two neighbours of
/// the same kind (the earlier one wins ties).
pub fn detect_peaks(signal: &[f64], min_separation_px: usize, min_prominence: f64) -> PeakSet {
    let sep = min_separation_px.max(1);
    let negated: Vec<f64> = signal.iter().map(|v| -v).collect();
    let mut all: Vec<Peak> = select_maxima(signal, sep, min_prominence)
        .into_iter()
        .map(|(index, prominence)| Peak { index, prominence, kind: PeakKind::Maximum })
        .chain(
            select_maxima(&negated, sep, min_prominence)
                .into_iter()
                .map(|(index, prominence)| Peak { index, prominence, kind: PeakKind::Minimum }),
        )
        .collect();
    all.sort_by_key(|p| p.index);

    let mut stack: Vec<Peak> = Vec::with_capacity(all.len());
    for p in all {
        match stack.last_mut() {
            Some(top) if top.kind == p.kind => {
                if p.prominence > top.prominence {
                    *top = p;
                }
            }
            _ => stack.push(p),
        }
    }

    let mut set = PeakSet::default();
    for p in stack {
        match p.kind {
            PeakKind::Maximum => set.maxima.push(p.index),
            PeakKind::Minimum => set.minima.push(p.index),
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValveState {
    On,
    Off,
}

impl ValveState {
    pub fn toggled(self) -> Self {
        match self {
            ValveState::On => ValveState::Off,
            ValveState::Off => ValveState::On,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            ValveState::On => 1,
            ValveState::Off => 0,
        }
    }

    pub fn from_bit(b: u8) -> Option<Self> {
        match b {
            1 => Some(ValveState::On),
            0 => Some(ValveState::Off),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub time_s: f64,
    pub state: ValveState,
}

/// Binary valve command: a start state followed by alternating transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughnessWave {
    initial: ValveState,
    transitions: Vec<Transition>,
    duration_s: f64,
    nominal_speed_mm_s: f64,
}

impl RoughnessWave {
    /// Builds a wave, dropping any transition that would not change state.
    pub fn new(initial: ValveState, transitions: impl IntoIterator<Item = Transition>, duration_s: f64, nominal_speed_mm_s: f64) -> Self {
        let mut wave = Self { initial, transitions: Vec::new(), duration_s, nominal_speed_mm_s };
        for t in transitions {
            wave.push(t);
        }
        wave
    }

    /// Wave reconstructed from its transitions alone; the start state is the
    /// opposite of the first transition (OFF when there are none).
    pub fn from_transitions(transitions: Vec<Transition>, duration_s: f64, nominal_speed_mm_s: f64) -> Self {
        let initial = transitions.first().map_or(ValveState::Off, |t| t.state.toggled());
        Self::new(initial, transitions, duration_s, nominal_speed_mm_s)
    }

    fn push(&mut self, t: Transition) {
        if t.state != self.current() {
            self.transitions.push(t);
        }
    }

    fn current(&self) -> ValveState {
        self.transitions.last().map_or(self.initial, |t| t.state)
    }

    pub fn initial(&self) -> ValveState {
        self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn nominal_speed_mm_s(&self) -> f64 {
        self.nominal_speed_mm_s
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn state_at(&self, t: f64) -> ValveState {
        let k = self.transitions.partition_point(|tr| tr.time_s <= t);
        if k == 0 {
            self.initial
        } else {
            self.transitions[k - 1].state
        }
    }

    pub fn min_gap_s(&self) -> Option<f64> {
        self.transitions.windows(2).map(|w| w[1].time_s - w[0].time_s).reduce(f64::min)
    }

    /// Number of OFF→ON transitions per second of duration.
    pub fn on_rate_hz(&self) -> f64 {
        self.transitions.iter().filter(|t| t.state == ValveState::On).count() as f64 / self.duration_s
    }

    /// `time_s,state` rows of the transitions (1 = ON).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,state\n");
        for t in &self.transitions {
            let _ = writeln!(out, "{},{}", t.time_s, t.state.bit());
        }
        out
    }

    /// Dense binary trace sampled at `rate_hz` over the duration.
    pub fn dense_csv(&self, rate_hz: f64) -> String {
        let n = (self.duration_s * rate_hz).floor() as usize;
        let mut out = String::from("time_s,state\n");
        for k in 0..=n {
            let t = k as f64 / rate_hz;
            let _ = writeln!(out, "{t},{}", self.state_at(t).bit());
        }
        out
    }

    /// Repeats the wave with period `self.duration_s` until `duration_s`,
    /// returning to the start state at every seam.
    pub fn tiled(&self, duration_s: f64) -> Self {
        let period = self.duration_s;
        let mut out = Self { initial: self.initial, transitions: Vec::new(), duration_s, nominal_speed_mm_s: self.nominal_speed_mm_s };
        let mut k = 0usize;
        loop {
            let offset = k as f64 * period;
            if offset >= duration_s {
                break;
            }
            if k > 0 {
                out.push(Transition { time_s: offset, state: self.initial });
            }
            for t in &self.transitions {
                let time_s = offset + t.time_s;
                if time_s >= duration_s {
                    break;
                }
                out.push(Transition { time_s, ..*t });
            }
            k += 1;
        }
        out
    }

    /// Drops transitions at or after `duration_s`.
    pub fn truncated(&self, duration_s: f64) -> Self {
        Self {
            initial: self.initial,
            transitions: self.transitions.iter().copied().filter(|t| t.time_s < duration_s).collect(),
            duration_s,
            nominal_speed_mm_s: self.nominal_speed_mm_s,
        }
    }
}

/// Peak pixels → times at `speed`: minima switch the valve ON, maxima OFF.
/// No frequency cap is applied.
pub fn peaks_to_wave(peaks: &PeakSet, scan_len_px: usize, mm_per_pixel: f64, speed_mm_s: f64) -> RoughnessWave {
    let to_time = |p: usize| p as f64 * mm_per_pixel / speed_mm_s;
    let transitions: Vec<Transition> = peaks
        .merged()
        .into_iter()
        .map(|(p, kind)| Transition {
            time_s: to_time(p),
            state: match kind {
                PeakKind::Minimum => ValveState::On,
                PeakKind::Maximum => ValveState::Off,
            },
        })
        .collect();
    RoughnessWave::from_transitions(transitions, to_time(scan_len_px), speed_mm_s)
}

pub fn build_wave(peaks: &PeakSet, scan_len_px: usize, mm_per_pixel: f64, speed_mm_s: f64, f_max_hz: f64) -> Result<RoughnessWave, RoughnessError> {
    positive("speed", speed_mm_s)?;
    positive("f_max", f_max_hz)?;
    Ok(cap_frequency(&peaks_to_wave(peaks, scan_len_px, mm_per_pixel, speed_mm_s), f_max_hz))
}

fn positive(name: &'static str, value: f64) -> Result<(), RoughnessError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(RoughnessError::NonPositive { name, value })
    }
}

/// Replaces every run of transitions closer than half a valve period with a
/// uniform square wave at `f_max_hz` spanning the run.
pub fn cap_frequency(wave: &RoughnessWave, f_max_hz: f64) -> RoughnessWave {
    let half = 0.5 / f_max_hz;
    let tr = wave.transitions();
    let mut out = RoughnessWave { transitions: Vec::with_capacity(tr.len()), ..wave.clone() };
    let mut i = 0;
    while i < tr.len() {
        let mut j = i;
        while j + 1 < tr.len() && tr[j + 1].time_s - tr[j].time_s < half - GAP_EPS_S {
            j += 1;
        }
        if j == i {
            out.push(tr[i]);
        } else {
            let start = tr[i].time_s;
            let steps = ((tr[j].time_s - start) / half + 1e-9).floor() as usize;
            let mut state = tr[i].state;
            for k in 0..=steps {
                out.push(Transition { time_s: start + k as f64 * half, state });
                state = state.toggled();
            }
        }
        i = j + 1;
    }
    out
}

/// Uniform square wave at `freq_hz` starting ON at t = 0.
pub fn uniform_wave(freq_hz: f64, duration_s: f64, nominal_speed_mm_s: f64) -> RoughnessWave {
    let half = 0.5 / freq_hz;
    let n = (duration_s / half - 1e-9).ceil().max(0.0) as usize;
    let mut state = ValveState::On;
    let transitions = (0..n).map(|k| {
        let t = Transition { time_s: k as f64 * half, state };
        state = state.toggled();
        t
    });
    RoughnessWave::new(ValveState::Off, transitions.collect::<Vec<_>>(), duration_s, nominal_speed_mm_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoughnessConfig {
    pub kernel_px: usize,
    /// Minimum prominence as a fraction of the scanline's intensity range.
    pub prominence_fraction: f64,
    /// Absolute minimum prominence; overrides the fraction when set.
    pub min_prominence: Option<f64>,
    pub speed_mm_s: f64,
    pub f_max_hz: f64,
    pub duration_s: f64,
    /// Per-texture manual square-wave frequency, keyed by texture name.
    pub manual_frequency_hz: BTreeMap<String, f64>,
}

impl Default for RoughnessConfig {
    fn default() -> Self {
        Self {
            kernel_px: DEFAULT_KERNEL_PX,
            prominence_fraction: DEFAULT_PROMINENCE_FRACTION,
            min_prominence: None,
            speed_mm_s: DEFAULT_SPEED_MM_S,
            f_max_hz: DEFAULT_F_MAX_HZ,
            duration_s: DEFAULT_SLIDE_DURATION_S,
            manual_frequency_hz: BTreeMap::new(),
        }
    }
}

impl RoughnessConfig {
    /// Pixels traversed in half a valve period.
    pub fn min_separation_px(&self, mm_per_pixel: f64) -> usize {
        ((self.speed_mm_s / (2.0 * self.f_max_hz * mm_per_pixel)) - 1e-9).ceil().max(1.0) as usize
    }
}

pub fn render_roughness(rec: &TextureRecording, config: &RoughnessConfig) -> Result<RoughnessWave, RoughnessError> {
    positive("speed", config.speed_mm_s)?;
    positive("f_max", config.f_max_hz)?;
    positive("duration", config.duration_s)?;
    if let Some(&f) = config.manual_frequency_hz.get(&rec.name) {
        positive("manual frequency", f)?;
        return Ok(uniform_wave(f.min(config.f_max_hz), config.duration_s, config.speed_mm_s));
    }

    let filtered = mean_filter(&rec.image, config.kernel_px)?;
    let scan = extract_scanline(&filtered);
    let min_prominence = config.min_prominence.unwrap_or(config.prominence_fraction * scan.range());
    let peaks = detect_peaks(&scan.intensities, config.min_separation_px(scan.mm_per_pixel), min_prominence);
    let single = peaks_to_wave(&peaks, scan.len(), scan.mm_per_pixel, config.speed_mm_s);
    let filled = if single.duration_s() < config.duration_s {
        single.tiled(config.duration_s)
    } else {
        single.truncated(config.duration_s)
    };
    Ok(cap_frequency(&filled, config.f_max_hz))
}
