//! Synthetic recordings shaped like the six study textures: stiff vs soft
//! press ramps, metal vs foam cooling curves, gratings vs noise fields.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{IngestError, SurfaceImage, TextureRecording, TimeSeries, Unit};

/// Force at which the database press stage stops.
pub const STOP_FORCE_N: f64 = 3.0;

const SAMPLE_RATE_HZ: f64 = 100.0;
const THERMAL_DURATION_S: f64 = 40.0;
const CONTACT_AT_S: f64 = 2.0;
const PRE_PRESS_S: f64 = 0.5;
const HOLD_S: f64 = 30.0;
const SKIN_START_C: f64 = 33.0;
const IMAGE_WIDTH: usize = 400;
const IMAGE_HEIGHT: usize = 48;
const MM_PER_PIXEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    RoughMetal,
    SmoothMetal,
    RoughFoam,
    SmoothFoam,
    Cardboard,
    Fabric,
}

impl Archetype {
    pub const ALL: [Archetype; 6] = [
        Archetype::RoughMetal,
        Archetype::SmoothMetal,
        Archetype::RoughFoam,
        Archetype::SmoothFoam,
        Archetype::Cardboard,
        Archetype::Fabric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::RoughMetal => "rough_metal",
            Archetype::SmoothMetal => "smooth_metal",
            Archetype::RoughFoam => "rough_foam",
            Archetype::SmoothFoam => "smooth_foam",
            Archetype::Cardboard => "cardboard",
            Archetype::Fabric => "fabric",
        }
    }

    /// Dense-peaked surfaces that get a manual valve-frequency override.
    pub fn is_fine_texture(self) -> bool {
        matches!(self, Archetype::Cardboard | Archetype::Fabric)
    }

    fn index(self) -> u64 {
        Archetype::ALL.iter().position(|a| *a == self).unwrap() as u64
    }

    fn profile(self) -> Profile {
        use Archetype::*;
        match self {
            SmoothMetal => Profile { press: 2.0, lift: -2.2, flux_peak: 1500.0, flux_late: 600.0, skin_drop: 3.0, k: 50.0 },
            RoughMetal => Profile { press: 1.6, lift: -1.8, flux_peak: 1200.0, flux_late: 500.0, skin_drop: 2.5, k: 40.0 },
            Cardboard => Profile { press: 0.9, lift: -1.0, flux_peak: 400.0, flux_late: 150.0, skin_drop: 1.2, k: 0.07 },
            Fabric => Profile { press: 0.5, lift: -0.55, flux_peak: 300.0, flux_late: 120.0, skin_drop: 1.0, k: 0.05 },
            SmoothFoam => Profile { press: 0.3, lift: -0.3, flux_peak: 110.0, flux_late: 60.0, skin_drop: 0.5, k: 0.035 },
            RoughFoam => Profile { press: 0.2, lift: -0.2, flux_peak: 90.0, flux_late: 55.0, skin_drop: 0.4, k: 0.03 },
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| IngestError::UnknownArchetype(s.to_string()))
    }
}

struct Profile {
    /// N/s while pressing.
    press: f64,
    /// N/s while lifting (negative).
    lift: f64,
    flux_peak: f64,
    flux_late: f64,
    skin_drop: f64,
    /// W/(m·K)
    k: f64,
}

/// Deterministic synthetic recording for `kind`.
pub fn generate_fixture(kind: Archetype, seed: u64) -> TextureRecording {
    let base = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (kind.index() << 56);
    let mut rngs = (0..3u64).map(|i| ChaCha8Rng::seed_from_u64(base.wrapping_add(i)));
    let (mut rng_temp, mut rng_flux, mut rng_img) = (rngs.next().unwrap(), rngs.next().unwrap(), rngs.next().unwrap());
    let profile = kind.profile();

    let force = press_trace(&profile);
    let (skin, flux) = thermal_traces(&profile, &mut rng_temp, &mut rng_flux);
    let image = surface(kind, &mut rng_img);
    TextureRecording::new(kind.name(), force, skin, flux, image, Some(profile.k))
        .expect("fixture satisfies recording invariants")
}

fn press_trace(p: &Profile) -> TimeSeries {
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let rise = STOP_FORCE_N / p.press;
    let hold_end = PRE_PRESS_S + rise + HOLD_S;
    let relax = 0.06;
    let release_from = STOP_FORCE_N - relax;
    let lift_end = hold_end + release_from / -p.lift;
    let end = lift_end + 1.0;
    let n = (end * SAMPLE_RATE_HZ).ceil() as usize;
    // First sample at or after the end of the ramp carries exactly the stop force.
    let plateau_start = ((PRE_PRESS_S + rise) * SAMPLE_RATE_HZ - 1e-9).ceil() as usize;
    let values = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            if t < PRE_PRESS_S {
                0.0
            } else if i < plateau_start {
                (p.press * (t - PRE_PRESS_S)).min(STOP_FORCE_N)
            } else if t < hold_end {
                STOP_FORCE_N - relax * (i - plateau_start) as f64 * dt / HOLD_S
            } else {
                (release_from + p.lift * (t - hold_end)).max(0.0)
            }
        })
        .collect();
    TimeSeries::uniform(0.0, dt, values, Unit::Newton).unwrap()
}

fn thermal_traces(p: &Profile, rng_temp: &mut ChaCha8Rng, rng_flux: &mut ChaCha8Rng) -> (TimeSeries, TimeSeries) {
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let n = (THERMAL_DURATION_S * SAMPLE_RATE_HZ) as usize;
    let temp_noise = Normal::new(0.0, 0.02).unwrap();
    let flux_noise = Normal::new(0.0, 5.0).unwrap();
    let mut skin = Vec::with_capacity(n);
    let mut flux = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let since = (t - CONTACT_AT_S).max(0.0);
        // Contact area builds up over ~2 s; flux then decays as the object warms.
        let build = 1.0 - (-since / 2.0).exp();
        let q = (p.flux_late + (p.flux_peak - p.flux_late) * (-since / 8.0).exp()) * build;
        let skin_t = SKIN_START_C - p.skin_drop * (1.0 - (-since / 10.0).exp());
        skin.push(skin_t + temp_noise.sample(rng_temp));
        flux.push(q + flux_noise.sample(rng_flux));
    }
    (
        TimeSeries::uniform(0.0, dt, skin, Unit::Celsius).unwrap(),
        TimeSeries::uniform(0.0, dt, flux, Unit::WattPerSquareMeter).unwrap(),
    )
}

fn surface(kind: Archetype, rng: &mut ChaCha8Rng) -> SurfaceImage {
    let (w, h) = (IMAGE_WIDTH, IMAGE_HEIGHT);
    let field: Vec<f64> = match kind {
        Archetype::SmoothMetal => vec![180.0; w * h],
        // 2 mm vertical grating: 40 px at 0.05 mm/px.
        Archetype::RoughMetal => grating(w, h, 40.0, 128.0, 90.0, 4.0, rng),
        Archetype::Cardboard => grating(w, h, 3.0, 120.0, 40.0, 8.0, rng),
        Archetype::Fabric => {
            let warp = grating(w, h, 3.0, 0.0, 1.0, 0.0, rng);
            let noise = Normal::new(0.0, 10.0).unwrap();
            (0..w * h)
                .map(|i| {
                    let y = i / w;
                    let weft = if (y / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    140.0 + 35.0 * warp[i] * weft + noise.sample(rng)
                })
                .collect()
        }
        Archetype::RoughFoam => blobs(w, h, 6, 128.0, 70.0, rng),
        Archetype::SmoothFoam => blobs(w, h, 20, 150.0, 25.0, rng),
    };
    let pixels = field.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    SurfaceImage::new(w, h, pixels, MM_PER_PIXEL).unwrap()
}

fn grating(w: usize, h: usize, period_px: f64, mean: f64, amp: f64, noise_sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).unwrap();
    let mut out = Vec::with_capacity(w * h);
    for _ in 0..h {
        for x in 0..w {
            let phase = std::f64::consts::TAU * x as f64 / period_px;
            let n = if noise_sd > 0.0 { noise.sample(rng) } else { 0.0 };
            out.push(mean + amp * phase.sin() + n);
        }
    }
    out
}

/// White noise smoothed by two box passes of the given radius, rescaled to
/// `mean ± amp` (amp = 2 standard deviations).
fn blobs(w: usize, h: usize, radius: usize, mean: f64, amp: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut field: Vec<f64> = (0..w * h).map(|_| unit.sample(rng)).collect();
    for _ in 0..2 {
        field = box_blur(&field, w, h, radius);
    }
    let m = field.iter().sum::<f64>() / field.len() as f64;
    let sd = (field.iter().map(|v| (v - m).powi(2)).sum::<f64>() / field.len() as f64).sqrt();
    field.iter().map(|v| mean + amp * 0.5 * (v - m) / sd).collect()
}

fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let k = (2 * r + 1) as f64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-(r as isize)..=r as isize).map(|d| src[y * w + clamp(x as isize + d, w)]).sum();
            tmp[y * w + x] = s / k;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-(r as isize)..=r as isize).map(|d| tmp[clamp(y as isize + d, h) * w + x]).sum();
            out[y * w + x] = s / k;
        }
    }
    out
}
