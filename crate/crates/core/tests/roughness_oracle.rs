//! Exhaustive reference for peak detection, compared on random signals.

mod common;

use common::brute_detect;
use haptex::roughness::detect_peaks;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn detect_peaks_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let n = rng.random_range(0..=200);
        // Coarse levels produce plateaus and ties.
        let levels = rng.random_range(2..12);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let sep = rng.random_range(1..8);
        let min_prom = rng.random_range(0..levels) as f64 * 0.5;
        let got = detect_peaks(&x, sep, min_prom);
        let want = brute_detect(&x, sep, min_prom);
        assert_eq!(got, want, "case {case}: sep {sep} prom {min_prom} x {x:?}");
    }
}

#[test]
fn oracle_agrees_on_continuous_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(3..=200);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let sep = rng.random_range(1..6);
        assert_eq!(detect_peaks(&x, sep, 0.1), brute_detect(&x, sep, 0.1));
    }
}
