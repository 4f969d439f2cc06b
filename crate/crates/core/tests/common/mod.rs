//! Shared test helpers.
#![allow(dead_code)]

use haptex::roughness::PeakSet;

/// Every index that represents a strict plateau maximum (middle of the run).
pub fn brute_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    (0..n)
        .filter(|&i| {
            let (mut a, mut b) = (i, i);
            while a > 0 && x[a - 1] == x[i] {
                a -= 1;
            }
            while b + 1 < n && x[b + 1] == x[i] {
                b += 1;
            }
            a > 0 && b + 1 < n && x[a - 1] < x[i] && x[b + 1] < x[i] && i == (a + b) / 2
        })
        .collect()
}

/// Reference level on one side: the lowest sample among all windows that
/// start at the peak and never exceed it.
pub fn brute_base(x: &[f64], p: usize, left: bool) -> f64 {
    let mut base = x[p];
    let range: Vec<usize> = if left { (0..=p).collect() } else { (p..x.len()).collect() };
    for &k in &range {
        let (lo, hi) = if left { (k, p) } else { (p, k) };
        if x[lo..=hi].iter().all(|v| *v <= x[p]) {
            base = base.min(x[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    base
}

pub fn brute_select(x: &[f64], sep: usize, min_prom: f64) -> Vec<(usize, f64)> {
    let mut c: Vec<(usize, f64)> = brute_maxima(x)
        .into_iter()
        .map(|p| (p, x[p] - brute_base(x, p, true).max(brute_base(x, p, false))))
        .filter(|(_, pr)| *pr >= min_prom)
        .collect();
    c.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for (p, pr) in c {
        if kept.iter().all(|(q, _)| p.abs_diff(*q) >= sep) {
            kept.push((p, pr));
        }
    }
    kept
}

pub fn brute_detect(x: &[f64], sep: usize, min_prom: f64) -> PeakSet {
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let mut all: Vec<(usize, f64, bool)> = brute_select(x, sep, min_prom)
        .into_iter()
        .map(|(p, pr)| (p, pr, true))
        .chain(brute_select(&neg, sep, min_prom).into_iter().map(|(p, pr)| (p, pr, false)))
        .collect();
    all.sort_by_key(|e| e.0);
    // Repeatedly resolve the first adjacent same-kind pair.
    while let Some(k) = (0..all.len().saturating_sub(1)).find(|&k| all[k].2 == all[k + 1].2) {
        let drop = if all[k + 1].1 > all[k].1 { k } else { k + 1 };
        all.remove(drop);
    }
    PeakSet {
        maxima: all.iter().filter(|e| e.2).map(|e| e.0).collect(),
        minima: all.iter().filter(|e| !e.2).map(|e| e.0).collect(),
    }
}
