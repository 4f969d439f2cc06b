use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ThermalError;
use crate::texdata::TimeSeries;

pub const POLY_ORDER: usize = 7;
pub const POLY_TERMS: usize = POLY_ORDER + 1;

/// Degree-7 polynomial over normalized time `τ = (t - t_start) / (t_end - t_start)`.
/// Coefficients are in ascending powers of `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poly7 {
    pub coeffs: [f64; POLY_TERMS],
    pub t_start: f64,
    pub t_end: f64,
}

impl Poly7 {
    pub fn tau(&self, t: f64) -> f64 {
        (t - self.t_start) / (self.t_end - self.t_start)
    }

    pub fn eval_tau(&self, tau: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * tau + c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_tau(self.tau(t))
    }

    /// Evaluates with `τ` clamped to `[0, 1]`, so the command holds its end values.
    pub fn eval_held(&self, t: f64) -> f64 {
        self.eval_tau(self.tau(t).clamp(0.0, 1.0))
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Fit result with the root-mean-square residual against the input samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub poly: Poly7,
    pub rmse: f64,
}

/// Least-squares degree-7 fit by Householder QR of the Vandermonde matrix in `τ`.
pub fn fit_poly7(series: &TimeSeries) -> Result<PolyFit, ThermalError> {
    let n = series.len();
    if n < POLY_TERMS + 1 {
        return Err(ThermalError::TooFewSamples { found: n, needed: POLY_TERMS + 1 });
    }
    let (t_start, t_end) = (series.start(), series.end());
    let span = t_end - t_start;
    let taus: Vec<f64> = series.timestamps().iter().map(|t| (t - t_start) / span).collect();

    // Fit about the mean level: the rounding error then scales with the
    // signal's variation rather than its absolute temperature.
    let level = series.values().iter().sum::<f64>() / n as f64;
    let a = DMatrix::from_fn(n, POLY_TERMS, |i, j| taus[i].powi(j as i32));
    let y = DVector::from_iterator(n, series.values().iter().map(|v| v - level));
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r[(0, 0)].abs();
    if (0..POLY_TERMS).any(|i| r[(i, i)].abs() <= 1e-13 * scale) {
        return Err(ThermalError::RankDeficient);
    }
    let q = qr.q();
    let solve = |rhs: &DVector<f64>| r.solve_upper_triangular(&(q.transpose() * rhs)).ok_or(ThermalError::RankDeficient);
    let mut x = solve(&y)?;
    // One round of iterative refinement on the residual.
    let residual = &y - &a * &x;
    x += solve(&residual)?;

    let mut coeffs = [0.0; POLY_TERMS];
    coeffs.copy_from_slice(x.as_slice());
    coeffs[0] += level;
    let poly = Poly7 { coeffs, t_start, t_end };
    let rmse = rmse_of(&poly, &taus, series.values());
    Ok(PolyFit { poly, rmse })
}

pub(crate) fn rmse_of(poly: &Poly7, taus: &[f64], values: &[f64]) -> f64 {
    let sse: f64 = taus.iter().zip(values).map(|(tau, v)| (poly.eval_tau(*tau) - v).powi(2)).sum();
    (sse / values.len() as f64).sqrt()
}
