//! Convex combination of temporal and spatial predictions and the universal
//! NMSE-optimal combination coefficient.
//!
//! With `w = lambda / (1 + lambda)` the combined prediction is
//! `(1 - w) * y_tp + w * e_sp`, so the summed per-region NMSE is an exact
//! quadratic in `w` and is minimized in closed form.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::RegionId;

/// Upper bound on `w`; keeps `lambda` finite (about 1e9).
pub const W_CAP: f64 = 1.0 - 1e-9;

/// Points in the verification grid over `w in [0, 1)`.
pub const GRID_POINTS: usize = 1001;

pub fn lambda_to_weight(lambda: f64) -> f64 {
    lambda / (1.0 + lambda)
}

pub fn weight_to_lambda(w: f64) -> f64 {
    w / (1.0 - w)
}

/// Elementwise `(y_tp + lambda * e_sp) / (1 + lambda)`.
pub fn combine(y_tp: &[f64], e_sp: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::NegativeLambda(lambda));
    }
    if y_tp.len() != e_sp.len() {
        return Err(Error::LengthMismatch { left: y_tp.len(), right: e_sp.len() });
    }
    Ok(y_tp
        .iter()
        .zip(e_sp)
        .map(|(t, s)| (t + lambda * s) / (1.0 + lambda))
        .collect())
}

/// `|e_true - e_pred|^2 / |e_true|^2`.
pub fn nmse(e_true: &[f64], e_pred: &[f64]) -> Result<f64> {
    if e_true.len() != e_pred.len() {
        return Err(Error::LengthMismatch { left: e_true.len(), right: e_pred.len() });
    }
    let denom: f64 = e_true.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroTruth { region: None });
    }
    let num: f64 = e_true.iter().zip(e_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / denom)
}

/// Ground truth and both predictor outputs for one region over the same hours.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    pub region: RegionId,
    pub e_true: Vec<f64>,
    pub y_tp: Vec<f64>,
    pub e_sp: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaResult {
    pub lambda_star: f64,
    pub w_star: f64,
    /// Summed NMSE at `w_star`.
    pub objective: f64,
    /// Summed NMSE of the temporal predictor alone (`lambda = 0`).
    pub objective_temporal: f64,
    /// Smallest summed NMSE over the verification grid.
    pub grid_objective: f64,
}

/// `objective(w) = a w^2 + b w + c`, summed over regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, w: f64) -> f64 {
        (self.a * w + self.b) * w + self.c
    }
}

/// Coefficients of the summed-NMSE objective in `w`. With residuals
/// `r = e_true - y_tp` and `d = e_sp - y_tp` the region term is
/// `|r - w d|^2 / |e_true|^2`.
pub fn objective_quadratic(regions: &[RegionSeries]) -> Result<Quadratic> {
    let mut q = Quadratic { a: 0.0, b: 0.0, c: 0.0 };
    for s in regions {
        if s.e_true.len() != s.y_tp.len() || s.e_true.len() != s.e_sp.len() {
            return Err(Error::LengthMismatch { left: s.e_true.len(), right: s.y_tp.len().max(s.e_sp.len()) });
        }
        let norm: f64 = s.e_true.iter().map(|v| v * v).sum();
        if !(norm > 0.0) {
            return Err(Error::ZeroTruth { region: Some(s.region) });
        }
        let (mut rr, mut rd, mut dd) = (0.0, 0.0, 0.0);
        for ((e, y), sp) in s.e_true.iter().zip(&s.y_tp).zip(&s.e_sp) {
            let r = e - y;
            let d = sp - y;
            rr += r * r;
            rd += r * d;
            dd += d * d;
        }
        q.a += dd / norm;
        q.b -= 2.0 * rd / norm;
        q.c += rr / norm;
    }
    Ok(q)
}

/// Summed NMSE of the combination at weight `w`, evaluated directly.
pub fn summed_nmse(regions: &[RegionSeries], w: f64) -> Result<f64> {
    let lambda = weight_to_lambda(w);
    let mut total = 0.0;
    for s in regions {
        let pred = combine(&s.y_tp, &s.e_sp, lambda)?;
        total += nmse(&s.e_true, &pred).map_err(|_| Error::ZeroTruth { region: Some(s.region) })?;
    }
    Ok(total)
}

/// Minimize the summed NMSE over `w in [0, W_CAP]`. Ties (a flat objective)
/// resolve to the smallest weight. The minimizer is checked against a
/// [`GRID_POINTS`]-point grid over `[0, 1)`.
pub fn optimize_lambda(regions: &[RegionSeries]) -> Result<LambdaResult> {
    if regions.is_empty() {
        return Err(Error::EmptyData("regions for combination"));
    }
    let q = objective_quadratic(regions)?;
    let scale = q.a.abs() + q.b.abs() + q.c.abs();
    let w = if q.a > 1e-15 * scale.max(f64::MIN_POSITIVE) {
        (-q.b / (2.0 * q.a)).clamp(0.0, W_CAP)
    } else if q.b < 0.0 {
        W_CAP
    } else {
        0.0
    };
    let objective = q.eval(w).max(0.0);
    let grid_objective = (0..GRID_POINTS)
        .map(|i| q.eval(i as f64 / GRID_POINTS as f64))
        .fold(f64::INFINITY, f64::min);
    debug_assert!(objective <= grid_objective + 1e-12 * scale.max(1.0));
    Ok(LambdaResult {
        lambda_star: weight_to_lambda(w),
        w_star: w,
        objective,
        objective_temporal: q.c,
        grid_objective,
    })
}
