//! Ordinary least squares on log-log data.

use serde::Serialize;

use crate::error::{Result, WpError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)` pairs.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(WpError::Fit(format!("need at least 2 points, got {n}")));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(WpError::Fit("non-finite data".into()));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(WpError::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual: (sse / nf).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        points: n,
    })
}

/// Convergence order: slope of `log2(value)` against `log2(eps)`.
/// Ladders shorter than four points are refused.
pub fn convergence_order(eps: &[f64], values: &[f64]) -> Result<LineFit> {
    if eps.len() != values.len() {
        return Err(WpError::Fit("eps and value series differ in length".into()));
    }
    if eps.len() < 4 {
        return Err(WpError::Fit(format!(
            "convergence fits need at least 4 ladder points, got {}",
            eps.len()
        )));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(WpError::Fit("values must be positive for a log fit".into()));
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .map(|(e, v)| (e.log2(), v.log2()))
        .collect();
    least_squares(&pts)
}
