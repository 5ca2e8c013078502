//! Uniform boundedness of `eps^{d/8} sup_t ||theta||_{L^4}` across a ladder.

use serde::Serialize;

use super::pipeline::ErrorSeries;
use super::report::Gate;

pub const BOOTSTRAP_RATIO_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub eps: Vec<f64>,
    /// `eps^{d/8} sup_t ||theta||_{L^4}` per run.
    pub scaled_sup: Vec<f64>,
    pub median: f64,
    pub max: f64,
    pub passed: bool,
}

impl BootstrapReport {
    pub fn ratio(&self) -> f64 {
        if self.median > 0.0 {
            self.max / self.median
        } else if self.max > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }

    pub fn gate(&self) -> Gate {
        Gate::new(
            "bootstrap_l4",
            self.passed,
            format!(
                "max {:.4e} <= {BOOTSTRAP_RATIO_LIMIT} x median {:.4e} (ratio {:.3})",
                self.max,
                self.median,
                self.ratio()
            ),
        )
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Series without the correction term are skipped; `None` if none has it.
pub fn bootstrap_diagnostics(series: &[ErrorSeries]) -> Option<BootstrapReport> {
    let with: Vec<&ErrorSeries> = series.iter().filter(|s| s.has_correction()).collect();
    if with.is_empty() {
        return None;
    }
    let eps: Vec<f64> = with.iter().map(|s| s.eps).collect();
    let scaled_sup: Vec<f64> = with.iter().map(|s| s.sup_theta_l4_scaled()).collect();
    let med = median(&scaled_sup);
    let max = scaled_sup.iter().cloned().fold(0.0, f64::max);
    let finite = scaled_sup.iter().all(|v| v.is_finite());
    Some(BootstrapReport {
        eps,
        scaled_sup,
        median: med,
        max,
        passed: finite && max <= BOOTSTRAP_RATIO_LIMIT * med,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(eps: f64, l4: f64) -> ErrorSeries {
        ErrorSeries {
            eps,
            t: vec![0.0],
            w_l2: vec![0.0],
            w_heps1: vec![0.0],
            theta_l2: vec![0.0],
            theta_heps1: vec![0.0],
            theta_l4_scaled: vec![l4],
            g_heps1: vec![0.0],
            minus_mass: vec![0.0],
            mass_drift: vec![0.0],
            grid_points: vec![16],
            dt: 0.1,
            stopped_at: None,
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn ratio_gate() {
        let ok = bootstrap_diagnostics(&[series(0.5, 1.0), series(0.25, 2.0), series(0.125, 2.5)]).unwrap();
        assert!(ok.passed);
        let bad = bootstrap_diagnostics(&[series(0.5, 1.0), series(0.25, 1.0), series(0.125, 3.5)]).unwrap();
        assert!(!bad.passed);
        let mut none = series(0.5, 1.0);
        none.theta_l4_scaled.clear();
        none.theta_l2.clear();
        assert!(bootstrap_diagnostics(&[none]).is_none());
    }
}
