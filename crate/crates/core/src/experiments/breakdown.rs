//! First time the approximation error crosses a threshold, along a ladder.

use std::fmt::Write as _;

use serde::Serialize;

use super::convergence::{budget_gate, dt_budget, mass_gate, run_ladder, sups};
use super::fit::{least_squares, LineFit};
use super::ladder::normalize;
use super::pipeline::{prepare, ErrorSeries};
use super::report::{fmt_f64, Artifacts, Gate, NamedFit};
use super::scenario::Scenario;
use crate::error::{Result, WpError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub eps: f64,
    /// `None` when the threshold was not reached before `T`.
    pub t_star: Option<f64>,
    pub series: ErrorSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownStudy {
    pub scenario: String,
    pub threshold: f64,
    pub t_max: f64,
    pub rows: Vec<BreakdownRow>,
    /// `t*` against `log(1/eps)`.
    pub log_fit: Option<LineFit>,
    /// `t*` against `log log(1/eps)`.
    pub loglog_fit: Option<LineFit>,
    pub gates: Vec<Gate>,
    pub dt_budget: Option<f64>,
}

/// First crossing of `||w||_Heps1 > threshold`, linearly interpolated
/// between the bracketing snapshots.
pub fn breakdown_time(series: &ErrorSeries, threshold: f64) -> Option<f64> {
    let w = &series.w_heps1;
    let k = w.iter().position(|v| *v > threshold)?;
    if k == 0 {
        return Some(series.t[0]);
    }
    let (t0, t1, w0, w1) = (series.t[k - 1], series.t[k], w[k - 1], w[k]);
    Some(t0 + (threshold - w0) / (w1 - w0) * (t1 - t0))
}

/// `t*` nondecreasing as `eps` decreases; runs that never broke down count
/// as `+inf`.
pub fn t_star_nondecreasing(rows: &[BreakdownRow]) -> bool {
    let t: Vec<f64> = rows.iter().map(|r| r.t_star.unwrap_or(f64::INFINITY)).collect();
    t.windows(2).all(|w| w[1] >= w[0])
}

impl BreakdownStudy {
    pub fn passed(&self) -> bool {
        super::report::all_passed(&self.gates)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("eps,log_inv_eps,loglog_inv_eps,t_star,reached\n");
        for r in &self.rows {
            let x = (1.0 / r.eps).ln();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(r.eps),
                fmt_f64(x),
                fmt_f64(x.ln()),
                r.t_star.map(fmt_f64).unwrap_or_default(),
                r.t_star.is_some()
            );
        }
        out
    }

    pub fn artifacts(&self) -> Artifacts {
        let mut fits = Vec::new();
        let mut notes = vec![format!(
            "scenario {}: threshold {} on ||w||_Heps1, T = {}",
            self.scenario, self.threshold, self.t_max
        )];
        for r in &self.rows {
            notes.push(match r.t_star {
                Some(t) => format!("eps = {:.4e}: t* = {t:.6}", r.eps),
                None => format!("eps = {:.4e}: not reached before T", r.eps),
            });
        }
        for (name, f) in [("t_star_vs_log", &self.log_fit), ("t_star_vs_loglog", &self.loglog_fit)] {
            if let Some(f) = f {
                fits.push(NamedFit::new(name, *f));
                notes.push(format!(
                    "{name}: slope {:.4}, intercept {:.4}, residual {:.3e}, R^2 {:.4}",
                    f.slope, f.intercept, f.residual, f.r_squared
                ));
            } else {
                notes.push(format!("{name}: fewer than 2 breakdown times, no fit"));
            }
        }
        notes.push("the constants of the log and log-log horizons are not asserted".into());
        Artifacts {
            title: "breakdown time".into(),
            series: self.rows.iter().map(|r| r.series.clone()).collect(),
            fits,
            gates: self.gates.clone(),
            notes,
            tables: vec![("breakdown.csv".into(), self.table())],
        }
    }
}

/// Requires an escaping trajectory for the (single) packet.
pub fn run_breakdown_time(
    scenario: &Scenario,
    ladder: &[f64],
    threshold: f64,
    workers: usize,
    dt_halving: bool,
) -> Result<BreakdownStudy> {
    if !(threshold > 0.0) {
        return Err(WpError::Config(format!("threshold {threshold} must be positive")));
    }
    let ladder = normalize(ladder)?;
    let mut s = scenario.clone();
    s.stop_threshold = Some(threshold);
    let prepared = prepare(&s)?;
    if let Some(r) = prepared.records.iter().find(|r| !r.escape.escaping) {
        return Err(WpError::Config(format!(
            "the {} trajectory does not escape (energy margin {:?}, radial acceleration {:.3e})",
            r.mode.label(),
            r.escape.energy_margin,
            r.escape.radial_acceleration
        )));
    }
    let (grids, series) = run_ladder(&s, &prepared, &ladder, workers)?;
    let budget = if dt_halving {
        Some(dt_budget(&s, &prepared, &grids[0], &series[0])?)
    } else {
        None
    };
    let rows: Vec<BreakdownRow> = series
        .into_iter()
        .map(|se| BreakdownRow {
            eps: se.eps,
            t_star: breakdown_time(&se, threshold),
            series: se,
        })
        .collect();

    let reached: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.t_star.map(|t| ((1.0 / r.eps).ln(), t)))
        .collect();
    let fit = |pts: Vec<(f64, f64)>| if pts.len() >= 2 { least_squares(&pts).ok() } else { None };
    let log_fit = fit(reached.clone());
    let loglog_fit = fit(reached.iter().map(|(x, t)| (x.ln(), *t)).collect());

    let all: Vec<ErrorSeries> = rows.iter().map(|r| r.series.clone()).collect();
    let mut gates = vec![mass_gate(&all)];
    let t: Vec<String> = rows
        .iter()
        .map(|r| r.t_star.map(|t| format!("{t:.4}")).unwrap_or_else(|| "not reached".into()))
        .collect();
    gates.push(Gate::new(
        "t_star_monotone",
        t_star_nondecreasing(&rows),
        format!("t* nondecreasing as eps decreases: {}", t.join(", ")),
    ));
    if let Some(b) = budget {
        let w = sups(&all, ErrorSeries::sup_w);
        gates.push(budget_gate(b, &w));
    }
    Ok(BreakdownStudy {
        scenario: s.name.clone(),
        threshold,
        t_max: s.t_final,
        rows,
        log_fit,
        loglog_fit,
        gates,
        dt_budget: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(eps: f64, t: &[f64], w: &[f64]) -> ErrorSeries {
        ErrorSeries {
            eps,
            t: t.to_vec(),
            w_l2: w.to_vec(),
            w_heps1: w.to_vec(),
            theta_l2: Vec::new(),
            theta_heps1: Vec::new(),
            theta_l4_scaled: Vec::new(),
            g_heps1: Vec::new(),
            minus_mass: vec![0.0; t.len()],
            mass_drift: vec![0.0; t.len()],
            grid_points: vec![64],
            dt: 0.01,
            stopped_at: None,
        }
    }

    #[test]
    fn crossing_is_interpolated() {
        let s = series(0.1, &[0.0, 1.0, 2.0, 3.0], &[0.0, 0.2, 0.6, 1.0]);
        assert!((breakdown_time(&s, 0.5).unwrap() - 1.75).abs() < 1e-15);
        assert!((breakdown_time(&s, 0.1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(breakdown_time(&s, 1.0), None);
        let late = series(0.1, &[0.0, 1.0], &[0.7, 0.9]);
        assert_eq!(breakdown_time(&late, 0.5), Some(0.0));
    }

    #[test]
    fn unreached_thresholds_count_as_infinite() {
        let row = |eps, t: Option<f64>| BreakdownRow {
            eps,
            t_star: t,
            series: series(eps, &[0.0], &[0.0]),
        };
        assert!(t_star_nondecreasing(&[row(0.25, Some(1.0)), row(0.125, Some(1.0)), row(0.0625, None)]));
        assert!(!t_star_nondecreasing(&[row(0.25, None), row(0.125, Some(3.0))]));
        assert!(!t_star_nondecreasing(&[row(0.25, Some(2.0)), row(0.125, Some(1.5))]));
    }
}
