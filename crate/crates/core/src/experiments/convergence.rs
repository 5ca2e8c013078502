//! Ladder studies of the error series: fits, gates and the time-step budget.

use std::fmt::Write as _;

use serde::Serialize;

use super::bootstrap::{bootstrap_diagnostics, BootstrapReport};
use super::fit::{convergence_order, LineFit};
use super::ladder::{map_ladder, normalize};
use super::pipeline::{grid_for, prepare, run_point_on, ErrorSeries, Prepared};
use super::report::{fmt_f64, Artifacts, Gate, NamedFit};
use super::scenario::Scenario;
use crate::error::{Result, WpError};
use crate::fields::GridSpec;
use crate::potential::{assumption_audit, AuditReport};
use crate::solver::critical_beta;

pub const MASS_GATE: f64 = 1e-8;
/// Ties in monotonicity checks are resolved at this granularity.
pub const TIE_GRANULARITY: f64 = 1e-6;
pub const THETA_ORDER_GATE: f64 = 0.45;
/// The time-step budget must stay below this fraction of the smallest
/// measured `sup_t ||w||`, or below `DT_BUDGET_FLOOR`.
pub const DT_BUDGET_FRACTION: f64 = 1e-2;
pub const DT_BUDGET_FLOOR: f64 = 1e-6;
pub const AUDIT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub workers: usize,
    /// Lower bound on the fitted `L^2` order of `theta`, when gated.
    pub theta_order_min: Option<f64>,
    /// Repeat the largest `eps` at half the time step.
    pub dt_halving: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            workers: 1,
            theta_order_min: None,
            dt_halving: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub scenario: String,
    pub dim: usize,
    pub series: Vec<ErrorSeries>,
    pub fits: Vec<NamedFit>,
    pub gates: Vec<Gate>,
    pub bootstrap: Option<BootstrapReport>,
    /// `max_t` change of the monitored norms when the time step is halved
    /// at the largest `eps`.
    pub dt_budget: Option<f64>,
    #[serde(skip)]
    pub audit: Option<AuditReport>,
}

pub fn sups(series: &[ErrorSeries], f: impl Fn(&ErrorSeries) -> f64) -> Vec<f64> {
    series.iter().map(f).collect()
}

/// `v[k+1] <= v[k]` up to `TIE_GRANULARITY`.
pub fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + TIE_GRANULARITY)
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

impl ConvergenceStudy {
    pub fn eps(&self) -> Vec<f64> {
        self.series.iter().map(|s| s.eps).collect()
    }

    pub fn sup_w(&self) -> Vec<f64> {
        sups(&self.series, ErrorSeries::sup_w)
    }

    pub fn sup_theta_l2(&self) -> Vec<f64> {
        sups(&self.series, ErrorSeries::sup_theta_l2)
    }

    pub fn sup_minus_mass(&self) -> Vec<f64> {
        sups(&self.series, ErrorSeries::sup_minus_mass)
    }

    pub fn fit(&self, quantity: &str) -> Option<&LineFit> {
        self.fits.iter().find(|f| f.quantity == quantity).map(|f| &f.fit)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn passed(&self) -> bool {
        super::report::all_passed(&self.gates)
    }

    /// One row per `eps` with the sup over time of every monitored norm.
    pub fn sup_table(&self) -> String {
        let mut out = String::from("eps,sup_w_l2,sup_w_heps1,sup_theta_l2,sup_theta_heps1,sup_theta_l4_scaled,sup_g_heps1,sup_minus_mass,max_mass_drift\n");
        let m = |v: &[f64]| {
            if v.is_empty() {
                String::new()
            } else {
                fmt_f64(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            }
        };
        for s in &self.series {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt_f64(s.eps),
                m(&s.w_l2),
                m(&s.w_heps1),
                m(&s.theta_l2),
                m(&s.theta_heps1),
                m(&s.theta_l4_scaled),
                m(&s.g_heps1),
                m(&s.minus_mass),
                m(&s.mass_drift)
            );
        }
        out
    }

    pub fn artifacts(&self, title: &str) -> Artifacts {
        let mut notes = vec![format!("scenario {} (d = {})", self.scenario, self.dim)];
        notes.push(format!("eps: {}", list(&self.eps())));
        notes.push(format!("sup_t ||w||_Heps1: {}", list(&self.sup_w())));
        if self.series.iter().all(|s| s.has_correction()) {
            notes.push(format!("sup_t ||theta||_L2: {}", list(&self.sup_theta_l2())));
        }
        notes.push(format!("sup_t ||Pi_other psi||_L2: {}", list(&self.sup_minus_mass())));
        for f in &self.fits {
            notes.push(format!(
                "order {}: {:.4} (residual {:.3e}, R^2 {:.4})",
                f.quantity, f.fit.slope, f.fit.residual, f.fit.r_squared
            ));
        }
        if let Some(b) = self.dt_budget {
            notes.push(format!("time-step budget: {b:.3e}"));
        }
        if let Some(a) = &self.audit {
            for v in &a.violations {
                notes.push(format!("audit: {v}"));
            }
        }
        Artifacts {
            title: title.to_string(),
            series: self.series.clone(),
            fits: self.fits.clone(),
            gates: self.gates.clone(),
            notes,
            tables: vec![("sup.csv".to_string(), self.sup_table())],
        }
    }
}

/// Audits the model on a box comfortably containing every trajectory.
pub fn audit_scenario(scenario: &Scenario, prepared: &Prepared) -> AuditReport {
    let mut reach: f64 = 4.0;
    for r in &prepared.records {
        let (lo, hi) = r.extent();
        for a in 0..scenario.dim() {
            reach = reach.max(lo[a].abs()).max(hi[a].abs());
        }
    }
    assumption_audit(&scenario.model, 2.0 * reach, AUDIT_SAMPLES, scenario.model.delta0)
}

/// Runs the whole ladder, reusing one `Prepared`.
pub(crate) fn run_ladder(
    scenario: &Scenario,
    prepared: &Prepared,
    ladder: &[f64],
    workers: usize,
) -> Result<(Vec<GridSpec>, Vec<ErrorSeries>)> {
    // every grid first, so resolution and boundary gates fail before any solve
    let grids = ladder
        .iter()
        .map(|&e| grid_for(scenario, prepared, e))
        .collect::<Result<Vec<_>>>()?;
    let series = map_ladder(ladder, workers, |e| {
        let k = ladder.iter().position(|x| *x == e).expect("eps comes from the ladder");
        run_point_on(scenario, prepared, &grids[k], e, scenario.dt)
    })?;
    Ok((grids, series))
}

/// Largest change of the monitored norms between `series` and a rerun at
/// half its time step.
pub(crate) fn dt_budget(scenario: &Scenario, prepared: &Prepared, grid: &GridSpec, series: &ErrorSeries) -> Result<f64> {
    let half = run_point_on(scenario, prepared, grid, series.eps, Some(0.5 * series.dt))?;
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Ok(diff(&series.w_heps1, &half.w_heps1).max(diff(&series.theta_l2, &half.theta_l2)))
}

pub(crate) fn budget_gate(budget: f64, sup_w: &[f64]) -> Gate {
    let smallest = sup_w.iter().cloned().fold(f64::INFINITY, f64::min);
    let limit = (DT_BUDGET_FRACTION * smallest).max(DT_BUDGET_FLOOR);
    Gate::new(
        "dt_halving",
        budget <= limit,
        format!("time-step budget {budget:.3e} <= {limit:.3e}"),
    )
}

pub(crate) fn mass_gate(series: &[ErrorSeries]) -> Gate {
    let drift = series.iter().map(|s| s.max_mass_drift()).fold(0.0, f64::max);
    Gate::new(
        "mass_conservation",
        drift <= MASS_GATE,
        format!("max relative mass drift {drift:.3e} <= {MASS_GATE:.0e}"),
    )
}

fn fit_if_positive(fits: &mut Vec<NamedFit>, name: &str, eps: &[f64], v: &[f64]) -> Result<()> {
    if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        fits.push(NamedFit::new(name, convergence_order(eps, v)?));
    }
    Ok(())
}

/// Fits and gates for a finished ladder.
pub(crate) fn assess(
    scenario: &Scenario,
    series: Vec<ErrorSeries>,
    dt_budget: Option<f64>,
    audit: Option<AuditReport>,
    opts: &StudyOptions,
) -> Result<ConvergenceStudy> {
    let eps: Vec<f64> = series.iter().map(|s| s.eps).collect();
    let w = sups(&series, ErrorSeries::sup_w);
    let correction = series.iter().all(|s| s.has_correction());

    let mut fits = Vec::new();
    fit_if_positive(&mut fits, "w_heps1", &eps, &w)?;
    fit_if_positive(&mut fits, "w_l2", &eps, &sups(&series, |s| s.w_l2.iter().cloned().fold(0.0, f64::max)))?;
    if correction {
        fit_if_positive(&mut fits, "theta_l2", &eps, &sups(&series, ErrorSeries::sup_theta_l2))?;
        fit_if_positive(&mut fits, "theta_heps1", &eps, &sups(&series, |s| s.theta_heps1.iter().cloned().fold(0.0, f64::max)))?;
        fit_if_positive(&mut fits, "theta_l4_scaled", &eps, &sups(&series, ErrorSeries::sup_theta_l4_scaled))?;
    }
    if scenario.packets.len() == 1 {
        fit_if_positive(&mut fits, "minus_mass", &eps, &sups(&series, ErrorSeries::sup_minus_mass))?;
    }

    let mut gates = vec![mass_gate(&series)];
    gates.push(Gate::new(
        "w_monotone",
        nonincreasing(&w),
        format!("sup_t ||w||_Heps1 nonincreasing along the ladder: {}", list(&w)),
    ));
    if let (Some(min), true) = (opts.theta_order_min, correction) {
        let order = fits.iter().find(|f| f.quantity == "theta_l2").map(|f| f.fit.slope);
        gates.push(Gate::new(
            "theta_order",
            order.is_some_and(|o| o >= min),
            format!("fitted L2 order of theta {:.4} >= {min}", order.unwrap_or(f64::NAN)),
        ));
    }
    if scenario.packets.len() == 1 {
        let minus = sups(&series, ErrorSeries::sup_minus_mass);
        let bounded = minus.iter().zip(&w).all(|(m, w)| m <= w);
        gates.push(Gate::new(
            "decoupling_bound",
            bounded,
            format!("sup ||Pi_other psi|| <= sup ||w||_Heps1 at every eps: {}", list(&minus)),
        ));
        gates.push(Gate::new(
            "decoupling_monotone",
            nonincreasing(&minus),
            "sup ||Pi_other psi|| nonincreasing along the ladder",
        ));
    }
    let bootstrap = if correction { bootstrap_diagnostics(&series) } else { None };
    if let Some(b) = &bootstrap {
        gates.push(b.gate());
    }
    if let Some(b) = dt_budget {
        gates.push(budget_gate(b, &w));
    }
    let beta_c = critical_beta(scenario.dim());
    if let Some(b) = scenario.beta {
        if b != beta_c {
            gates.push(
                Gate::new("critical_beta", false, format!("beta = {b} differs from the critical {beta_c}"))
                    .informational(),
            );
        }
    }
    Ok(ConvergenceStudy {
        scenario: scenario.name.clone(),
        dim: scenario.dim(),
        series,
        fits,
        gates,
        bootstrap,
        dt_budget,
        audit,
    })
}

/// Requires at least four ladder points and a model passing the audit.
pub fn run_main_convergence(scenario: &Scenario, ladder: &[f64], opts: &StudyOptions) -> Result<ConvergenceStudy> {
    let ladder = normalize(ladder)?;
    if ladder.len() < 4 {
        return Err(WpError::Fit(format!(
            "convergence fits need at least 4 ladder points, got {}",
            ladder.len()
        )));
    }
    let prepared = prepare(scenario)?;
    let audit = audit_scenario(scenario, &prepared);
    if !audit.passed() {
        return Err(WpError::Config(format!(
            "model fails the assumption audit: {}",
            audit.violations.join("; ")
        )));
    }
    let (grids, series) = run_ladder(scenario, &prepared, &ladder, opts.workers)?;
    let budget = if opts.dt_halving {
        Some(dt_budget(scenario, &prepared, &grids[0], &series[0])?)
    } else {
        None
    };
    assess(scenario, series, budget, Some(audit), opts)
}

/// Ladders too short for fits: per-point gates only (mass conservation and,
/// for one packet, the decoupling bound).
pub fn run_smoke(scenario: &Scenario, ladder: &[f64], workers: usize) -> Result<ConvergenceStudy> {
    let ladder = normalize(ladder)?;
    let prepared = prepare(scenario)?;
    let audit = audit_scenario(scenario, &prepared);
    if !audit.passed() {
        return Err(WpError::Config(format!(
            "model fails the assumption audit: {}",
            audit.violations.join("; ")
        )));
    }
    let (_, series) = run_ladder(scenario, &prepared, &ladder, workers)?;
    let w = sups(&series, ErrorSeries::sup_w);
    let mut gates = vec![mass_gate(&series)];
    if scenario.packets.len() == 1 {
        let minus = sups(&series, ErrorSeries::sup_minus_mass);
        gates.push(Gate::new(
            "decoupling_bound",
            minus.iter().zip(&w).all(|(m, w)| m <= w),
            format!("sup ||Pi_other psi|| <= sup ||w||_Heps1 at every eps: {}", list(&minus)),
        ));
    }
    Ok(ConvergenceStudy {
        scenario: scenario.name.clone(),
        dim: scenario.dim(),
        series,
        fits: Vec::new(),
        gates,
        bootstrap: None,
        dt_budget: None,
        audit: Some(audit),
    })
}
