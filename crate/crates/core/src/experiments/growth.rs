//! Envelope moment growth along the first packet's trajectory.

use std::sync::Arc;

use super::pipeline::trajectories;
use super::report::{Artifacts, Gate};
use super::scenario::Scenario;
use crate::classical::fit_qdot_decay;
use crate::error::Result;
use crate::profile::{growth_study, write_growth_csv, GrowthReport, HessianSource};

pub const GROWTH_SAMPLES: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRun {
    pub report: GrowthReport,
    /// Fitted decay exponent of `|dQ/dt|`; `None` for runs shorter than the fit needs.
    pub kappa0: Option<f64>,
}

pub fn run_growth(scenario: &Scenario) -> Result<GrowthRun> {
    scenario.validate()?;
    let records = trajectories(scenario)?;
    let record = records[0].clone();
    let decay = fit_qdot_decay(&record).ok();
    let met = decay.map(|d| d.hypothesis_met()).unwrap_or(false);
    let a = scenario.packets[0].envelope.sample(&scenario.profile_grid);
    let src: Arc<dyn HessianSource> = record;
    let report = growth_study(
        &a,
        src,
        scenario.lambda,
        scenario.t_final,
        GROWTH_SAMPLES,
        scenario.profile_dt,
        met,
    )?;
    Ok(GrowthRun {
        report,
        kappa0: decay.map(|d| d.kappa0()),
    })
}

impl GrowthRun {
    pub fn artifacts(&self) -> Result<Artifacts> {
        let r = &self.report;
        let mut csv = Vec::new();
        write_growth_csv(&mut csv, r)?;
        let drift = r
            .mass
            .iter()
            .map(|m| (m - r.mass[0]).abs() / r.mass[0])
            .fold(0.0, f64::max);
        let gates = vec![Gate::new(
            "profile_mass",
            drift <= 1e-10,
            format!("envelope mass drift {drift:.3e} <= 1e-10"),
        )];
        let notes = vec![
            format!("sup_t ||grad u|| = {:.6e}", r.grad_bound),
            format!("log M_6 growth rate = {:.6e}", r.growth_rate),
            format!("||y u|| ~ (1 + t)^{:.4}", r.y_power),
            format!(
                "decay exponent kappa0 = {}, hypothesis met: {}",
                self.kappa0.map(|k| format!("{k:.4}")).unwrap_or_else(|| "n/a".into()),
                r.hypothesis_met
            ),
        ];
        Ok(Artifacts {
            title: "envelope growth".into(),
            series: Vec::new(),
            fits: Vec::new(),
            gates,
            notes,
            tables: vec![("growth.csv".into(), String::from_utf8_lossy(&csv).into_owned())],
        })
    }
}
