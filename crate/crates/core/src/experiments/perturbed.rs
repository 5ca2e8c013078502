//! Convergence study with perturbed initial data `psi_0 + eta`.

use serde::Serialize;

use super::convergence::{run_main_convergence, ConvergenceStudy, StudyOptions};
use super::report::Gate;
use super::scenario::{Perturbation, Scenario};
use crate::error::{Result, WpError};

pub const DEFAULT_PERTURBATION_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedStudy {
    pub gamma0: f64,
    /// `gamma0 > d/8`. Outside that range every gate is reported only.
    pub within_theorem: bool,
    pub study: ConvergenceStudy,
}

impl PerturbedStudy {
    /// `sup_t ||w||` at the smallest `eps` over that at the largest.
    pub fn decay_ratio(&self) -> f64 {
        let w = self.study.sup_w();
        w[w.len() - 1] / w[0]
    }
}

/// Adds a fixed bump normalized to `eps^gamma0` in `H_eps^1` (unless the
/// scenario already carries one, whose shape is kept) and reruns the study.
pub fn run_perturbed_data(scenario: &Scenario, gamma0: f64, ladder: &[f64], opts: &StudyOptions) -> Result<PerturbedStudy> {
    if !(gamma0 >= 0.0) {
        return Err(WpError::Config(format!("gamma0 = {gamma0} must be nonnegative")));
    }
    let mut s = scenario.clone();
    let p = s.perturbation.take().unwrap_or(Perturbation {
        gamma0,
        offset: [0.0; 3],
        width: DEFAULT_PERTURBATION_WIDTH,
    });
    s.perturbation = Some(Perturbation { gamma0, ..p });
    let bound = s.dim() as f64 / 8.0;
    let within = gamma0 > bound;
    let mut study = run_main_convergence(&s, ladder, opts)?;
    if !within {
        for g in study.gates.iter_mut() {
            g.enforced = false;
        }
        study.gates.push(
            Gate::new(
                "outside_theorem",
                false,
                format!("gamma0 = {gamma0} <= d/8 = {bound}: no convergence is claimed"),
            )
            .informational(),
        );
    }
    Ok(PerturbedStudy {
        gamma0,
        within_theorem: within,
        study,
    })
}
