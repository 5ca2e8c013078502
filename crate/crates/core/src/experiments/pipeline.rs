//! One `eps` of a study: build data, propagate the exact system, the
//! envelopes and (optionally) the correction term in lockstep, and record
//! the error norms at every snapshot.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::scenario::{Perturbation, Scenario};
use crate::classical::{integrate_trajectory, TrajectoryRecord};
use crate::error::{Result, WpError};
use crate::fields::{
    build_wavepacket, h_eps_norm_with, lebesgue_norm, AnsatzEvaluator, ComplexField, GridSpec, Lebesgue, ModeFrame,
    Spectral,
};
use crate::linalg::Vec3;
use crate::solver::{AnsatzSource, DrivenSolver, EvolutionConfig, FullSolver};
use crate::profile::{solve_profile, HessianSource, ProfileStepper};

/// Error norms of one run, sampled on the shared snapshot times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSeries {
    pub eps: f64,
    pub t: Vec<f64>,
    pub w_l2: Vec<f64>,
    pub w_heps1: Vec<f64>,
    /// Empty when the correction term is not computed.
    pub theta_l2: Vec<f64>,
    pub theta_heps1: Vec<f64>,
    /// `eps^{d/8} ||theta||_{L^4}`.
    pub theta_l4_scaled: Vec<f64>,
    pub g_heps1: Vec<f64>,
    /// `||Pi_other psi||_{L^2}` for single-packet data, where `other` is the
    /// mode the packet was not launched on.
    pub minus_mass: Vec<f64>,
    pub mass_drift: Vec<f64>,
    pub grid_points: Vec<usize>,
    pub dt: f64,
    /// Set when the run stopped early at the configured threshold.
    pub stopped_at: Option<f64>,
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

impl ErrorSeries {
    pub fn sup_w(&self) -> f64 {
        max(&self.w_heps1)
    }

    pub fn sup_theta_l2(&self) -> f64 {
        max(&self.theta_l2)
    }

    pub fn sup_theta_l4_scaled(&self) -> f64 {
        max(&self.theta_l4_scaled)
    }

    pub fn sup_minus_mass(&self) -> f64 {
        max(&self.minus_mass)
    }

    pub fn sup_g(&self) -> f64 {
        max(&self.g_heps1)
    }

    pub fn max_mass_drift(&self) -> f64 {
        max(&self.mass_drift)
    }

    pub fn has_correction(&self) -> bool {
        !self.theta_l2.is_empty()
    }
}

/// Trajectories for every packet of a scenario.
pub fn trajectories(scenario: &Scenario) -> Result<Vec<Arc<TrajectoryRecord>>> {
    scenario
        .packets
        .iter()
        .map(|p| {
            let d = scenario.dim();
            integrate_trajectory(
                &scenario.model,
                &p.position[..d],
                &p.momentum[..d],
                p.mode,
                scenario.t_final,
                scenario.trajectory_tolerance,
            )
            .map(Arc::new)
        })
        .collect()
}

/// The `eps`-independent part of a study: trajectories and envelopes at
/// every snapshot time, computed once and shared by the whole ladder.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub records: Vec<Arc<TrajectoryRecord>>,
    /// `profiles[j][k]`: envelope of packet `j` at snapshot `k`.
    pub profiles: Vec<Vec<ComplexField>>,
    /// Box radius in `y` outside which every envelope carries at most
    /// `PROFILE_TAIL` of its mass, over the whole run.
    pub profile_radius: f64,
}

pub const PROFILE_TAIL: f64 = 1e-13;

/// Smallest `R` with at most `fraction` of the mass of `u` at nodes whose
/// largest coordinate exceeds `R` in modulus.
pub fn tail_radius(u: &ComplexField, fraction: f64) -> f64 {
    let d = u.grid.dim;
    let mut cells: Vec<(f64, f64)> = u
        .grid
        .node_coords()
        .iter()
        .zip(&u.data)
        .map(|(y, v)| ((0..d).map(|a| y[a].abs()).fold(0.0, f64::max), v.norm_sqr()))
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = cells.iter().map(|c| c.1).sum();
    let mut acc = 0.0;
    for (r, m) in cells {
        acc += m;
        if acc > fraction * total {
            return r;
        }
    }
    0.0
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    scenario.validate()?;
    let records = trajectories(scenario)?;
    let times = scenario.snapshot_times();
    let mut profiles = Vec::with_capacity(records.len());
    let mut radius: f64 = 0.0;
    for (p, r) in scenario.packets.iter().zip(&records) {
        let a = p.envelope.sample(&scenario.profile_grid);
        let src: Arc<dyn HessianSource> = r.clone();
        let states = solve_profile(&a, src, scenario.lambda, &times, scenario.profile_dt)?;
        let us: Vec<ComplexField> = states.into_iter().map(|s| s.u).collect();
        for u in &us {
            radius = radius.max(tail_radius(u, PROFILE_TAIL));
        }
        profiles.push(us);
    }
    Ok(Prepared {
        records,
        profiles,
        profile_radius: radius,
    })
}

/// The x-grid for one `eps`: covers every trajectory plus a margin of
/// `sqrt(eps)` times the larger of `margin` envelope widths and the
/// envelopes' tail radius, resolution rule applied. A fixed grid on the
/// scenario is only checked against the resolution rule.
pub fn grid_for(scenario: &Scenario, prepared: &Prepared, eps: f64) -> Result<GridSpec> {
    let d = scenario.dim();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut xi_max: f64 = 0.0;
    for r in &prepared.records {
        let (l, h) = r.extent();
        for a in 0..d {
            lo[a] = lo[a].min(l[a]);
            hi[a] = hi[a].max(h[a]);
        }
        xi_max = xi_max.max(r.max_speed());
    }
    if let Some(p) = &scenario.perturbation {
        let c = perturbation_centre(scenario, p);
        for a in 0..d {
            lo[a] = lo[a].min(c[a] - 8.0 * p.width);
            hi[a] = hi[a].max(c[a] + 8.0 * p.width);
        }
    }
    for a in d..3 {
        lo[a] = 0.0;
        hi[a] = 0.0;
    }
    if let Some(g) = &scenario.x_grid {
        g.resolution_check(eps, xi_max)?;
        return Ok(g.clone());
    }
    let width = scenario
        .packets
        .iter()
        .map(|p| p.envelope.max_width())
        .fold(1.0, f64::max);
    let reach = (scenario.margin * width).max(prepared.profile_radius);
    GridSpec::covering(d, &lo, &hi, reach * eps.sqrt(), eps, xi_max)
}

fn perturbation_centre(scenario: &Scenario, p: &Perturbation) -> Vec3 {
    let x0 = scenario.packets[0].position;
    [x0[0] + p.offset[0], x0[1] + p.offset[1], x0[2] + p.offset[2]]
}

/// `eta` normalized to `||eta||_{H_eps^1} = eps^gamma0`.
pub fn perturbation_field(scenario: &Scenario, p: &Perturbation, grid: &GridSpec, eps: f64) -> Result<ComplexField> {
    let c = perturbation_centre(scenario, p);
    let d = grid.dim;
    let shape = ComplexField::from_fn(grid, |x| {
        let r2: f64 = (0..d).map(|a| (x[a] - c[a]).powi(2)).sum();
        Complex64::new((-0.5 * r2 / (p.width * p.width)).exp(), 0.0)
    });
    let mut eta = ComplexField::zeros(grid, 2);
    let n = grid.len();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        eta.data[i] = shape.data[i] * s;
        eta.data[n + i] = shape.data[i] * s;
    }
    let h1 = h_eps_norm_with(&Spectral::new(grid), &eta, eps, 1)?;
    if h1 == 0.0 {
        return Err(WpError::Config("perturbation vanishes on the grid".into()));
    }
    eta.scale(Complex64::new(eps.powf(p.gamma0) / h1, 0.0));
    Ok(eta)
}

/// Runs one `eps` of a scenario.
pub fn run_point(scenario: &Scenario, eps: f64) -> Result<ErrorSeries> {
    let prepared = prepare(scenario)?;
    let grid = grid_for(scenario, &prepared, eps)?;
    run_point_on(scenario, &prepared, &grid, eps, scenario.dt)
}

/// Runs one `eps` on a given grid, with an optional time-step override.
pub fn run_point_on(
    scenario: &Scenario,
    prepared: &Prepared,
    grid: &GridSpec,
    eps: f64,
    dt: Option<f64>,
) -> Result<ErrorSeries> {
    let records = &prepared.records;
    let d = scenario.dim();
    let model = &scenario.model;
    let mut config = EvolutionConfig::new(eps, scenario.lambda, d);
    if let Some(b) = scenario.beta {
        config = config.with_beta(b);
    }
    if let Some(dt) = dt {
        config = config.with_dt(dt);
    }
    let xi_max = records.iter().map(|r| r.max_speed()).fold(0.0, f64::max);
    let frame = ModeFrame::new(model, grid)?;
    let spectral = Spectral::new(grid);

    let mut psi0 = ComplexField::zeros(grid, 2);
    for p in &scenario.packets {
        let f = build_wavepacket(p, eps, grid)?;
        psi0.axpy(Complex64::new(1.0, 0.0), &frame.polarize(&f, p.mode));
    }
    if let Some(p) = &scenario.perturbation {
        psi0.axpy(Complex64::new(1.0, 0.0), &perturbation_field(scenario, p, grid, eps)?);
    }
    let mut full = FullSolver::new(psi0, model, config, xi_max)?;

    let evaluator = AnsatzEvaluator::new(grid, &scenario.profile_grid)?;
    let single_mode = scenario.packets[0].mode;
    let mut driven = if scenario.correction {
        let p = &scenario.packets[0];
        let a = p.envelope.sample(&scenario.profile_grid);
        let src: Arc<dyn HessianSource> = records[0].clone();
        let stepper = ProfileStepper::new(a, src, scenario.lambda, scenario.profile_dt)?;
        let source = AnsatzSource::new(stepper, records[0].clone(), grid, eps, p.amplitude)?;
        Some(DrivenSolver::new(
            ComplexField::zeros(grid, 1),
            model,
            single_mode.other(),
            config,
            xi_max,
            Box::new(source),
        )?)
    } else {
        None
    };

    let mut series = ErrorSeries {
        eps,
        t: Vec::new(),
        w_l2: Vec::new(),
        w_heps1: Vec::new(),
        theta_l2: Vec::new(),
        theta_heps1: Vec::new(),
        theta_l4_scaled: Vec::new(),
        g_heps1: Vec::new(),
        minus_mass: Vec::new(),
        mass_drift: Vec::new(),
        grid_points: grid.points[..d].to_vec(),
        dt: config.dt(),
        stopped_at: None,
    };

    for (k, t) in scenario.snapshot_times().into_iter().enumerate() {
        full.advance_to(t)?;
        let mut approx = ComplexField::zeros(grid, 2);
        for ((p, r), prof) in scenario.packets.iter().zip(records).zip(&prepared.profiles) {
            let phi = evaluator.eval(&prof[k], &r.state_at(t), eps, p.amplitude)?;
            approx.axpy(Complex64::new(1.0, 0.0), &frame.polarize(&phi, p.mode));
        }
        let w = full.psi().difference(&approx);
        let w_h1 = h_eps_norm_with(&spectral, &w, eps, 1)?;
        series.t.push(t);
        series.w_l2.push(w.l2_norm());
        series.w_heps1.push(w_h1);
        series.minus_mass.push(frame.project(full.psi(), single_mode.other()).l2_norm());
        series.mass_drift.push(full.mass_drift());

        if let Some(g) = driven.as_mut() {
            g.advance_to(t)?;
            let mut theta = w;
            theta.axpy(Complex64::new(-eps, 0.0), &frame.polarize(g.g(), single_mode.other()));
            series.theta_l2.push(theta.l2_norm());
            series.theta_heps1.push(h_eps_norm_with(&spectral, &theta, eps, 1)?);
            series
                .theta_l4_scaled
                .push(eps.powf(d as f64 / 8.0) * lebesgue_norm(&theta, Lebesgue::L4));
            series.g_heps1.push(h_eps_norm_with(&spectral, g.g(), eps, 1)?);
        }
        if let Some(th) = scenario.stop_threshold {
            if w_h1 > th {
                series.stopped_at = Some(t);
                break;
            }
        }
    }
    Ok(series)
}
