//! Envelope equation `i du/dt + Lap u / 2 = <Q(t) y, y> u / 2 + Lambda |u|^2 u`
//! by Strang splitting, with the energy, variance and weighted-moment
//! functionals used to monitor it.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::classical::TrajectoryRecord;
use crate::error::{Result, WpError};
use crate::experiments::fit::least_squares;
use crate::fields::{ComplexField, GridSpec, Lebesgue, Spectral, lebesgue_norm};
use crate::linalg::{identity, mat_scale, quad_form, Mat3, Vec3, MAX_DIM};

pub const DEFAULT_PROFILE_DT: f64 = 1e-3;
pub const DEFAULT_PROFILE_HALF_WIDTH: f64 = 12.0;
pub const LEAK_CELLS: usize = 10;
pub const LEAK_LIMIT: f64 = 1e-8;
pub const MAX_MOMENT_ORDER: usize = 6;

/// Default periodic y-box `[-12, 12)^d`.
pub fn default_profile_grid(dim: usize) -> Result<GridSpec> {
    let n = match dim {
        1 => 256,
        2 => 64,
        _ => 64,
    };
    GridSpec::cubic(dim, DEFAULT_PROFILE_HALF_WIDTH, n)
}

/// Time-dependent Hessian `Q(t)` and its derivative.
pub trait HessianSource: Send + Sync {
    fn q(&self, t: f64) -> Mat3;
    fn q_dot(&self, t: f64) -> Mat3;
}

impl HessianSource for TrajectoryRecord {
    fn q(&self, t: f64) -> Mat3 {
        self.hessian_at(t)
    }

    fn q_dot(&self, t: f64) -> Mat3 {
        self.hessian_rate_at(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHessian(pub Mat3);

impl ConstantHessian {
    pub fn zero() -> Self {
        ConstantHessian([[0.0; MAX_DIM]; MAX_DIM])
    }

    pub fn identity(dim: usize) -> Self {
        ConstantHessian(identity(dim))
    }
}

impl HessianSource for ConstantHessian {
    fn q(&self, _t: f64) -> Mat3 {
        self.0
    }

    fn q_dot(&self, _t: f64) -> Mat3 {
        [[0.0; MAX_DIM]; MAX_DIM]
    }
}

/// `Q(t) = (1 + t)^{-power} base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayingHessian {
    pub base: Mat3,
    pub power: f64,
}

impl HessianSource for DecayingHessian {
    fn q(&self, t: f64) -> Mat3 {
        mat_scale((1.0 + t).powf(-self.power), &self.base)
    }

    fn q_dot(&self, t: f64) -> Mat3 {
        mat_scale(-self.power * (1.0 + t).powf(-self.power - 1.0), &self.base)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileState {
    pub t: f64,
    pub u: ComplexField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileFunctionals {
    /// `||grad u||^2/2 + (Lambda/2)||u||_4^4 + (1/2) int <Q y, y>|u|^2`.
    pub energy: f64,
    /// `(1/2) int |y|^2 |u|^2`.
    pub variance: f64,
    /// `M[k] = max_{|alpha| + |beta| <= k} ||y^alpha d^beta u||`.
    pub moments: [f64; MAX_MOMENT_ORDER + 1],
    pub mass: f64,
}

struct KineticCache {
    h: f64,
    factors: Vec<Complex64>,
}

/// Strang-split propagator for the envelope equation. The quadratic
/// potential is frozen at each step's midpoint; the cubic term is an exact
/// pointwise phase.
pub struct ProfileStepper {
    spectral: Spectral,
    u: ComplexField,
    t: f64,
    lambda: f64,
    dt_max: f64,
    source: Arc<dyn HessianSource>,
    nodes: Vec<Vec3>,
    initial_mass: f64,
    cache: Vec<KineticCache>,
}

impl std::fmt::Debug for ProfileStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProfileStepper")
            .field("t", &self.t)
            .field("lambda", &self.lambda)
            .field("dt_max", &self.dt_max)
            .finish()
    }
}

impl Clone for ProfileStepper {
    fn clone(&self) -> Self {
        ProfileStepper {
            spectral: self.spectral.clone(),
            u: self.u.clone(),
            t: self.t,
            lambda: self.lambda,
            dt_max: self.dt_max,
            source: Arc::clone(&self.source),
            nodes: self.nodes.clone(),
            initial_mass: self.initial_mass,
            cache: Vec::new(),
        }
    }
}

impl ProfileStepper {
    pub fn new(a: ComplexField, source: Arc<dyn HessianSource>, lambda: f64, dt_max: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(WpError::Config(format!(
                "Lambda = {lambda} < 0: the focusing case is excluded (global existence requires Lambda >= 0)"
            )));
        }
        if !(dt_max > 0.0) {
            return Err(WpError::Config(format!("profile time step {dt_max} must be positive")));
        }
        if a.components != 1 {
            return Err(WpError::Field("profile must be a scalar field".into()));
        }
        a.check_finite()?;
        let s = ProfileStepper {
            spectral: Spectral::new(&a.grid),
            nodes: a.grid.node_coords(),
            initial_mass: a.mass(),
            u: a,
            t: 0.0,
            lambda,
            dt_max,
            source,
            cache: Vec::new(),
        };
        s.check_leak()?;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn u(&self) -> &ComplexField {
        &self.u
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn source(&self) -> &Arc<dyn HessianSource> {
        &self.source
    }

    pub fn state(&self) -> ProfileState {
        ProfileState {
            t: self.t,
            u: self.u.clone(),
        }
    }

    fn kinetic(&mut self, h: f64) {
        let idx = match self.cache.iter().position(|c| c.h == h) {
            Some(i) => i,
            None => {
                if self.cache.len() >= 4 {
                    self.cache.remove(0);
                }
                let factors = self
                    .spectral
                    .k_squared()
                    .iter()
                    .map(|k2| Complex64::from_polar(1.0, -0.5 * k2 * h))
                    .collect();
                self.cache.push(KineticCache { h, factors });
                self.cache.len() - 1
            }
        };
        let buf = &mut self.u.data;
        self.spectral.forward(buf);
        for (v, f) in buf.iter_mut().zip(&self.cache[idx].factors) {
            *v *= f;
        }
        self.spectral.inverse(buf);
    }

    fn potential(&mut self, t_mid: f64, h: f64) {
        let q = self.source.q(t_mid);
        let lambda = self.lambda;
        for (v, y) in self.u.data.iter_mut().zip(&self.nodes) {
            let phase = h * (0.5 * quad_form(&q, y) + lambda * v.norm_sqr());
            *v *= Complex64::from_polar(1.0, -phase);
        }
    }

    /// Advances to `t_target` in equal steps no longer than `dt_max`,
    /// merging adjacent kinetic half-steps.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let span = t_target - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let n = (span / self.dt_max - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let t0 = self.t;
        self.kinetic(0.5 * h);
        for k in 0..n {
            self.potential(t0 + (k as f64 + 0.5) * h, h);
            self.kinetic(if k + 1 == n { 0.5 * h } else { h });
        }
        self.t = t_target;
        self.check_leak()
    }

    pub fn boundary_leak(&self) -> f64 {
        self.u.boundary_mass(LEAK_CELLS) / self.initial_mass.max(f64::MIN_POSITIVE)
    }

    fn check_leak(&self) -> Result<()> {
        let leak = self.boundary_leak();
        if leak > LEAK_LIMIT {
            return Err(WpError::BoundaryLeak {
                t: self.t,
                mass: leak,
                cells: LEAK_CELLS,
                limit: LEAK_LIMIT,
            });
        }
        Ok(())
    }

    pub fn functionals(&self) -> ProfileFunctionals {
        functionals_with(&self.spectral, &self.state(), self.source.as_ref(), self.lambda)
    }
}

/// Solves up to each of `times` (sorted, nonnegative) and returns the states there.
pub fn solve_profile(
    a: &ComplexField,
    source: Arc<dyn HessianSource>,
    lambda: f64,
    times: &[f64],
    dt: f64,
) -> Result<Vec<ProfileState>> {
    let mut s = ProfileStepper::new(a.clone(), source, lambda, dt)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < s.t() {
            return Err(WpError::Config("requested times must be sorted".into()));
        }
        s.advance_to(t)?;
        out.push(s.state());
    }
    Ok(out)
}

pub fn functionals(state: &ProfileState, source: &dyn HessianSource, lambda: f64) -> ProfileFunctionals {
    functionals_with(&Spectral::new(&state.u.grid), state, source, lambda)
}

fn multi_indices(dim: usize, max_order: usize) -> Vec<[usize; MAX_DIM]> {
    let mut out = Vec::new();
    let lim = |a: usize| if a < dim { max_order } else { 0 };
    for i in 0..=lim(0) {
        for j in 0..=lim(1) {
            for k in 0..=lim(2) {
                if i + j + k <= max_order {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out.sort_by_key(|m| m.iter().sum::<usize>());
    out
}

pub(crate) fn functionals_with(
    spectral: &Spectral,
    state: &ProfileState,
    source: &dyn HessianSource,
    lambda: f64,
) -> ProfileFunctionals {
    let u = &state.u;
    let g = &u.grid;
    let dv = g.cell_volume();
    let nodes = g.node_coords();
    let q = source.q(state.t);

    let mut spec = u.data.clone();
    spectral.forward(&mut spec);
    let grad_sq: f64 = spec
        .iter()
        .zip(spectral.k_squared())
        .map(|(v, k2)| v.norm_sqr() * k2)
        .sum::<f64>()
        * dv
        / g.len() as f64;
    let l4 = lebesgue_norm(u, Lebesgue::L4);
    let mut quad = 0.0;
    let mut var = 0.0;
    for (v, y) in u.data.iter().zip(&nodes) {
        let m = v.norm_sqr();
        quad += quad_form(&q, y) * m;
        var += y.iter().map(|c| c * c).sum::<f64>() * m;
    }
    let energy = 0.5 * grad_sq + 0.5 * lambda * l4.powi(4) + 0.5 * quad * dv;

    let mut moments = [0.0f64; MAX_MOMENT_ORDER + 1];
    for beta in multi_indices(g.dim, MAX_MOMENT_ORDER) {
        let nb: usize = beta.iter().sum();
        let mut d = spec.clone();
        spectral.apply_derivative(&mut d, beta);
        spectral.inverse(&mut d);
        for alpha in multi_indices(g.dim, MAX_MOMENT_ORDER - nb) {
            let na: usize = alpha.iter().sum();
            let s: f64 = d
                .iter()
                .zip(&nodes)
                .map(|(v, y)| {
                    let w: f64 = (0..MAX_DIM).map(|a| y[a].powi(alpha[a] as i32)).product();
                    w * w * v.norm_sqr()
                })
                .sum::<f64>()
                * dv;
            let norm = s.sqrt();
            for m in moments.iter_mut().skip(na + nb) {
                *m = (*m).max(norm);
            }
        }
    }
    ProfileFunctionals {
        energy,
        variance: 0.5 * var * dv,
        moments,
        mass: u.mass(),
    }
}

/// `|dE/dt - (1/2) int <dQ/dt y, y>|u|^2|` at each interior state, with
/// `dE/dt` from centred differences of the neighbouring states.
pub fn energy_identity_residual(states: &[ProfileState], source: &dyn HessianSource, lambda: f64) -> Result<Vec<f64>> {
    if states.len() < 3 {
        return Err(WpError::Config(format!(
            "energy identity needs at least 3 states, got {}",
            states.len()
        )));
    }
    let spectral = Spectral::new(&states[0].u.grid);
    let energies: Vec<f64> = states
        .iter()
        .map(|s| functionals_with(&spectral, s, source, lambda).energy)
        .collect();
    let nodes = states[0].u.grid.node_coords();
    let dv = states[0].u.grid.cell_volume();
    Ok((1..states.len() - 1)
        .map(|k| {
            let de = (energies[k + 1] - energies[k - 1]) / (states[k + 1].t - states[k - 1].t);
            let qd = source.q_dot(states[k].t);
            let rhs: f64 = states[k]
                .u
                .data
                .iter()
                .zip(&nodes)
                .map(|(v, y)| quad_form(&qd, y) * v.norm_sqr())
                .sum::<f64>()
                * 0.5
                * dv;
            (de - rhs).abs()
        })
        .collect())
}

/// Moment growth along one envelope solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub t: Vec<f64>,
    pub moments: Vec<[f64; MAX_MOMENT_ORDER + 1]>,
    pub energy: Vec<f64>,
    pub variance: Vec<f64>,
    pub mass: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub y_norm: Vec<f64>,
    pub leak: Vec<f64>,
    /// `sup_t ||grad u(t)||`.
    pub grad_bound: f64,
    /// Slope of `log M_6` against `t`.
    pub growth_rate: f64,
    /// Slope of `log ||y u||` against `log(1 + t)`.
    pub y_power: f64,
    /// Whether the decay hypothesis on `dQ/dt` held for the driving trajectory.
    pub hypothesis_met: bool,
}

pub fn growth_study(
    a: &ComplexField,
    source: Arc<dyn HessianSource>,
    lambda: f64,
    t_final: f64,
    samples: usize,
    dt: f64,
    hypothesis_met: bool,
) -> Result<GrowthReport> {
    if samples < 2 {
        return Err(WpError::Config("growth study needs at least 2 samples".into()));
    }
    let mut s = ProfileStepper::new(a.clone(), source, lambda, dt)?;
    let mut rep = GrowthReport {
        t: Vec::new(),
        moments: Vec::new(),
        energy: Vec::new(),
        variance: Vec::new(),
        mass: Vec::new(),
        grad_norm: Vec::new(),
        y_norm: Vec::new(),
        leak: Vec::new(),
        grad_bound: 0.0,
        growth_rate: 0.0,
        y_power: 0.0,
        hypothesis_met,
    };
    for k in 0..samples {
        let t = t_final * k as f64 / (samples - 1) as f64;
        s.advance_to(t)?;
        let f = s.functionals();
        let grad = gradient_norm(&s.spectral, s.u());
        rep.t.push(t);
        rep.moments.push(f.moments);
        rep.energy.push(f.energy);
        rep.variance.push(f.variance);
        rep.mass.push(f.mass);
        rep.grad_norm.push(grad);
        rep.y_norm.push((2.0 * f.variance).sqrt());
        rep.leak.push(s.boundary_leak());
    }
    rep.grad_bound = rep.grad_norm.iter().cloned().fold(0.0, f64::max);
    let m6: Vec<(f64, f64)> = rep
        .t
        .iter()
        .zip(&rep.moments)
        .map(|(t, m)| (*t, m[MAX_MOMENT_ORDER].ln()))
        .collect();
    rep.growth_rate = least_squares(&m6)?.slope;
    let yp: Vec<(f64, f64)> = rep
        .t
        .iter()
        .zip(&rep.y_norm)
        .map(|(t, y)| ((1.0 + t).ln(), y.ln()))
        .collect();
    rep.y_power = least_squares(&yp)?.slope;
    Ok(rep)
}

fn gradient_norm(spectral: &Spectral, u: &ComplexField) -> f64 {
    let mut spec = u.data.clone();
    spectral.forward(&mut spec);
    (spec
        .iter()
        .zip(spectral.k_squared())
        .map(|(v, k2)| v.norm_sqr() * k2)
        .sum::<f64>()
        * u.grid.cell_volume()
        / u.grid.len() as f64)
        .sqrt()
}

/// CSV with columns `t,mass,E,V,M_1,...,M_6`.
pub fn write_growth_csv<W: Write>(mut w: W, rep: &GrowthReport) -> Result<()> {
    writeln!(w, "t,mass,E,V,M_1,M_2,M_3,M_4,M_5,M_6")?;
    for i in 0..rep.t.len() {
        let mut row = vec![rep.t[i], rep.mass[i], rep.energy[i], rep.variance[i]];
        row.extend_from_slice(&rep.moments[i][1..]);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: &GridSpec) -> ComplexField {
        crate::fields::Envelope::default().sample(grid)
    }

    #[test]
    fn focusing_is_refused() {
        let g = default_profile_grid(1).unwrap();
        let e = ProfileStepper::new(gaussian(&g), Arc::new(ConstantHessian::zero()), -1.0, 1e-3).unwrap_err();
        assert!(matches!(e, WpError::Config(_)));
    }

    #[test]
    fn free_gaussian_closed_form() {
        let g = GridSpec::cubic(1, 12.0, 1024).unwrap();
        let states = solve_profile(&gaussian(&g), Arc::new(ConstantHessian::zero()), 0.0, &[1.0], 1e-3).unwrap();
        let t = 1.0;
        let exact = ComplexField::from_fn(&g, |y| {
            let z = Complex64::new(1.0, t);
            PI.powf(-0.25) / z.sqrt() * (-(y[0] * y[0]) / (2.0 * z)).exp()
        });
        assert!(states[0].u.difference(&exact).l2_norm() < 1e-6);
    }

    #[test]
    fn harmonic_ground_state_keeps_modulus() {
        let g = default_profile_grid(1).unwrap();
        let a = gaussian(&g);
        let states = solve_profile(&a, Arc::new(ConstantHessian::identity(1)), 0.0, &[0.5, 1.0], 1e-3).unwrap();
        for s in &states {
            for (p, q) in s.u.data.iter().zip(&a.data) {
                assert!((p.norm() - q.norm()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gaussian_functionals() {
        let g = default_profile_grid(1).unwrap();
        let f = functionals(&ProfileState { t: 0.0, u: gaussian(&g) }, &ConstantHessian::zero(), 0.0);
        assert!((f.energy - 0.25).abs() < 1e-12);
        assert!((f.variance - 0.25).abs() < 1e-12);
        assert!((f.moments[0] - 1.0).abs() < 1e-12);
        // ||y a|| = ||a'|| = 2^{-1/2} and ||y^2 a|| = (3/4)^{1/2} stay below ||a||
        assert!((f.moments[2] - 1.0).abs() < 1e-12);
        // ||y^3 a||^2 = 15/8
        assert!((f.moments[3] - (15.0f64 / 8.0).sqrt()).abs() < 1e-10);
        assert!(f.moments.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn free_gradient_is_constant_and_width_grows() {
        let g = default_profile_grid(1).unwrap();
        let rep = growth_study(&gaussian(&g), Arc::new(ConstantHessian::zero()), 0.0, 2.0, 5, 1e-3, true).unwrap();
        for (t, (gn, yn)) in rep.t.iter().zip(rep.grad_norm.iter().zip(&rep.y_norm)) {
            assert!((gn - 0.5f64.sqrt()).abs() < 1e-12);
            assert!((yn - ((1.0 + t * t) / 2.0).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_q_conserves_energy() {
        let g = default_profile_grid(2).unwrap();
        let q = ConstantHessian([[0.5, 0.1, 0.0], [0.1, 0.3, 0.0], [0.0; 3]]);
        let states = solve_profile(&gaussian(&g), Arc::new(q), 1.0, &[0.0, 0.5, 1.0], 1e-3).unwrap();
        let e0 = functionals(&states[0], &q, 1.0).energy;
        let e1 = functionals(&states[2], &q, 1.0).energy;
        assert!((e1 - e0).abs() < 1e-6);
        assert!((states[2].u.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_leak_is_reported() {
        let g = GridSpec::cubic(1, 4.0, 64).unwrap();
        let e = ProfileStepper::new(gaussian(&g), Arc::new(ConstantHessian::zero()), 0.0, 1e-3).unwrap_err();
        assert!(matches!(e, WpError::BoundaryLeak { .. }));
    }

    #[test]
    fn moment_multi_indices() {
        assert_eq!(multi_indices(1, 6).len(), 7);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 1).len(), 4);
    }
}
