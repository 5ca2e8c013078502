//! Classical Hamiltonian flow on one eigenvalue surface, with the action
//! carried as an extra state and cubic Hermite dense output.

use std::io::Write;

use crate::error::{Result, WpError};
use crate::linalg::{
    dot, mat_add_scaled, mat_norm, mat_scale, norm, quad_form, sub, to_vec3, Mat3, Vec3, ZERO3,
};
use crate::potential::{MatrixPotential, Mode};

/// Largest accepted step of the adaptive integrator unless overridden.
/// Keeps the Hermite interpolant of `x(t)` accurate to ~1e-8.
pub const DEFAULT_MAX_STEP: f64 = 0.05;

const STATE_LEN: usize = 7;
type State = [f64; STATE_LEN];

/// Position, momentum and action at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: Vec3,
    pub xi: Vec3,
    pub action: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeDiagnostics {
    /// `E - lambda_inf`, when the potential has a limit at infinity.
    pub energy_margin: Option<f64>,
    /// `min |x(t)| / t` over the second half of the run.
    pub min_speed_ratio: f64,
    /// `d^2/dt^2 |x|^2 = 2|xi|^2 - 2 x . grad lambda` at the final time.
    pub radial_acceleration: f64,
    pub escaping: bool,
}

/// Sampled trajectory of `x' = xi, xi' = -grad lambda_mode(x)` with action
/// `S' = |xi|^2/2 - lambda_mode(x)`. Immutable once built.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub mode: Mode,
    pub dim: usize,
    pub t: Vec<f64>,
    pub x: Vec<Vec3>,
    pub xi: Vec<Vec3>,
    pub action: Vec<f64>,
    pub force: Vec<Vec3>,
    pub lagrangian: Vec<f64>,
    pub q: Vec<Mat3>,
    /// Energy at `t = 0`.
    pub energy: f64,
    /// `max_k |E(t_k) - E(0)| / max(1, |E(0)|)`.
    pub energy_drift: f64,
    pub escape: EscapeDiagnostics,
    model: MatrixPotential,
}

fn rhs(model: &MatrixPotential, mode: Mode, dim: usize, y: &State) -> Result<(State, f64)> {
    let x = to_vec3(&y[..dim]);
    let jet = model.lambda_jet3(&x, mode)?;
    let mut out = [0.0; STATE_LEN];
    let mut kinetic = 0.0;
    for i in 0..dim {
        out[i] = y[dim + i];
        out[dim + i] = -jet.grad[i];
        kinetic += 0.5 * y[dim + i] * y[dim + i];
    }
    out[2 * dim] = kinetic - jet.value;
    Ok((out, jet.value))
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Builder<'a> {
    model: &'a MatrixPotential,
    mode: Mode,
    dim: usize,
    rec: TrajectoryRecord,
}

impl<'a> Builder<'a> {
    fn new(model: &'a MatrixPotential, mode: Mode) -> Self {
        Builder {
            model,
            mode,
            dim: model.dim,
            rec: TrajectoryRecord {
                mode,
                dim: model.dim,
                t: Vec::new(),
                x: Vec::new(),
                xi: Vec::new(),
                action: Vec::new(),
                force: Vec::new(),
                lagrangian: Vec::new(),
                q: Vec::new(),
                energy: 0.0,
                energy_drift: 0.0,
                escape: EscapeDiagnostics {
                    energy_margin: None,
                    min_speed_ratio: 0.0,
                    radial_acceleration: 0.0,
                    escaping: false,
                },
                model: model.clone(),
            },
        }
    }

    fn push(&mut self, t: f64, y: &State) -> Result<()> {
        let d = self.dim;
        let x = to_vec3(&y[..d]);
        let xi = to_vec3(&y[d..2 * d]);
        let jet = self.model.lambda_jet3(&x, self.mode)?;
        let kinetic = 0.5 * dot(&xi, &xi);
        let energy = kinetic + jet.value;
        if self.rec.t.is_empty() {
            self.rec.energy = energy;
        } else {
            let drift = (energy - self.rec.energy).abs() / self.rec.energy.abs().max(1.0);
            self.rec.energy_drift = self.rec.energy_drift.max(drift);
        }
        self.rec.t.push(t);
        self.rec.x.push(x);
        self.rec.xi.push(xi);
        self.rec.action.push(y[2 * d]);
        self.rec.force.push(crate::linalg::scale(-1.0, &jet.grad));
        self.rec.lagrangian.push(kinetic - jet.value);
        self.rec.q.push(jet.hess);
        Ok(())
    }

    fn finish(mut self) -> TrajectoryRecord {
        self.rec.escape = escape_diagnostics(&self.rec);
        self.rec
    }
}

fn initial_state(dim: usize, x0: &[f64], xi0: &[f64]) -> Result<State> {
    if x0.len() != dim || xi0.len() != dim {
        return Err(WpError::Config(format!(
            "initial point has dimension {}/{} but the model has {dim}",
            x0.len(),
            xi0.len()
        )));
    }
    let mut y = [0.0; STATE_LEN];
    y[..dim].copy_from_slice(x0);
    y[dim..2 * dim].copy_from_slice(xi0);
    Ok(y)
}

/// Adaptive Dormand-Prince 5(4) integration of the trajectory on `[0, t_final]`
/// with mixed absolute/relative local tolerance `tolerance`.
pub fn integrate_trajectory(
    model: &MatrixPotential,
    x0: &[f64],
    xi0: &[f64],
    mode: Mode,
    t_final: f64,
    tolerance: f64,
) -> Result<TrajectoryRecord> {
    integrate_trajectory_with_max_step(model, x0, xi0, mode, t_final, tolerance, DEFAULT_MAX_STEP)
}

pub fn integrate_trajectory_with_max_step(
    model: &MatrixPotential,
    x0: &[f64],
    xi0: &[f64],
    mode: Mode,
    t_final: f64,
    tolerance: f64,
    max_step: f64,
) -> Result<TrajectoryRecord> {
    if !(t_final >= 0.0) || !(tolerance > 0.0) || !(max_step > 0.0) {
        return Err(WpError::Config(format!(
            "invalid integration request: T = {t_final}, tolerance = {tolerance}, max step = {max_step}"
        )));
    }
    let dim = model.dim;
    let n = 2 * dim + 1;
    let mut y = initial_state(dim, x0, xi0)?;
    let mut b = Builder::new(model, mode);
    b.push(0.0, &y)?;
    let mut t = 0.0;
    let mut h = (0.01f64).min(max_step).min(t_final.max(1e-3));
    let mut k = [[0.0; STATE_LEN]; 7];
    k[0] = rhs(model, mode, dim, &y)?.0;

    while t < t_final {
        if t + h > t_final {
            h = t_final - t;
        }
        let mut stage = [0.0; STATE_LEN];
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                stage[i] = acc;
            }
            k[s] = rhs(model, mode, dim, &stage)?.0;
        }
        let mut y5 = [0.0; STATE_LEN];
        let mut err = 0.0f64;
        for i in 0..n {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for j in 0..7 {
                s5 += B5[j] * k[j][i];
                s4 += B4[j] * k[j][i];
            }
            y5[i] = y[i] + h * s5;
            let scale = tolerance * (1.0 + y[i].abs().max(y5[i].abs()));
            err = err.max((h * (s5 - s4)).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            // FSAL: the 7th stage is the derivative at the new point
            k[0] = k[6];
            b.push(t, &y)?;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(max_step);
        if h < 1e-14 * (1.0 + t.abs()) && t < t_final {
            return Err(WpError::StepFailure { t, h });
        }
    }
    Ok(b.finish())
}

/// Fixed-step Stormer-Verlet integration. Symplectic, second order; the
/// action is accumulated with the discrete Lagrangian of the scheme.
pub fn integrate_verlet(
    model: &MatrixPotential,
    x0: &[f64],
    xi0: &[f64],
    mode: Mode,
    t_final: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(WpError::Config(format!("invalid Verlet step {dt} or horizon {t_final}")));
    }
    let dim = model.dim;
    let mut y = initial_state(dim, x0, xi0)?;
    let mut b = Builder::new(model, mode);
    b.push(0.0, &y)?;
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let mut x = to_vec3(&y[..dim]);
    let mut xi = to_vec3(&y[dim..2 * dim]);
    let mut jet = model.lambda_jet3(&x, mode)?;
    let mut action = 0.0;
    for step in 1..=steps {
        let half = crate::linalg::add_scaled(&xi, -0.5 * h, &jet.grad);
        let x_new = crate::linalg::add_scaled(&x, h, &half);
        let jet_new = model.lambda_jet3(&x_new, mode)?;
        action += h * (0.5 * dot(&half, &half) - 0.5 * (jet.value + jet_new.value));
        xi = crate::linalg::add_scaled(&half, -0.5 * h, &jet_new.grad);
        x = x_new;
        jet = jet_new;
        y[..dim].copy_from_slice(&x[..dim]);
        y[dim..2 * dim].copy_from_slice(&xi[..dim]);
        y[2 * dim] = action;
        b.push(step as f64 * h, &y)?;
    }
    Ok(b.finish())
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

impl TrajectoryRecord {
    pub fn model(&self) -> &MatrixPotential {
        &self.model
    }

    pub fn t_final(&self) -> f64 {
        *self.t.last().expect("record has at least one sample")
    }

    pub fn initial(&self) -> PhaseState {
        PhaseState {
            x: self.x[0],
            xi: self.xi[0],
            action: 0.0,
        }
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.t.len();
        if n < 2 {
            return 0;
        }
        match self.t.binary_search_by(|p| p.partial_cmp(&t).expect("finite times")) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Dense output at any `t` in `[0, T]` (clamped outside).
    pub fn state_at(&self, t: f64) -> PhaseState {
        if self.t.len() == 1 {
            return self.initial();
        }
        let t = t.clamp(0.0, self.t_final());
        let i = self.interval(t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let mut x = ZERO3;
        let mut xi = ZERO3;
        for a in 0..self.dim {
            x[a] = hermite(t0, t1, self.x[i][a], self.x[i + 1][a], self.xi[i][a], self.xi[i + 1][a], t);
            xi[a] = hermite(
                t0,
                t1,
                self.xi[i][a],
                self.xi[i + 1][a],
                self.force[i][a],
                self.force[i + 1][a],
                t,
            );
        }
        let action = hermite(
            t0,
            t1,
            self.action[i],
            self.action[i + 1],
            self.lagrangian[i],
            self.lagrangian[i + 1],
            t,
        );
        PhaseState { x, xi, action }
    }

    /// `Q(t) = Hess lambda_mode(x(t))` on the interpolated path.
    pub fn hessian_at(&self, t: f64) -> Mat3 {
        let s = self.state_at(t);
        match self.model.lambda_jet3(&s.x, self.mode) {
            Ok(j) => j.hess,
            Err(_) => {
                // path was gap-checked at every accepted step; fall back to the samples
                let i = self.interval(t.clamp(0.0, self.t_final()));
                let j = (i + 1).min(self.q.len() - 1);
                let w = if self.t[j] > self.t[i] {
                    (t - self.t[i]) / (self.t[j] - self.t[i])
                } else {
                    0.0
                };
                mat_add_scaled(&mat_scale(1.0 - w, &self.q[i]), w, &self.q[j])
            }
        }
    }

    /// `dQ/dt` by a central difference on the interpolant.
    pub fn hessian_rate_at(&self, t: f64) -> Mat3 {
        let h = 1e-4;
        let tf = self.t_final();
        let (a, b) = ((t - h).max(0.0), (t + h).min(tf));
        if b <= a {
            return crate::linalg::ZERO33;
        }
        mat_scale(
            1.0 / (b - a),
            &mat_add_scaled(&self.hessian_at(b), -1.0, &self.hessian_at(a)),
        )
    }

    pub fn energy_at_sample(&self, k: usize) -> f64 {
        0.5 * dot(&self.xi[k], &self.xi[k]) + self.lagrangian_potential(k)
    }

    fn lagrangian_potential(&self, k: usize) -> f64 {
        0.5 * dot(&self.xi[k], &self.xi[k]) - self.lagrangian[k]
    }

    pub fn max_speed(&self) -> f64 {
        self.xi.iter().map(norm).fold(0.0, f64::max)
    }

    /// Bounding box `(lo, hi)` of the sampled positions.
    pub fn extent(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for x in &self.x {
            for a in 0..self.dim {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        for a in self.dim..3 {
            lo[a] = 0.0;
            hi[a] = 0.0;
        }
        (lo, hi)
    }

    /// One row per accepted step: `t, x_1..x_d, xi_1..xi_d, S, E, |Q|, |dQ/dt|`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim;
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.extend((1..=d).map(|i| format!("xi_{i}")));
        header.extend(["S", "E", "q_norm", "qdot_norm"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.t.len() {
            let mut row = vec![format!("{:.17e}", self.t[k])];
            row.extend((0..d).map(|i| format!("{:.17e}", self.x[k][i])));
            row.extend((0..d).map(|i| format!("{:.17e}", self.xi[k][i])));
            row.push(format!("{:.17e}", self.action[k]));
            row.push(format!("{:.17e}", self.energy_at_sample(k)));
            row.push(format!("{:.17e}", mat_norm(&self.q[k])));
            row.push(format!("{:.17e}", mat_norm(&self.hessian_rate_at(self.t[k]))));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The action samples `S(t_k)`.
pub fn action(record: &TrajectoryRecord) -> &[f64] {
    &record.action
}

fn escape_diagnostics(rec: &TrajectoryRecord) -> EscapeDiagnostics {
    let energy_margin = rec
        .model
        .lambda_infinity(rec.mode)
        .map(|l| rec.energy - l);
    let tf = rec.t_final();
    let mut min_ratio = f64::INFINITY;
    for (t, x) in rec.t.iter().zip(&rec.x) {
        if *t >= 0.5 * tf && *t > 0.0 {
            min_ratio = min_ratio.min(norm(x) / t);
        }
    }
    if !min_ratio.is_finite() {
        min_ratio = 0.0;
    }
    let last = rec.t.len() - 1;
    let (x, xi, f) = (rec.x[last], rec.xi[last], rec.force[last]);
    let radial_acceleration = 2.0 * dot(&xi, &xi) + 2.0 * dot(&x, &f);
    let outward = dot(&x, &xi) > 0.0;
    EscapeDiagnostics {
        energy_margin,
        min_speed_ratio: min_ratio,
        radial_acceleration,
        escaping: energy_margin.is_some_and(|m| m > 0.0) && radial_acceleration > 0.0 && outward,
    }
}

/// Log-log fit of `|dQ/dt| <= C (1 + t)^{-kappa0 - 1}` on the tail of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QdotDecay {
    /// `Q` is constant along the run; `kappa0 = +inf`.
    Constant,
    Fitted {
        /// Smallest `C` making the bound hold on every fitted sample.
        c: f64,
        kappa0: f64,
        /// `kappa0 > 2` on an escaping trajectory.
        hypothesis_met: bool,
    },
}

impl QdotDecay {
    pub fn kappa0(&self) -> f64 {
        match self {
            QdotDecay::Constant => f64::INFINITY,
            QdotDecay::Fitted { kappa0, .. } => *kappa0,
        }
    }

    pub fn hypothesis_met(&self) -> bool {
        match self {
            QdotDecay::Constant => true,
            QdotDecay::Fitted { hypothesis_met, .. } => *hypothesis_met,
        }
    }
}

/// Fits the decay rate of `|dQ/dt|` over the last three quarters of the run
/// (`t >= T/4`), sampled at 48 log-spaced times.
pub fn fit_qdot_decay(record: &TrajectoryRecord) -> Result<QdotDecay> {
    let tf = record.t_final();
    if tf < 10.0 {
        return Err(WpError::Fit(format!(
            "decay fit needs a run of length >= 10, got {tf}"
        )));
    }
    let n = 48;
    let t0 = (0.25 * tf).max(1.0);
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = t0 * (tf / t0).powf(i as f64 / (n - 1) as f64);
            (t.min(tf), mat_norm(&record.hessian_rate_at(t.min(tf))))
        })
        .collect();
    let peak = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let scale = record.q.iter().map(mat_norm).fold(1.0, f64::max);
    if peak <= 1e-12 * scale {
        return Ok(QdotDecay::Constant);
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.1 > 0.0)
        .map(|(t, q)| ((1.0 + t).ln(), q.ln()))
        .collect();
    let fit = crate::experiments::fit::least_squares(&pts)?;
    let kappa0 = -fit.slope - 1.0;
    let c = samples
        .iter()
        .map(|(t, q)| q * (1.0 + t).powf(kappa0 + 1.0))
        .fold(0.0, f64::max);
    Ok(QdotDecay::Fitted {
        c,
        kappa0,
        hypothesis_met: kappa0 > 2.0 && record.escape.escaping,
    })
}

/// Cubic Taylor remainder of `lambda_mode` about `x(t)`:
/// `lambda(x) - lambda(x_t) - grad lambda(x_t).(x - x_t) - <Q (x - x_t), x - x_t>/2`.
pub fn taylor_remainder(
    model: &MatrixPotential,
    record: &TrajectoryRecord,
    t: f64,
    x: &[f64],
    mode: Mode,
) -> Result<f64> {
    let centre = record.state_at(t).x;
    let jc = model.lambda_jet3(&centre, mode)?;
    let p = to_vec3(&x[..model.dim]);
    let jp = model.lambda_jet3(&p, mode)?;
    let dx = sub(&p, &centre);
    Ok(jp.value - jc.value - dot(&jc.grad, &dx) - 0.5 * quad_form(&jc.hess, &dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialKind;

    fn quadratic(d: usize) -> MatrixPotential {
        MatrixPotential::new(PotentialKind::SyntheticQuadratic, d).unwrap()
    }

    fn flat() -> MatrixPotential {
        MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0: 0.0, rho: 1.0 }, 2).unwrap()
    }

    #[test]
    fn free_motion_is_linear() {
        let rec = integrate_trajectory(&flat(), &[0.5, -1.0], &[1.0, 0.25], Mode::Plus, 3.0, 1e-12).unwrap();
        for k in 0..rec.t.len() {
            let t = rec.t[k];
            assert!((rec.x[k][0] - (0.5 + t)).abs() < 1e-12);
            assert!((rec.x[k][1] - (-1.0 + 0.25 * t)).abs() < 1e-12);
            let expect = (0.5 * (1.0 + 0.0625) - 1.0) * t;
            assert!((rec.action[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_oscillator_closed_form() {
        let rec = integrate_trajectory(&quadratic(2), &[1.0, 0.0], &[0.0, 0.0], Mode::Plus, 6.0, 1e-12).unwrap();
        assert!((rec.energy - 0.5).abs() < 1e-15);
        for k in 0..rec.t.len() {
            let t = rec.t[k];
            assert!((rec.x[k][0] - t.cos()).abs() < 1e-9);
            assert!((rec.xi[k][0] + t.sin()).abs() < 1e-9);
            assert!((rec.action[k] + (2.0 * t).sin() / 4.0).abs() < 1e-9);
        }
        let s = rec.state_at(2.345);
        assert!((s.x[0] - 2.345f64.cos()).abs() < 1e-7);
    }

    #[test]
    fn reversed_trajectory_returns() {
        let m = MatrixPotential::bump_coupling(2);
        let tol = 1e-11;
        let fwd = integrate_trajectory(&m, &[-1.0, 0.3], &[1.2, 0.1], Mode::Plus, 4.0, tol).unwrap();
        let last = fwd.t.len() - 1;
        let back_x = [fwd.x[last][0], fwd.x[last][1]];
        let back_xi = [-fwd.xi[last][0], -fwd.xi[last][1]];
        let back = integrate_trajectory(&m, &back_x, &back_xi, Mode::Plus, 4.0, tol).unwrap();
        let end = back.t.len() - 1;
        assert!((back.x[end][0] + 1.0).abs() < 100.0 * tol);
        assert!((back.x[end][1] - 0.3).abs() < 100.0 * tol);
        assert!((back.xi[end][0] + 1.2).abs() < 100.0 * tol);
        assert!((back.action[end] - fwd.action[last]).abs() < 100.0 * tol);
    }

    #[test]
    fn verlet_conserves_energy_approximately() {
        let m = MatrixPotential::bump_coupling(1);
        let rec = integrate_verlet(&m, &[-2.0], &[1.0], Mode::Minus, 10.0, 1e-3).unwrap();
        assert!(rec.energy_drift < 1e-6);
        let reference = integrate_trajectory(&m, &[-2.0], &[1.0], Mode::Minus, 10.0, 1e-12).unwrap();
        let end = rec.t.len() - 1;
        let r = reference.state_at(10.0);
        assert!((rec.x[end][0] - r.x[0]).abs() < 1e-5);
        assert!((rec.action[end] - r.action).abs() < 1e-5);
    }

    #[test]
    fn constant_hessian_has_constant_marker() {
        let rec = integrate_trajectory(&quadratic(1), &[1.0], &[0.0], Mode::Plus, 12.0, 1e-10).unwrap();
        assert_eq!(fit_qdot_decay(&rec).unwrap(), QdotDecay::Constant);
    }

    #[test]
    fn short_runs_cannot_be_fitted() {
        let rec = integrate_trajectory(&quadratic(1), &[1.0], &[0.0], Mode::Plus, 2.0, 1e-10).unwrap();
        assert!(matches!(fit_qdot_decay(&rec), Err(WpError::Fit(_))));
    }

    #[test]
    fn escaping_trajectory_meets_decay_hypothesis() {
        let m = MatrixPotential::bump_coupling(2);
        let rec = integrate_trajectory(&m, &[-0.5, 0.2], &[1.5, 0.2], Mode::Plus, 100.0, 1e-11).unwrap();
        assert!(rec.escape.escaping, "{:?}", rec.escape);
        match fit_qdot_decay(&rec).unwrap() {
            QdotDecay::Fitted { kappa0, hypothesis_met, .. } => {
                assert!(kappa0 > 2.0, "kappa0 = {kappa0}");
                assert!(hypothesis_met);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trapped_trajectory_is_flagged() {
        let m = MatrixPotential::new(
            PotentialKind::BumpCoupling {
                rho0_amplitude: -2.0,
                decay: 2.0,
                coupling_amplitude: 0.3,
                coupling_radius: 1.0,
                coupling_center: ZERO3,
            },
            1,
        )
        .unwrap();
        let rec = integrate_trajectory(&m, &[0.3], &[0.2], Mode::Plus, 30.0, 1e-10).unwrap();
        assert!(!rec.escape.escaping);
        assert!(!fit_qdot_decay(&rec).unwrap().hypothesis_met());
    }

    #[test]
    fn remainder_vanishes_at_centre_and_for_quadratics() {
        let m = MatrixPotential::bump_coupling(1);
        let rec = integrate_trajectory(&m, &[-1.0], &[1.0], Mode::Plus, 1.0, 1e-12).unwrap();
        let c = rec.state_at(0.4).x;
        assert!(taylor_remainder(&m, &rec, 0.4, &[c[0]], Mode::Plus).unwrap().abs() < 1e-15);
        let q = quadratic(1);
        let rq = integrate_trajectory(&q, &[1.0], &[0.0], Mode::Plus, 1.0, 1e-12).unwrap();
        assert!(taylor_remainder(&q, &rq, 0.5, &[3.0], Mode::Plus).unwrap().abs() < 1e-12);
    }

    #[test]
    fn remainder_is_cubic() {
        let m = MatrixPotential::bump_coupling(1);
        let rec = integrate_trajectory(&m, &[-1.0], &[1.0], Mode::Plus, 1.0, 1e-12).unwrap();
        let c = rec.state_at(0.5).x[0];
        let r: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|h| taylor_remainder(&m, &rec, 0.5, &[c + h], Mode::Plus).unwrap().abs())
            .collect();
        let slope1 = (r[0] / r[1]).log2();
        let slope2 = (r[1] / r[2]).log2();
        assert!((slope1 - 3.0).abs() < 0.25, "{slope1}");
        assert!((slope2 - 3.0).abs() < 0.15, "{slope2}");
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let rec = integrate_trajectory(&flat(), &[0.0, 0.0], &[1.0, 0.0], Mode::Plus, 0.2, 1e-10).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rec.t.len() + 1);
        assert!(text.starts_with("t,x_1,x_2,xi_1,xi_2,S,E,q_norm,qdot_norm"));
    }
}
