//! Split-step spectral propagators for the two-component system and for the
//! driven scalar equation of the correction term.

use std::sync::Arc;

use num_complex::Complex64;

use crate::classical::TrajectoryRecord;
use crate::error::{Result, WpError};
use crate::fields::{AnsatzEvaluator, ComplexField, GridSpec, Spectral};
use crate::linalg::{dot, to_vec3, Vec3};
use crate::potential::{MatrixPotential, Mode};
use crate::profile::ProfileStepper;

pub const MASS_DRIFT_LIMIT: f64 = 1e-7;

pub type Mat2 = [[Complex64; 2]; 2];

/// Critical exponent `1 + d/2`.
pub fn critical_beta(dim: usize) -> f64 {
    1.0 + 0.5 * dim as f64
}

/// Parameters shared by every propagation at one `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    pub eps: f64,
    pub lambda: f64,
    pub beta: f64,
    /// User cap on the step; the effective step is `min(eps/20, dt_user)`.
    pub dt_user: Option<f64>,
}

impl EvolutionConfig {
    pub fn new(eps: f64, lambda: f64, dim: usize) -> Self {
        EvolutionConfig {
            eps,
            lambda,
            beta: critical_beta(dim),
            dt_user: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt_user = Some(dt);
        self
    }

    pub fn dt(&self) -> f64 {
        let base = self.eps / 20.0;
        self.dt_user.map_or(base, |d| d.min(base))
    }

    pub fn is_critical(&self, dim: usize) -> bool {
        self.beta == critical_beta(dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(WpError::Config(format!("eps = {} must lie in (0, 1]", self.eps)));
        }
        if !(self.lambda >= 0.0) {
            return Err(WpError::Config(format!(
                "Lambda = {} < 0: the focusing case is excluded",
                self.lambda
            )));
        }
        if !self.beta.is_finite() {
            return Err(WpError::Config(format!("beta = {} is not finite", self.beta)));
        }
        if let Some(d) = self.dt_user {
            if !(d > 0.0) {
                return Err(WpError::Config(format!("dt = {d} must be positive")));
            }
        }
        Ok(())
    }
}

/// `exp(-i scale (V + nl Id))` for Hermitian `V`, by its Pauli decomposition
/// `V = a Id + z sz + x sx + y sy`. Reduces to a phase when `V` is scalar.
pub fn pauli_exponential(v: &Mat2, nl_phase: f64, scale: f64) -> Mat2 {
    let a = 0.5 * (v[0][0].re + v[1][1].re);
    let z = 0.5 * (v[0][0].re - v[1][1].re);
    let x = v[0][1].re;
    let y = -v[0][1].im;
    let m = (x * x + y * y + z * z).sqrt();
    let phase = Complex64::from_polar(1.0, -scale * (a + nl_phase));
    let (s, c) = (m * scale).sin_cos();
    let k = if m > 0.0 { s / m } else { scale };
    let i = Complex64::new(0.0, 1.0);
    // cos(m s) Id - i sin(m s)/m (z sz + x sx + y sy)
    [
        [phase * (c - i * k * z), phase * (-i * k * Complex64::new(x, -y))],
        [phase * (-i * k * Complex64::new(x, y)), phase * (c + i * k * z)],
    ]
}

fn real_matrix(v: &[[f64; 2]; 2]) -> Mat2 {
    [
        [Complex64::new(v[0][0], 0.0), Complex64::new(v[0][1], 0.0)],
        [Complex64::new(v[1][0], 0.0), Complex64::new(v[1][1], 0.0)],
    ]
}

struct StepCache<T> {
    h: f64,
    values: Vec<T>,
}

fn cached<'a, T>(cache: &'a mut Vec<StepCache<T>>, h: f64, build: impl FnOnce() -> Vec<T>) -> &'a [T] {
    let idx = match cache.iter().position(|c| c.h == h) {
        Some(i) => i,
        None => {
            if cache.len() >= 4 {
                cache.remove(0);
            }
            cache.push(StepCache { h, values: build() });
            cache.len() - 1
        }
    };
    &cache[idx].values
}

fn kinetic_factors(spectral: &Spectral, eps: f64, h: f64) -> Vec<Complex64> {
    spectral
        .k_squared()
        .iter()
        .map(|k2| Complex64::from_polar(1.0, -0.5 * eps * k2 * h))
        .collect()
}

/// Strang splitting for `i eps dpsi/dt = -(eps^2/2) Lap psi + V psi + Lambda eps^beta |psi|^2 psi`.
/// Each substep is exactly unitary.
pub struct FullSolver {
    spectral: Spectral,
    psi: ComplexField,
    t: f64,
    config: EvolutionConfig,
    potential: Vec<Mat2>,
    kinetic: Vec<StepCache<Complex64>>,
    unitaries: Vec<StepCache<Mat2>>,
    initial_mass: f64,
    max_drift: f64,
}

impl FullSolver {
    pub fn new(psi0: ComplexField, model: &MatrixPotential, config: EvolutionConfig, xi_max: f64) -> Result<Self> {
        config.validate()?;
        if psi0.components != 2 {
            return Err(WpError::Field("the full system needs a two-component field".into()));
        }
        if model.dim != psi0.grid.dim {
            return Err(WpError::Config("model and grid dimensions differ".into()));
        }
        psi0.check_finite()?;
        psi0.grid.resolution_check(config.eps, xi_max)?;
        let potential = psi0
            .grid
            .node_coords()
            .iter()
            .map(|x| real_matrix(&model.eval_v(&x[..model.dim])))
            .collect();
        Ok(FullSolver {
            spectral: Spectral::new(&psi0.grid),
            initial_mass: psi0.mass(),
            psi: psi0,
            t: 0.0,
            config,
            potential,
            kinetic: Vec::new(),
            unitaries: Vec::new(),
            max_drift: 0.0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn psi(&self) -> &ComplexField {
        &self.psi
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    /// Largest relative mass drift seen at any `advance_to` boundary.
    pub fn max_mass_drift(&self) -> f64 {
        self.max_drift
    }

    pub fn mass_drift(&self) -> f64 {
        (self.psi.mass() - self.initial_mass).abs() / self.initial_mass.max(f64::MIN_POSITIVE)
    }

    fn kinetic_step(&mut self, h: f64) {
        let eps = self.config.eps;
        let spectral = &self.spectral;
        let factors = cached(&mut self.kinetic, h, || kinetic_factors(spectral, eps, h));
        for c in 0..2 {
            let buf = self.psi.component_mut(c);
            spectral.forward(buf);
            for (v, f) in buf.iter_mut().zip(factors) {
                *v *= f;
            }
            spectral.inverse(buf);
        }
    }

    fn potential_step(&mut self, h: f64) {
        let scale = h / self.config.eps;
        let pot = &self.potential;
        let us = cached(&mut self.unitaries, h, || {
            pot.iter().map(|v| pauli_exponential(v, 0.0, scale)).collect()
        });
        let nl = self.config.lambda * self.config.eps.powf(self.config.beta - 1.0) * h;
        let n = self.psi.grid.len();
        let (first, second) = self.psi.data.split_at_mut(n);
        for ((a, b), u) in first.iter_mut().zip(second.iter_mut()).zip(us) {
            let rot = if nl != 0.0 {
                Complex64::from_polar(1.0, -nl * (a.norm_sqr() + b.norm_sqr()))
            } else {
                Complex64::new(1.0, 0.0)
            };
            let (p, q) = (*a * rot, *b * rot);
            *a = u[0][0] * p + u[0][1] * q;
            *b = u[1][0] * p + u[1][1] * q;
        }
    }

    /// Advances to `t_target` in equal steps no longer than the configured `dt`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let span = t_target - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let n = (span / self.config.dt() - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        self.kinetic_step(0.5 * h);
        for k in 0..n {
            self.potential_step(h);
            self.kinetic_step(if k + 1 == n { 0.5 * h } else { h });
        }
        self.t = t_target;
        let drift = self.mass_drift();
        self.max_drift = self.max_drift.max(drift);
        if drift > MASS_DRIFT_LIMIT {
            return Err(WpError::MassDrift {
                t: self.t,
                relative: drift,
                limit: MASS_DRIFT_LIMIT,
            });
        }
        self.psi.check_finite()
    }
}

/// Evolves `psi0` and returns the fields at each of `times`.
pub fn evolve_full(
    psi0: &ComplexField,
    model: &MatrixPotential,
    config: EvolutionConfig,
    xi_max: f64,
    times: &[f64],
) -> Result<Vec<(f64, ComplexField)>> {
    let mut s = FullSolver::new(psi0.clone(), model, config, xi_max)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        s.advance_to(t)?;
        out.push((t, s.psi().clone()));
    }
    Ok(out)
}

/// Right-hand side `s(t, x)` of a driven scalar equation.
pub trait SourceTerm {
    /// Source on the solver's grid at time `t`. Calls arrive with
    /// nondecreasing `t`.
    fn eval(&mut self, t: f64) -> Result<ComplexField>;
}

/// `s = 0`.
#[derive(Debug, Clone)]
pub struct ZeroSource(pub GridSpec);

impl SourceTerm for ZeroSource {
    fn eval(&mut self, _t: f64) -> Result<ComplexField> {
        Ok(ComplexField::zeros(&self.0, 1))
    }
}

/// Time-independent `s(x)`.
#[derive(Debug, Clone)]
pub struct StaticSource(pub ComplexField);

impl SourceTerm for StaticSource {
    fn eval(&mut self, _t: f64) -> Result<ComplexField> {
        Ok(self.0.clone())
    }
}

/// `r(t, x) phi(t, x)` with `r = -i <d chi_mode(x) xi(t), chi_other(x)>` and
/// `phi` the packet ansatz of `mode`, rebuilt from its own envelope solve.
pub struct AnsatzSource {
    profile: ProfileStepper,
    record: Arc<TrajectoryRecord>,
    evaluator: AnsatzEvaluator,
    angle_gradient: Vec<Vec3>,
    sign: f64,
    eps: f64,
    amplitude: Complex64,
}

impl AnsatzSource {
    pub fn new(
        profile: ProfileStepper,
        record: Arc<TrajectoryRecord>,
        grid: &GridSpec,
        eps: f64,
        amplitude: Complex64,
    ) -> Result<Self> {
        let model = record.model().clone();
        let angle_gradient = grid
            .node_coords()
            .iter()
            .map(|x| model.angle_gradient3(&to_vec3(&x[..grid.dim])))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnsatzSource {
            evaluator: AnsatzEvaluator::new(grid, &profile.u().grid)?,
            sign: record.mode.sign(),
            profile,
            record,
            angle_gradient,
            eps,
            amplitude,
        })
    }

    /// `r(t, x)` at every node.
    pub fn coupling(&self, t: f64) -> Vec<Complex64> {
        let xi = self.record.state_at(t).xi;
        self.angle_gradient
            .iter()
            .map(|g| Complex64::new(0.0, -0.5 * self.sign * dot(g, &xi)))
            .collect()
    }
}

impl SourceTerm for AnsatzSource {
    fn eval(&mut self, t: f64) -> Result<ComplexField> {
        self.profile.advance_to(t)?;
        let state = self.record.state_at(t);
        let mut phi = self.evaluator.eval(self.profile.u(), &state, self.eps, self.amplitude)?;
        for (v, r) in phi.data.iter_mut().zip(self.coupling(t)) {
            *v *= r;
        }
        Ok(phi)
    }
}

/// Strang splitting for `i eps dg/dt = -(eps^2/2) Lap g + lambda_mode(x) g + s(t, x)`,
/// with the source entering as a midpoint Duhamel increment
/// `g <- g + (h/(i eps)) s(t + h/2)` between the two potential half-steps.
pub struct DrivenSolver {
    spectral: Spectral,
    g: ComplexField,
    t: f64,
    eps: f64,
    dt_max: f64,
    lambda_values: Vec<f64>,
    source: Box<dyn SourceTerm>,
    kinetic: Vec<StepCache<Complex64>>,
    phases: Vec<StepCache<Complex64>>,
}

impl DrivenSolver {
    pub fn new(
        g0: ComplexField,
        model: &MatrixPotential,
        mode: Mode,
        config: EvolutionConfig,
        xi_max: f64,
        source: Box<dyn SourceTerm>,
    ) -> Result<Self> {
        config.validate()?;
        if g0.components != 1 {
            return Err(WpError::Field("the driven equation is scalar".into()));
        }
        g0.check_finite()?;
        g0.grid.resolution_check(config.eps, xi_max)?;
        let lambda_values = g0
            .grid
            .node_coords()
            .iter()
            .map(|x| model.lambda(&x[..model.dim], mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(DrivenSolver {
            spectral: Spectral::new(&g0.grid),
            g: g0,
            t: 0.0,
            eps: config.eps,
            dt_max: config.dt(),
            lambda_values,
            source,
            kinetic: Vec::new(),
            phases: Vec::new(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn g(&self) -> &ComplexField {
        &self.g
    }

    fn kinetic_step(&mut self, h: f64) {
        let eps = self.eps;
        let spectral = &self.spectral;
        let factors = cached(&mut self.kinetic, h, || kinetic_factors(spectral, eps, h));
        let buf = &mut self.g.data;
        spectral.forward(buf);
        for (v, f) in buf.iter_mut().zip(factors) {
            *v *= f;
        }
        spectral.inverse(buf);
    }

    fn potential_step(&mut self, h: f64) {
        let eps = self.eps;
        let lv = &self.lambda_values;
        let ph = cached(&mut self.phases, h, || {
            lv.iter().map(|l| Complex64::from_polar(1.0, -l * h / eps)).collect()
        });
        for (v, p) in self.g.data.iter_mut().zip(ph) {
            *v *= p;
        }
    }

    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let span = t_target - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let n = (span / self.dt_max - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let t0 = self.t;
        let kick = Complex64::new(0.0, -h / self.eps);
        self.kinetic_step(0.5 * h);
        for k in 0..n {
            self.potential_step(0.5 * h);
            let s = self.source.eval(t0 + (k as f64 + 0.5) * h)?;
            self.g.axpy(kick, &s);
            self.potential_step(0.5 * h);
            self.kinetic_step(if k + 1 == n { 0.5 * h } else { h });
        }
        self.t = t_target;
        self.g.check_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_wavepacket, ModeFrame, PacketParams};
    use crate::potential::PotentialKind;

    fn taylor_expm(m: &Mat2) -> Mat2 {
        // scaling and squaring with a 30-term Taylor series
        let norm: f64 = m.iter().flatten().map(|v| v.norm()).sum();
        let s = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scale = 0.5f64.powi(s);
        let a: Mat2 = [[m[0][0] * scale, m[0][1] * scale], [m[1][0] * scale, m[1][1] * scale]];
        let mul = |p: &Mat2, q: &Mat2| -> Mat2 {
            let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] = p[i][0] * q[0][j] + p[i][1] * q[1][j];
                }
            }
            r
        };
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut sum: Mat2 = [[one, zero], [zero, one]];
        let mut term = sum;
        for k in 1..30 {
            term = mul(&term, &a);
            for row in term.iter_mut() {
                for v in row.iter_mut() {
                    *v /= k as f64;
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..s {
            sum = mul(&sum, &sum);
        }
        sum
    }

    #[test]
    fn pauli_exponential_diagonal_case() {
        let v = real_matrix(&[[1.5, 0.0], [0.0, -0.5]]);
        let u = pauli_exponential(&v, 0.25, 0.7);
        assert!((u[0][0] - Complex64::from_polar(1.0, -0.7 * 1.75)).norm() < 1e-15);
        assert!((u[1][1] - Complex64::from_polar(1.0, -0.7 * (-0.25))).norm() < 1e-15);
        assert!(u[0][1].norm() < 1e-15 && u[1][0].norm() < 1e-15);
    }

    #[test]
    fn pauli_exponential_scalar_limit() {
        let v = real_matrix(&[[0.3, 0.0], [0.0, 0.3]]);
        let u = pauli_exponential(&v, 0.0, 2.0);
        assert!((u[0][0] - Complex64::from_polar(1.0, -0.6)).norm() < 1e-15);
        assert!((u[1][1] - u[0][0]).norm() < 1e-15);
    }

    #[test]
    fn pauli_exponential_matches_taylor_oracle() {
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut rnd = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..1000 {
            let (a, b, c, d, nl, sc) = (rnd(), rnd(), rnd(), rnd(), rnd(), rnd());
            let v: Mat2 = [
                [Complex64::new(a, 0.0), Complex64::new(c, d)],
                [Complex64::new(c, -d), Complex64::new(b, 0.0)],
            ];
            let u = pauli_exponential(&v, nl, sc);
            let i = Complex64::new(0.0, -sc);
            let arg: Mat2 = [
                [i * (v[0][0] + nl), i * v[0][1]],
                [i * v[1][0], i * (v[1][1] + nl)],
            ];
            let e = taylor_expm(&arg);
            for r in 0..2 {
                for s in 0..2 {
                    assert!((u[r][s] - e[r][s]).norm() < 1e-12);
                }
            }
            // U U^dagger = Id
            for r in 0..2 {
                for s in 0..2 {
                    let p = u[r][0] * u[s][0].conj() + u[r][1] * u[s][1].conj();
                    let expect = if r == s { 1.0 } else { 0.0 };
                    assert!((p - expect).norm() < 1e-14);
                }
            }
        }
    }

    fn constant_model(rho0: f64, rho: f64) -> MatrixPotential {
        MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0, rho }, 1).unwrap()
    }

    #[test]
    fn gauge_covariance() {
        let model = MatrixPotential::bump_coupling(1);
        let eps = 2f64.powi(-4);
        let g = GridSpec::cubic(1, 3.0, 1024).unwrap();
        let frame = ModeFrame::new(&model, &g).unwrap();
        let psi0 = frame.polarize(&build_wavepacket(&PacketParams::new(&[-0.5], &[1.0], Mode::Plus), eps, &g).unwrap(), Mode::Plus);
        let phase = Complex64::from_polar(1.0, 0.9);
        let mut rotated = psi0.clone();
        rotated.scale(phase);
        let cfg = EvolutionConfig::new(eps, 1.0, 1);
        let a = evolve_full(&psi0, &model, cfg, 1.5, &[0.3]).unwrap();
        let b = evolve_full(&rotated, &model, cfg, 1.5, &[0.3]).unwrap();
        let mut expect = a[0].1.clone();
        expect.scale(phase);
        assert!(b[0].1.difference(&expect).l2_norm() < 1e-12);
    }

    #[test]
    fn zero_source_keeps_zero() {
        let model = constant_model(0.5, 0.5);
        let g = GridSpec::cubic(1, 2.0, 256).unwrap();
        let cfg = EvolutionConfig::new(0.1, 0.0, 1);
        let mut s = DrivenSolver::new(ComplexField::zeros(&g, 1), &model, Mode::Minus, cfg, 1.0, Box::new(ZeroSource(g.clone()))).unwrap();
        s.advance_to(0.5).unwrap();
        assert!(s.g().data.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn static_source_matches_duhamel_formula() {
        // lambda_- = 0: each Fourier mode solves i eps g' = w_k g + s_k
        let model = constant_model(0.5, 0.5);
        let eps = 0.1;
        let g = GridSpec::cubic(1, 3.0, 512).unwrap();
        let src = ComplexField::from_fn(&g, |x| Complex64::new((-4.0 * x[0] * x[0]).exp(), x[0] * (-2.0 * x[0] * x[0]).exp()));
        let cfg = EvolutionConfig::new(eps, 0.0, 1).with_dt(1e-4);
        let mut s = DrivenSolver::new(ComplexField::zeros(&g, 1), &model, Mode::Minus, cfg, 1.0, Box::new(StaticSource(src.clone()))).unwrap();
        let t = 0.1;
        s.advance_to(t).unwrap();
        let spectral = Spectral::new(&g);
        let mut hat = src.data.clone();
        spectral.forward(&mut hat);
        for (v, k2) in hat.iter_mut().zip(spectral.k_squared()) {
            let w = 0.5 * eps * eps * k2;
            let i = Complex64::new(0.0, 1.0);
            let factor = if w == 0.0 {
                -i * t / eps
            } else {
                ((-i * w * t / eps).exp() - 1.0) / w
            };
            *v *= factor;
        }
        spectral.inverse(&mut hat);
        let exact = ComplexField::from_data(&g, 1, hat).unwrap();
        let err = s.g().difference(&exact).l2_norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn dt_rule() {
        let c = EvolutionConfig::new(0.1, 0.0, 1);
        assert_eq!(c.dt(), 0.005);
        assert_eq!(c.with_dt(0.001).dt(), 0.001);
        assert_eq!(c.with_dt(1.0).dt(), 0.005);
        assert!(c.is_critical(1));
        assert!(!c.with_beta(2.0).is_critical(1));
        assert!(EvolutionConfig::new(0.1, -1.0, 1).validate().is_err());
    }
}
