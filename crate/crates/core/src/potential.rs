//! Two-level matrix potentials `V(x) = rho0(x) Id + [[rho, omega], [omega, -rho]]`
//! with analytic eigen-decomposition and derivatives.
//!
//! Eigenvectors use the real half-angle gauge
//! `chi_+ = (cos(a/2), sin(a/2))`, `chi_- = (-sin(a/2), cos(a/2))` with
//! `a = atan2(omega, rho)`. The gauge is smooth wherever `(rho, omega)`
//! stays away from the origin, which the gap condition guarantees.

use crate::error::{Result, WpError};
use crate::linalg::{
    dot, identity, mat_add_scaled, mat_scale, outer, to_vec3, Mat3, Vec3, MAX_DIM, ZERO3, ZERO33,
};

/// Default hard floor on `rho^2 + omega^2` below which eigen-data is refused.
pub const DEFAULT_DELTA0: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Plus,
    Minus,
}

impl Mode {
    pub fn sign(self) -> f64 {
        match self {
            Mode::Plus => 1.0,
            Mode::Minus => -1.0,
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::Plus => Mode::Minus,
            Mode::Minus => Mode::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Plus => "+",
            Mode::Minus => "-",
        }
    }
}

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec3,
    pub hess: Mat3,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: ZERO3,
            hess: ZERO33,
        }
    }

    fn add(&self, other: &Jet) -> Jet {
        Jet {
            value: self.value + other.value,
            grad: crate::linalg::add_scaled(&self.grad, 1.0, &other.grad),
            hess: mat_add_scaled(&self.hess, 1.0, &other.hess),
        }
    }

    fn mul(&self, other: &Jet) -> Jet {
        let mut hess = mat_add_scaled(&mat_scale(self.value, &other.hess), other.value, &self.hess);
        hess = mat_add_scaled(&hess, 1.0, &outer(&self.grad, &other.grad));
        hess = mat_add_scaled(&hess, 1.0, &outer(&other.grad, &self.grad));
        let mut grad = ZERO3;
        for i in 0..MAX_DIM {
            grad[i] = self.value * other.grad[i] + other.value * self.grad[i];
        }
        Jet {
            value: self.value * other.value,
            grad,
            hess,
        }
    }

    /// Chain rule for `h(self)` given `h`, `h'`, `h''` at `self.value`.
    fn compose(&self, h: f64, h1: f64, h2: f64) -> Jet {
        let hess = mat_add_scaled(&mat_scale(h1, &self.hess), h2, &outer(&self.grad, &self.grad));
        Jet {
            value: h,
            grad: crate::linalg::scale(h1, &self.grad),
            hess,
        }
    }

    fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }
}

/// `|x - c|^2 / width2` as a jet.
fn scaled_square(x: &Vec3, center: &Vec3, width2: f64, dim: usize) -> Jet {
    let mut grad = ZERO3;
    let mut value = 0.0;
    for i in 0..dim {
        let dx = x[i] - center[i];
        value += dx * dx;
        grad[i] = 2.0 * dx / width2;
    }
    Jet {
        value: value / width2,
        grad,
        hess: mat_scale(2.0 / width2, &identity(dim)),
    }
}

/// `<x>^{-p} = (1 + |x|^2)^{-p/2}`.
fn bracket_power(x: &Vec3, p: f64, dim: usize) -> Jet {
    let s = scaled_square(x, &ZERO3, 1.0, dim);
    let s = Jet {
        value: 1.0 + s.value,
        ..s
    };
    let half = 0.5 * p;
    let h = s.value.powf(-half);
    let h1 = -half * h / s.value;
    let h2 = half * (half + 1.0) * h / (s.value * s.value);
    s.compose(h, h1, h2)
}

/// Smooth bump `A exp(1 - 1/(1 - |x-c|^2/R^2))`, supported in the open ball of radius `R`.
fn bump(x: &Vec3, amplitude: f64, radius: f64, center: &Vec3, dim: usize) -> Jet {
    let q = scaled_square(x, center, radius * radius, dim);
    if q.value >= 1.0 {
        return Jet::constant(0.0);
    }
    let one_minus = 1.0 - q.value;
    let h = amplitude * (1.0 - 1.0 / one_minus).exp();
    let h1 = -h / (one_minus * one_minus);
    let h2 = h * (1.0 / one_minus.powi(4) - 2.0 / one_minus.powi(3));
    q.compose(h, h1, h2)
}

fn gaussian(x: &Vec3, amplitude: f64, width: f64, dim: usize) -> Jet {
    let q = scaled_square(x, &ZERO3, 2.0 * width * width, dim);
    let h = amplitude * (-q.value).exp();
    q.compose(h, -h, h)
}

/// The built-in potential families.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `rho0 = c <x>^{-p}`, `rho = 1`, `omega` a compactly supported bump.
    /// Satisfies every clause of the long-range assumption with `delta0 = 1`.
    BumpCoupling {
        rho0_amplitude: f64,
        decay: f64,
        coupling_amplitude: f64,
        coupling_radius: f64,
        coupling_center: Vec3,
    },
    /// Rotation model `<x>^{-p} [[cos t, sin t], [sin t, -cos t]]` with `t`
    /// a compactly supported bump angle. Its gap closes at infinity.
    Rotation {
        decay: f64,
        angle_amplitude: f64,
        angle_radius: f64,
    },
    /// `lambda_+ = |x|^2 / 2`, `lambda_- = |x|^2 / 2 - 2`. Oracle tests only.
    SyntheticQuadratic,
    /// `V = diag(rho0 + rho, rho0 - rho)` everywhere.
    ConstantDiagonal { rho0: f64, rho: f64 },
    /// `rho = 1`, Gaussian `omega` of non-compact support; `declared_radius`
    /// is the (wrong) claimed support, so the audit flags the coupling clause.
    GaussianCoupling {
        coupling_amplitude: f64,
        coupling_width: f64,
        declared_radius: f64,
    },
}

/// Eigenvalues and half-angle-gauge eigenvectors at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub chi_plus: [f64; 2],
    pub chi_minus: [f64; 2],
    pub gap: f64,
    /// Gauge angle `atan2(omega, rho)`.
    pub angle: f64,
}

impl EigenData {
    pub fn lambda(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Plus => self.lambda_plus,
            Mode::Minus => self.lambda_minus,
        }
    }

    pub fn chi(&self, mode: Mode) -> [f64; 2] {
        match mode {
            Mode::Plus => self.chi_plus,
            Mode::Minus => self.chi_minus,
        }
    }
}

/// Jets of the three scalar functions defining `V` at one point.
#[derive(Debug, Clone, Copy)]
pub struct Components {
    pub rho0: Jet,
    pub rho: Jet,
    pub omega: Jet,
}

impl Components {
    fn gap_sq(&self) -> f64 {
        self.rho.value * self.rho.value + self.omega.value * self.omega.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPotential {
    pub kind: PotentialKind,
    pub dim: usize,
    /// Configured floor on `rho^2 + omega^2`.
    pub delta0: f64,
}

impl MatrixPotential {
    pub fn new(kind: PotentialKind, dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(WpError::Config(format!("dimension {dim} not in 1..=3")));
        }
        let ok = match &kind {
            PotentialKind::BumpCoupling {
                decay,
                coupling_radius,
                ..
            } => *decay > 0.0 && *coupling_radius > 0.0,
            PotentialKind::Rotation {
                decay,
                angle_radius,
                ..
            } => *decay > 0.0 && *angle_radius > 0.0,
            PotentialKind::GaussianCoupling { coupling_width, .. } => *coupling_width > 0.0,
            _ => true,
        };
        if !ok {
            return Err(WpError::Config(format!(
                "non-positive decay or radius in {kind:?}"
            )));
        }
        Ok(MatrixPotential {
            kind,
            dim,
            delta0: DEFAULT_DELTA0,
        })
    }

    /// Bump-coupling model with the default parameters used by the experiments.
    pub fn bump_coupling(dim: usize) -> Self {
        MatrixPotential::new(
            PotentialKind::BumpCoupling {
                rho0_amplitude: 0.5,
                decay: 2.0,
                coupling_amplitude: 0.6,
                coupling_radius: 1.5,
                coupling_center: ZERO3,
            },
            dim,
        )
        .expect("default parameters are valid")
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    pub fn components(&self, x: &[f64]) -> Components {
        let p = to_vec3(&x[..self.dim]);
        self.components3(&p)
    }

    pub(crate) fn components3(&self, x: &Vec3) -> Components {
        let d = self.dim;
        match &self.kind {
            PotentialKind::BumpCoupling {
                rho0_amplitude,
                decay,
                coupling_amplitude,
                coupling_radius,
                coupling_center,
            } => {
                let b = bracket_power(x, *decay, d);
                Components {
                    rho0: Jet {
                        value: rho0_amplitude * b.value,
                        grad: crate::linalg::scale(*rho0_amplitude, &b.grad),
                        hess: mat_scale(*rho0_amplitude, &b.hess),
                    },
                    rho: Jet::constant(1.0),
                    omega: bump(x, *coupling_amplitude, *coupling_radius, coupling_center, d),
                }
            }
            PotentialKind::Rotation {
                decay,
                angle_amplitude,
                angle_radius,
            } => {
                let f = bracket_power(x, *decay, d);
                let theta = bump(x, *angle_amplitude, *angle_radius, &ZERO3, d);
                Components {
                    rho0: Jet::constant(0.0),
                    rho: f.mul(&theta.cos()),
                    omega: f.mul(&theta.sin()),
                }
            }
            PotentialKind::SyntheticQuadratic => {
                let q = scaled_square(x, &ZERO3, 2.0, d);
                Components {
                    rho0: q.add(&Jet::constant(-1.0)),
                    rho: Jet::constant(1.0),
                    omega: Jet::constant(0.0),
                }
            }
            PotentialKind::ConstantDiagonal { rho0, rho } => Components {
                rho0: Jet::constant(*rho0),
                rho: Jet::constant(*rho),
                omega: Jet::constant(0.0),
            },
            PotentialKind::GaussianCoupling {
                coupling_amplitude,
                coupling_width,
                ..
            } => Components {
                rho0: Jet::constant(0.0),
                rho: Jet::constant(1.0),
                omega: gaussian(x, *coupling_amplitude, *coupling_width, d),
            },
        }
    }

    /// `V(x)` as a real symmetric matrix.
    pub fn eval_v(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let c = self.components(x);
        let (r0, r, w) = (c.rho0.value, c.rho.value, c.omega.value);
        [[r0 + r, w], [w, r0 - r]]
    }

    /// Limit of `V` at infinity, when it exists.
    pub fn v_infinity(&self) -> Option<[[f64; 2]; 2]> {
        match &self.kind {
            PotentialKind::BumpCoupling { .. } | PotentialKind::GaussianCoupling { .. } => {
                Some([[1.0, 0.0], [0.0, -1.0]])
            }
            PotentialKind::Rotation { .. } => Some([[0.0, 0.0], [0.0, 0.0]]),
            PotentialKind::SyntheticQuadratic => None,
            PotentialKind::ConstantDiagonal { rho0, rho } => {
                Some([[rho0 + rho, 0.0], [0.0, rho0 - rho]])
            }
        }
    }

    /// `lim_{|x| -> inf} lambda_mode(x)` when `V` has a limit.
    pub fn lambda_infinity(&self, mode: Mode) -> Option<f64> {
        self.v_infinity().map(|m| {
            let mean = 0.5 * (m[0][0] + m[1][1]);
            let half = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
            mean + mode.sign() * half
        })
    }

    /// Long-range decay rate `p`; zero when the model has none.
    pub fn decay_exponent(&self) -> f64 {
        match &self.kind {
            PotentialKind::BumpCoupling { decay, .. } | PotentialKind::Rotation { decay, .. } => {
                *decay
            }
            PotentialKind::GaussianCoupling { .. } => 2.0,
            PotentialKind::ConstantDiagonal { .. } => 1.0,
            PotentialKind::SyntheticQuadratic => 0.0,
        }
    }

    /// Ball `(center, radius)` outside of which `V` is claimed diagonal.
    pub fn coupling_support(&self) -> (Vec3, f64) {
        match &self.kind {
            PotentialKind::BumpCoupling {
                coupling_radius,
                coupling_center,
                ..
            } => (*coupling_center, *coupling_radius),
            PotentialKind::Rotation { angle_radius, .. } => (ZERO3, *angle_radius),
            PotentialKind::GaussianCoupling {
                declared_radius, ..
            } => (ZERO3, *declared_radius),
            PotentialKind::SyntheticQuadratic | PotentialKind::ConstantDiagonal { .. } => {
                (ZERO3, 0.0)
            }
        }
    }

    fn check_gap(&self, x: &Vec3, c: &Components) -> Result<f64> {
        let gap_sq = c.gap_sq();
        if gap_sq <= self.delta0 {
            return Err(WpError::GapViolation {
                point: x[..self.dim].to_vec(),
                gap_sq,
                delta0: self.delta0,
            });
        }
        Ok(gap_sq)
    }

    pub fn gap_check(&self, x: &[f64]) -> Result<()> {
        let p = to_vec3(&x[..self.dim]);
        self.check_gap(&p, &self.components3(&p)).map(|_| ())
    }

    pub fn eigen(&self, x: &[f64]) -> Result<EigenData> {
        self.eigen3(&to_vec3(&x[..self.dim]))
    }

    pub(crate) fn eigen3(&self, x: &Vec3) -> Result<EigenData> {
        let c = self.components3(x);
        let gap_sq = self.check_gap(x, &c)?;
        let m = gap_sq.sqrt();
        let angle = c.omega.value.atan2(c.rho.value);
        let (s, co) = (0.5 * angle).sin_cos();
        Ok(EigenData {
            lambda_plus: c.rho0.value + m,
            lambda_minus: c.rho0.value - m,
            chi_plus: [co, s],
            chi_minus: [-s, co],
            gap: 2.0 * m,
            angle,
        })
    }

    /// Eigen-data with the gauge angle unwrapped to the branch nearest `reference`,
    /// for continuous tracking along a path.
    pub fn eigen_tracked(&self, x: &[f64], reference: f64) -> Result<EigenData> {
        let mut e = self.eigen(x)?;
        let two_pi = 2.0 * std::f64::consts::PI;
        let shift = ((reference - e.angle) / two_pi).round() * two_pi;
        if shift != 0.0 {
            e.angle += shift;
            let (s, co) = (0.5 * e.angle).sin_cos();
            e.chi_plus = [co, s];
            e.chi_minus = [-s, co];
        }
        Ok(e)
    }

    /// Jet of `lambda_mode`.
    pub(crate) fn lambda_jet3(&self, x: &Vec3, mode: Mode) -> Result<Jet> {
        let c = self.components3(x);
        let gap_sq = self.check_gap(x, &c)?;
        let m = gap_sq.sqrt();
        // m = sqrt(rho^2 + omega^2): grad m = (rho grad rho + omega grad omega) / m
        let mut grad_m = ZERO3;
        for i in 0..MAX_DIM {
            grad_m[i] = (c.rho.value * c.rho.grad[i] + c.omega.value * c.omega.grad[i]) / m;
        }
        let mut hess_m = mat_add_scaled(&mat_scale(c.rho.value, &c.rho.hess), c.omega.value, &c.omega.hess);
        hess_m = mat_add_scaled(&hess_m, 1.0, &outer(&c.rho.grad, &c.rho.grad));
        hess_m = mat_add_scaled(&hess_m, 1.0, &outer(&c.omega.grad, &c.omega.grad));
        hess_m = mat_add_scaled(&hess_m, -1.0, &outer(&grad_m, &grad_m));
        hess_m = mat_scale(1.0 / m, &hess_m);
        let s = mode.sign();
        Ok(Jet {
            value: c.rho0.value + s * m,
            grad: crate::linalg::add_scaled(&c.rho0.grad, s, &grad_m),
            hess: mat_add_scaled(&c.rho0.hess, s, &hess_m),
        })
    }

    pub fn lambda(&self, x: &[f64], mode: Mode) -> Result<f64> {
        Ok(self.eigen(x)?.lambda(mode))
    }

    pub fn grad_lambda(&self, x: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let j = self.lambda_jet3(&to_vec3(&x[..self.dim]), mode)?;
        Ok(j.grad[..self.dim].to_vec())
    }

    pub fn hessian_lambda(&self, x: &[f64], mode: Mode) -> Result<Vec<Vec<f64>>> {
        let j = self.lambda_jet3(&to_vec3(&x[..self.dim]), mode)?;
        Ok(j.hess[..self.dim]
            .iter()
            .map(|row| row[..self.dim].to_vec())
            .collect())
    }

    /// Gradient of the gauge angle `atan2(omega, rho)`.
    pub(crate) fn angle_gradient3(&self, x: &Vec3) -> Result<Vec3> {
        let c = self.components3(x);
        let gap_sq = self.check_gap(x, &c)?;
        let mut g = ZERO3;
        for i in 0..MAX_DIM {
            g[i] = (c.rho.value * c.omega.grad[i] - c.omega.value * c.rho.grad[i]) / gap_sq;
        }
        Ok(g)
    }

    /// Differential of `chi_mode`: row `j` is `d chi_mode / d x_j`.
    ///
    /// In the half-angle gauge `d chi_+ = (grad a / 2) chi_-` and
    /// `d chi_- = -(grad a / 2) chi_+`.
    pub fn d_chi(&self, x: &[f64], mode: Mode) -> Result<Vec<[f64; 2]>> {
        let p = to_vec3(&x[..self.dim]);
        let e = self.eigen3(&p)?;
        let g = self.angle_gradient3(&p)?;
        let (partner, sign) = match mode {
            Mode::Plus => (e.chi_minus, 1.0),
            Mode::Minus => (e.chi_plus, -1.0),
        };
        Ok((0..self.dim)
            .map(|j| {
                let h = sign * 0.5 * g[j];
                [h * partner[0], h * partner[1]]
            })
            .collect())
    }

    /// Operator norm of the real symmetric `V(x) - V_inf`.
    fn deviation_norm(&self, x: &Vec3, v_inf: &[[f64; 2]; 2]) -> f64 {
        let c = self.components3(x);
        let m00 = c.rho0.value + c.rho.value - v_inf[0][0];
        let m11 = c.rho0.value - c.rho.value - v_inf[1][1];
        let m01 = c.omega.value - v_inf[0][1];
        let mean = 0.5 * (m00 + m11);
        let half = (0.25 * (m00 - m11).powi(2) + m01 * m01).sqrt();
        mean.abs() + half
    }

    /// Operator norm of the gradient of `V`, summed over axes.
    fn gradient_norm(&self, x: &Vec3) -> f64 {
        let c = self.components3(x);
        (0..self.dim)
            .map(|i| {
                let mean = c.rho0.grad[i];
                let half = (c.rho.grad[i].powi(2) + c.omega.grad[i].powi(2)).sqrt();
                mean.abs() + half
            })
            .sum()
    }
}

/// Outcome of sampling the long-range, gap, and compact-coupling clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    pub min_gap_sq: f64,
    pub inner_min_gap_sq: f64,
    pub outer_min_gap_sq: f64,
    /// `max <x>^p ||V(x) - V_inf||`.
    pub max_weighted_deviation: f64,
    pub inner_max_weighted_deviation: f64,
    pub outer_max_weighted_deviation: f64,
    /// `max <x>^{p+1} ||grad V(x)||`.
    pub max_weighted_gradient: f64,
    pub max_coupling_outside_support: f64,
    pub gap_ok: bool,
    pub long_range_ok: bool,
    pub diagonal_outside_support_ok: bool,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn radical_inverse(mut n: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while n > 0 {
        out += (n % base) as f64 * inv;
        n /= base;
        inv /= base as f64;
    }
    out
}

/// Samples the box `[-half_width, half_width]^d` with a Halton sequence and
/// checks every clause of the potential assumptions. Report-only: violated
/// clauses are listed, never raised.
///
/// The gap clause asks for a uniform positive floor; besides `min >= delta0`
/// it also fails when the outer shell (`|x| > half_width / 2`) has a floor
/// less than half the inner one, which catches gaps closing at infinity.
pub fn assumption_audit(
    model: &MatrixPotential,
    half_width: f64,
    n_samples: usize,
    delta0: f64,
) -> AuditReport {
    const BASES: [usize; 3] = [2, 3, 5];
    let d = model.dim;
    let p = model.decay_exponent();
    let v_inf = model.v_infinity();
    let (k_center, k_radius) = model.coupling_support();

    let mut points: Vec<Vec3> = (1..=n_samples)
        .map(|n| {
            let mut x = ZERO3;
            for (i, xi) in x.iter_mut().enumerate().take(d) {
                *xi = half_width * (2.0 * radical_inverse(n, BASES[i]) - 1.0);
            }
            x
        })
        .collect();
    // box corners and face centres so the outer shell is always represented
    for i in 0..d {
        for s in [-1.0, 1.0] {
            let mut x = ZERO3;
            x[i] = s * half_width;
            points.push(x);
        }
    }

    let mut rep = AuditReport {
        samples: points.len(),
        min_gap_sq: f64::INFINITY,
        inner_min_gap_sq: f64::INFINITY,
        outer_min_gap_sq: f64::INFINITY,
        max_weighted_deviation: 0.0,
        inner_max_weighted_deviation: 0.0,
        outer_max_weighted_deviation: 0.0,
        max_weighted_gradient: 0.0,
        max_coupling_outside_support: 0.0,
        gap_ok: true,
        long_range_ok: true,
        diagonal_outside_support_ok: true,
        violations: Vec::new(),
    };

    for x in &points {
        let c = model.components3(x);
        let r2 = dot(x, x);
        let r = r2.sqrt();
        let bracket = (1.0 + r2).sqrt();
        let outer_shell = r > 0.5 * half_width;
        let g = c.gap_sq();
        rep.min_gap_sq = rep.min_gap_sq.min(g);
        if outer_shell {
            rep.outer_min_gap_sq = rep.outer_min_gap_sq.min(g);
        } else {
            rep.inner_min_gap_sq = rep.inner_min_gap_sq.min(g);
        }
        if let Some(v) = &v_inf {
            let w = bracket.powf(p) * model.deviation_norm(x, v);
            rep.max_weighted_deviation = rep.max_weighted_deviation.max(w);
            if outer_shell {
                rep.outer_max_weighted_deviation = rep.outer_max_weighted_deviation.max(w);
            } else {
                rep.inner_max_weighted_deviation = rep.inner_max_weighted_deviation.max(w);
            }
        }
        let wg = bracket.powf(p + 1.0) * model.gradient_norm(x);
        rep.max_weighted_gradient = rep.max_weighted_gradient.max(wg);
        let dk = crate::linalg::norm(&crate::linalg::sub(x, &k_center));
        if dk > k_radius {
            rep.max_coupling_outside_support = rep.max_coupling_outside_support.max(c.omega.value.abs());
        }
    }

    if rep.min_gap_sq < delta0 {
        rep.gap_ok = false;
        rep.violations.push(format!(
            "gap: min(rho^2 + omega^2) = {:.3e} < delta0 = {delta0:.3e}",
            rep.min_gap_sq
        ));
    } else if rep.outer_min_gap_sq < 0.5 * rep.inner_min_gap_sq {
        rep.gap_ok = false;
        rep.violations.push(format!(
            "gap: floor decays outward ({:.3e} in outer shell vs {:.3e} inside)",
            rep.outer_min_gap_sq, rep.inner_min_gap_sq
        ));
    }

    match v_inf {
        None => {
            rep.long_range_ok = false;
            rep.violations
                .push("long range: V has no limit at infinity".to_string());
        }
        Some(_) => {
            let floor = 1e-12;
            if p <= 0.0
                || rep.outer_max_weighted_deviation > 2.0 * rep.inner_max_weighted_deviation.max(floor)
            {
                rep.long_range_ok = false;
                rep.violations.push(format!(
                    "long range: <x>^p ||V - V_inf|| grows outward ({:.3e} outer vs {:.3e} inner)",
                    rep.outer_max_weighted_deviation, rep.inner_max_weighted_deviation
                ));
            }
        }
    }

    if rep.max_coupling_outside_support > 1e-12 {
        rep.diagonal_outside_support_ok = false;
        rep.violations.push(format!(
            "diagonal outside K: |omega| reaches {:.3e} beyond radius {k_radius}",
            rep.max_coupling_outside_support
        ));
    }
    rep
}
