use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::GridSpec;
use super::spectral::Spectral;
use super::ComplexField;
use crate::classical::{PhaseState, TrajectoryRecord};
use crate::error::{Result, WpError};
use crate::linalg::{norm, to_vec3, Vec3, MAX_DIM};
use crate::potential::{MatrixPotential, Mode};

/// Relative profile mass allowed to fall outside the x-box or beyond the
/// x-grid's band limit during resampling.
const INTERPOLATION_TOLERANCE: f64 = 1e-10;
const ROW_BLOCK: usize = 256;

/// Envelope profile `a(y)` of a wave packet.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    /// `pi^{-d/4} w^{-d/2} exp(-|y|^2 / 2w^2)`, unit `L^2` norm.
    Gaussian { width: f64 },
    /// Linear combination of envelopes sharing the packet's phase-space centre.
    Sum(Vec<(Complex64, Envelope)>),
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope::Gaussian { width: 1.0 }
    }
}

impl Envelope {
    pub fn eval(&self, y: &Vec3, dim: usize) -> Complex64 {
        match self {
            Envelope::Gaussian { width } => {
                let r2: f64 = y[..dim].iter().map(|v| v * v).sum();
                let norm = PI.powf(-0.25 * dim as f64) * width.powf(-0.5 * dim as f64);
                Complex64::new(norm * (-0.5 * r2 / (width * width)).exp(), 0.0)
            }
            Envelope::Sum(terms) => terms.iter().map(|(c, e)| c * e.eval(y, dim)).sum(),
        }
    }

    pub fn min_width(&self) -> f64 {
        match self {
            Envelope::Gaussian { width } => *width,
            Envelope::Sum(terms) => terms.iter().map(|(_, e)| e.min_width()).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_width(&self) -> f64 {
        match self {
            Envelope::Gaussian { width } => *width,
            Envelope::Sum(terms) => terms.iter().map(|(_, e)| e.max_width()).fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Envelope::Gaussian { width } if !(*width > 0.0) => {
                Err(WpError::Config(format!("envelope width {width} must be positive")))
            }
            Envelope::Gaussian { .. } => Ok(()),
            Envelope::Sum(terms) if terms.is_empty() => Err(WpError::Config("empty envelope sum".into())),
            Envelope::Sum(terms) => terms.iter().try_for_each(|(_, e)| e.validate()),
        }
    }

    /// Samples the envelope on a grid in the `y` variable.
    pub fn sample(&self, grid: &GridSpec) -> ComplexField {
        ComplexField::from_fn(grid, |y| self.eval(y, grid.dim))
    }
}

/// One semiclassical wave packet `amp eps^{-d/4} e^{i xi0.(x - x0)/eps} a((x - x0)/sqrt(eps))`
/// polarized along `chi_mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketParams {
    pub position: Vec3,
    pub momentum: Vec3,
    pub envelope: Envelope,
    pub mode: Mode,
    pub amplitude: Complex64,
}

impl PacketParams {
    pub fn new(x0: &[f64], xi0: &[f64], mode: Mode) -> Self {
        PacketParams {
            position: to_vec3(x0),
            momentum: to_vec3(xi0),
            envelope: Envelope::default(),
            mode,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn with_amplitude(mut self, amplitude: Complex64) -> Self {
        self.amplitude = amplitude;
        self
    }
}

fn packet_gates(grid: &GridSpec, eps: f64, centre: &Vec3, momentum: &Vec3, envelope: &Envelope) -> Result<()> {
    grid.resolution_check(eps, norm(momentum))?;
    let width = eps.sqrt() * envelope.min_width();
    let dx = grid.max_spacing();
    if width < 4.0 * dx {
        return Err(WpError::Resolution(format!(
            "packet width sqrt(eps) w = {width:.4e} < 4 dx = {:.4e}",
            4.0 * dx
        )));
    }
    let reach = 6.0 * eps.sqrt() * envelope.max_width();
    if !grid.contains(centre, reach) {
        return Err(WpError::Boundary(format!(
            "centre {:?} is closer than 6 sqrt(eps) w = {reach:.4e} to the edge of the box with half-widths {:?}",
            &centre[..grid.dim],
            &grid.half_width[..grid.dim]
        )));
    }
    Ok(())
}

/// Samples the packet on the grid.
pub fn build_wavepacket(params: &PacketParams, eps: f64, grid: &GridSpec) -> Result<ComplexField> {
    params.envelope.validate()?;
    packet_gates(grid, eps, &params.position, &params.momentum, &params.envelope)?;
    let d = grid.dim;
    let se = eps.sqrt();
    let pre = params.amplitude * eps.powf(-0.25 * d as f64);
    let f = ComplexField::from_fn(grid, |x| {
        let mut y = [0.0; MAX_DIM];
        let mut phase = 0.0;
        for a in 0..d {
            let dx = x[a] - params.position[a];
            y[a] = dx / se;
            phase += params.momentum[a] * dx;
        }
        pre * Complex64::from_polar(1.0, phase / eps) * params.envelope.eval(&y, d)
    });
    f.check_finite()?;
    Ok(f)
}

/// Resamples profiles from a `y`-grid onto an `x`-grid as
/// `amp eps^{-d/4} u((x - x_t)/sqrt(eps)) e^{i(S_t + xi_t.(x - x_t))/eps}`
/// by trigonometric interpolation, separably along each axis.
#[derive(Debug, Clone)]
pub struct AnsatzEvaluator {
    x_grid: GridSpec,
    y_grid: GridSpec,
    y_spectral: Spectral,
    x_nodes: Vec<Vec<f64>>,
}

impl AnsatzEvaluator {
    pub fn new(x_grid: &GridSpec, y_grid: &GridSpec) -> Result<Self> {
        if x_grid.dim != y_grid.dim {
            return Err(WpError::Config(format!(
                "profile grid has dimension {} but the field grid has {}",
                y_grid.dim, x_grid.dim
            )));
        }
        Ok(AnsatzEvaluator {
            x_grid: x_grid.clone(),
            y_grid: y_grid.clone(),
            y_spectral: Spectral::new(y_grid),
            x_nodes: (0..x_grid.dim).map(|a| x_grid.axis_nodes(a)).collect(),
        })
    }

    pub fn x_grid(&self) -> &GridSpec {
        &self.x_grid
    }

    pub fn eval(&self, u: &ComplexField, state: &PhaseState, eps: f64, amplitude: Complex64) -> Result<ComplexField> {
        let xg = &self.x_grid;
        let yg = &self.y_grid;
        if u.grid != *yg || u.components != 1 {
            return Err(WpError::Config("profile does not live on the evaluator's y-grid".into()));
        }
        xg.resolution_check(eps, norm(&state.xi))?;
        let d = xg.dim;
        let se = eps.sqrt();

        // profile mass that would land outside the x-box
        let total = u.mass();
        if total > 0.0 {
            let ynodes = yg.node_coords();
            let cut: f64 = u.data.iter().zip(&ynodes).filter(|(_, y)| {
                (0..d).any(|a| {
                    let x = state.x[a] + se * y[a];
                    x < -xg.half_width[a] || x >= xg.half_width[a]
                })
            })
            .map(|(v, _)| v.norm_sqr())
            .sum::<f64>()
                * yg.cell_volume();
            if cut > INTERPOLATION_TOLERANCE * total {
                return Err(WpError::Interpolation(format!(
                    "profile mass fraction {:.3e} falls outside the x-box at centre {:?}",
                    cut / total,
                    &state.x[..d]
                )));
            }
        }

        let mut spec = u.data.clone();
        self.y_spectral.forward(&mut spec);

        // y-frequencies the x-grid cannot carry on top of the carrier wave
        let spec_total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        if spec_total > 0.0 {
            let limits: Vec<f64> = (0..d)
                .map(|a| (PI / xg.spacing(a) - state.xi[a].abs() / eps) * se)
                .collect();
            let kys: Vec<Vec<f64>> = (0..d).map(|a| yg.wavenumbers(a)).collect();
            let lost: f64 = spec
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let m = yg.multi_index(*i);
                    (0..d).any(|a| kys[a][m[a]].abs() > limits[a])
                })
                .map(|(_, v)| v.norm_sqr())
                .sum();
            if lost > INTERPOLATION_TOLERANCE * spec_total {
                return Err(WpError::Interpolation(format!(
                    "profile spectral mass fraction {:.3e} exceeds the x-grid band limit",
                    lost / spec_total
                )));
            }
        }

        let mut shape = [1usize; MAX_DIM];
        let mut offsets = [0usize; MAX_DIM];
        let mut tensor = spec;
        for a in 0..d {
            let ny = yg.points[a];
            let ly = yg.half_width[a];
            let kappa = PI / ly;
            let nodes = &self.x_nodes[a];
            let lo = nodes.partition_point(|x| (x - state.x[a]) / se < -ly);
            let hi = nodes.partition_point(|x| (x - state.x[a]) / se < ly);
            offsets[a] = lo;
            let rows = hi - lo;
            let mut dims = shape;
            for (b, dim) in dims.iter_mut().enumerate().take(d) {
                if b > a {
                    *dim = yg.points[b];
                }
            }
            dims[a] = ny;
            let outer: usize = dims[..a].iter().product();
            let inner: usize = dims[a + 1..].iter().product();
            let mut next = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
            for start in (0..rows).step_by(ROW_BLOCK) {
                let block = ROW_BLOCK.min(rows - start);
                let mut e = vec![Complex64::new(0.0, 0.0); block * ny];
                for (r, x) in nodes[lo + start..lo + start + block].iter().enumerate() {
                    let dx = x - state.x[a];
                    let s = dx / se + ly;
                    let carrier = Complex64::from_polar(1.0 / ny as f64, state.xi[a] * dx / eps);
                    let z = Complex64::from_polar(1.0, kappa * s);
                    let row = &mut e[r * ny..(r + 1) * ny];
                    let mut power = Complex64::new(1.0, 0.0);
                    row[0] = carrier;
                    for m in 1..ny / 2 {
                        power *= z;
                        row[m] = carrier * power;
                        row[ny - m] = carrier * power.conj();
                    }
                    let nyq = (ny / 2) as f64 * kappa * s;
                    row[ny / 2] = carrier * nyq.cos();
                }
                let part = contract_axis(&tensor, &dims, a, &e, block);
                for o in 0..outer {
                    let src = &part[o * block * inner..(o + 1) * block * inner];
                    let dst = (o * rows + start) * inner;
                    next[dst..dst + block * inner].copy_from_slice(src);
                }
            }
            tensor = next;
            shape[a] = rows;
        }

        let pre = amplitude * eps.powf(-0.25 * d as f64) * Complex64::from_polar(1.0, state.action / eps);
        let mut out = ComplexField::zeros(xg, 1);
        let strides = xg.strides();
        for i0 in 0..shape[0] {
            for i1 in 0..shape[1] {
                let src = (i0 * shape[1] + i1) * shape[2];
                let dst = (i0 + offsets[0]) * strides[0] + (i1 + offsets[1]) * strides[1] + offsets[2];
                for i2 in 0..shape[2] {
                    out.data[dst + i2] = pre * tensor[src + i2];
                }
            }
        }
        Ok(out)
    }
}

/// Replaces axis `axis` (length `dims[axis]`) of a row-major tensor by `rows`
/// entries: `out[.., p, ..] = sum_m e[p][m] t[.., m, ..]`.
fn contract_axis(t: &[Complex64], dims: &[usize; MAX_DIM], axis: usize, e: &[Complex64], rows: usize) -> Vec<Complex64> {
    let m_len = dims[axis];
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        for p in 0..rows {
            let erow = &e[p * m_len..(p + 1) * m_len];
            let dst = &mut out[(o * rows + p) * inner..(o * rows + p + 1) * inner];
            for (m, coef) in erow.iter().enumerate() {
                let src = &t[(o * m_len + m) * inner..(o * m_len + m + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coef * s;
                }
            }
        }
    }
    out
}

/// The polarized-packet ansatz at time `t` of `record`, from the profile `u` on its y-grid.
pub fn build_ansatz(u: &ComplexField, record: &TrajectoryRecord, eps: f64, t: f64, grid: &GridSpec) -> Result<ComplexField> {
    ansatz_from_state(u, &record.state_at(t), eps, grid)
}

pub fn ansatz_from_state(u: &ComplexField, state: &PhaseState, eps: f64, grid: &GridSpec) -> Result<ComplexField> {
    AnsatzEvaluator::new(grid, &u.grid)?.eval(u, state, eps, Complex64::new(1.0, 0.0))
}

/// Eigenvectors `chi_+`, `chi_-` at every node, with the gauge angle
/// continued from neighbour to neighbour.
#[derive(Debug, Clone)]
pub struct ModeFrame {
    grid: GridSpec,
    chi_plus: Vec<[f64; 2]>,
    chi_minus: Vec<[f64; 2]>,
}

impl ModeFrame {
    pub fn new(model: &MatrixPotential, grid: &GridSpec) -> Result<Self> {
        if model.dim != grid.dim {
            return Err(WpError::Config(format!(
                "model dimension {} does not match grid dimension {}",
                model.dim, grid.dim
            )));
        }
        let nodes = grid.node_coords();
        let strides = grid.strides();
        let mut angles = vec![0.0; nodes.len()];
        let mut chi_plus = Vec::with_capacity(nodes.len());
        let mut chi_minus = Vec::with_capacity(nodes.len());
        for (i, x) in nodes.iter().enumerate() {
            let m = grid.multi_index(i);
            let reference = (0..grid.dim)
                .rev()
                .find(|&a| m[a] > 0)
                .map(|a| angles[i - strides[a]]);
            let e = match reference {
                Some(r) => model.eigen_tracked(&x[..grid.dim], r)?,
                None => model.eigen(&x[..grid.dim])?,
            };
            angles[i] = e.angle;
            chi_plus.push(e.chi_plus);
            chi_minus.push(e.chi_minus);
        }
        Ok(ModeFrame {
            grid: grid.clone(),
            chi_plus,
            chi_minus,
        })
    }

    pub fn chi(&self, mode: Mode) -> &[[f64; 2]] {
        match mode {
            Mode::Plus => &self.chi_plus,
            Mode::Minus => &self.chi_minus,
        }
    }

    /// `f(x) chi_mode(x)` as a two-component field.
    pub fn polarize(&self, scalar: &ComplexField, mode: Mode) -> ComplexField {
        assert!(scalar.components == 1 && scalar.grid == self.grid, "scalar field on a different grid");
        let n = self.grid.len();
        let mut out = ComplexField::zeros(&self.grid, 2);
        for (i, (v, chi)) in scalar.data.iter().zip(self.chi(mode)).enumerate() {
            out.data[i] = v * chi[0];
            out.data[n + i] = v * chi[1];
        }
        out
    }

    /// Pointwise `<field(x), chi_mode(x)>_{C^2}`.
    pub fn project(&self, field: &ComplexField, mode: Mode) -> ComplexField {
        assert!(field.components == 2 && field.grid == self.grid, "two-component field on a different grid");
        let n = self.grid.len();
        let mut out = ComplexField::zeros(&self.grid, 1);
        for (i, chi) in self.chi(mode).iter().enumerate() {
            out.data[i] = field.data[i] * chi[0] + field.data[n + i] * chi[1];
        }
        out
    }
}

pub fn polarize(scalar: &ComplexField, model: &MatrixPotential, mode: Mode) -> Result<ComplexField> {
    Ok(ModeFrame::new(model, &scalar.grid)?.polarize(scalar, mode))
}

pub fn mode_project(field: &ComplexField, model: &MatrixPotential, mode: Mode) -> Result<ComplexField> {
    if field.components != 2 {
        return Err(WpError::Field("mode projection needs a two-component field".into()));
    }
    Ok(ModeFrame::new(model, &field.grid)?.project(field, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::integrate_trajectory;
    use crate::fields::{h_eps_norm, lebesgue_norm, Lebesgue};
    use crate::potential::PotentialKind;

    fn grid_1d(eps: f64, xi: f64) -> GridSpec {
        GridSpec::covering(1, &[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 12.0 * eps.sqrt(), eps, xi).unwrap()
    }

    #[test]
    fn packet_norms_match_gaussian_closed_form() {
        let eps = 2f64.powi(-6);
        let g = grid_1d(eps, 1.0);
        let f = build_wavepacket(&PacketParams::new(&[0.1], &[1.0], Mode::Plus), eps, &g).unwrap();
        assert!((f.l2_norm() - 1.0).abs() < 1e-8);
        let h1 = h_eps_norm(&f, eps, 1).unwrap();
        assert!((h1 - (2.0 + 0.5 * eps).sqrt()).abs() < 1e-6);
        let grad_only = (h1 * h1 - f.mass()).sqrt();
        assert!((grad_only - (1.0 + 0.5 * eps).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn unit_eps_packet_is_plain_envelope() {
        let g = GridSpec::cubic(1, 12.0, 256).unwrap();
        let f = build_wavepacket(&PacketParams::new(&[0.0], &[0.0], Mode::Plus), 1.0, &g).unwrap();
        let a = Envelope::default().sample(&g);
        for (p, q) in f.data.iter().zip(&a.data) {
            assert!((p - q).norm() < 1e-15);
        }
    }

    #[test]
    fn packet_gates() {
        let eps = 2f64.powi(-4);
        let g = GridSpec::cubic(1, 2.0, 64).unwrap();
        let e = build_wavepacket(&PacketParams::new(&[0.0], &[1.0], Mode::Plus), eps, &g).unwrap_err();
        assert!(matches!(e, WpError::Resolution(_)));
        let g = GridSpec::cubic(1, 2.0, 512).unwrap();
        let e = build_wavepacket(&PacketParams::new(&[1.0], &[1.0], Mode::Plus), eps, &g).unwrap_err();
        assert!(matches!(e, WpError::Boundary(_)));
    }

    #[test]
    fn ansatz_at_time_zero_is_the_packet() {
        let model = MatrixPotential::bump_coupling(2);
        let eps = 2f64.powi(-4);
        let rec = integrate_trajectory(&model, &[-0.4, 0.2], &[0.8, -0.3], Mode::Plus, 0.5, 1e-10).unwrap();
        let g = GridSpec::covering(2, &[-1.0, -1.0, 0.0], &[1.0, 1.0, 0.0], 8.0 * eps.sqrt(), eps, 1.0).unwrap();
        let yg = GridSpec::cubic(2, 12.0, 64).unwrap();
        let a = Envelope::default().sample(&yg);
        let phi = build_ansatz(&a, &rec, eps, 0.0, &g).unwrap();
        let packet = build_wavepacket(&PacketParams::new(&[-0.4, 0.2], &[0.8, -0.3], Mode::Plus), eps, &g).unwrap();
        let err = phi.difference(&packet).l2_norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn ansatz_scaling_laws() {
        let model = MatrixPotential::bump_coupling(1);
        let eps = 2f64.powi(-5);
        let rec = integrate_trajectory(&model, &[-0.5], &[1.0], Mode::Plus, 1.0, 1e-10).unwrap();
        let yg = GridSpec::cubic(1, 12.0, 256).unwrap();
        // a non-Gaussian, complex profile
        let u = ComplexField::from_fn(&yg, |y| {
            Complex64::new(1.0, 0.5 * y[0]) * (-0.3 * (y[0] - 0.5).powi(2)).exp()
        });
        let g = grid_1d(eps, 1.3);
        let phi = build_ansatz(&u, &rec, eps, 0.7, &g).unwrap();
        assert!((phi.l2_norm() - u.l2_norm()).abs() < 1e-8);
        let ratio = lebesgue_norm(&phi, Lebesgue::L4) / lebesgue_norm(&u, Lebesgue::L4);
        assert!((ratio / eps.powf(-0.125) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ansatz_refuses_coarse_x_grid() {
        let yg = GridSpec::cubic(1, 12.0, 2048).unwrap();
        let u = ComplexField::from_fn(&yg, |y| Complex64::from_polar((-0.5 * y[0] * y[0]).exp(), 100.0 * y[0]));
        let g = GridSpec::cubic(1, 12.0, 256).unwrap();
        let state = PhaseState { x: [0.0; 3], xi: [0.0; 3], action: 0.0 };
        assert!(matches!(ansatz_from_state(&u, &state, 1.0, &g), Err(WpError::Interpolation(_))));
        let shifted = PhaseState { x: [11.0, 0.0, 0.0], ..state };
        let smooth = Envelope::default().sample(&yg);
        assert!(matches!(ansatz_from_state(&smooth, &shifted, 1.0, &g), Err(WpError::Interpolation(_))));
        assert!(ansatz_from_state(&smooth, &state, 1.0, &g).is_ok());
    }

    #[test]
    fn polarization_round_trips() {
        let model = MatrixPotential::bump_coupling(2);
        let g = GridSpec::cubic(2, 2.0, 32).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new(x[0].cos(), x[1]));
        let frame = ModeFrame::new(&model, &g).unwrap();
        let plus = frame.polarize(&f, Mode::Plus);
        let minus = frame.polarize(&f, Mode::Minus);
        assert!((plus.l2_norm() - f.l2_norm()).abs() < 1e-12);
        assert!(plus.inner(&minus).norm() < 1e-12);
        let back = frame.project(&plus, Mode::Plus);
        assert!(back.difference(&f).l2_norm() < 1e-14);
        assert!(frame.project(&plus, Mode::Minus).l2_norm() < 1e-14);
        let mut mixed = plus.clone();
        mixed.axpy(Complex64::new(0.3, -1.0), &minus);
        let p = frame.project(&mixed, Mode::Plus).mass();
        let m = frame.project(&mixed, Mode::Minus).mass();
        assert!((p + m - mixed.mass()).abs() < 1e-12 * mixed.mass());
    }

    #[test]
    fn diagonal_region_polarizes_into_first_component() {
        let model = MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0: 0.0, rho: 1.0 }, 1).unwrap();
        let g = GridSpec::cubic(1, 1.0, 16).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new(x[0], 1.0));
        let p = polarize(&f, &model, Mode::Plus).unwrap();
        assert_eq!(p.component(0), &f.data[..]);
        assert!(p.component(1).iter().all(|v| v.norm() == 0.0));
    }
}
