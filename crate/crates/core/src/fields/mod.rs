//! Grids, discrete wavefunctions, semiclassical norms, wave-packet data and
//! the polarized ansatz.

mod grid;
mod packet;
mod snapshot;
mod spectral;

use num_complex::Complex64;

pub use grid::{max_spacing, signed_index, GridSpec, MIN_POINTS};
pub use packet::{
    build_ansatz, build_wavepacket, mode_project, polarize, ansatz_from_state, AnsatzEvaluator,
    Envelope, ModeFrame, PacketParams,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_MAGIC};
pub use spectral::Spectral;

use crate::error::{Result, WpError};
use crate::linalg::MAX_DIM;

/// Scalar or two-component complex samples on a grid. Components are stored
/// as contiguous blocks, each in the grid's row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub components: usize,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &GridSpec, components: usize) -> Self {
        ComplexField {
            grid: grid.clone(),
            components,
            data: vec![Complex64::new(0.0, 0.0); components * grid.len()],
        }
    }

    pub fn from_data(grid: &GridSpec, components: usize, data: Vec<Complex64>) -> Result<Self> {
        if !(1..=2).contains(&components) {
            return Err(WpError::Field(format!("{components} components; expected 1 or 2")));
        }
        if data.len() != components * grid.len() {
            return Err(WpError::Field(format!(
                "{} samples for {components} component(s) on {} nodes",
                data.len(),
                grid.len()
            )));
        }
        let f = ComplexField {
            grid: grid.clone(),
            components,
            data,
        };
        f.check_finite()?;
        Ok(f)
    }

    /// Scalar field sampled from `f(x)` at every node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&crate::linalg::Vec3) -> Complex64) -> Self {
        let data = grid.node_coords().iter().map(f).collect();
        ComplexField {
            grid: grid.clone(),
            components: 1,
            data,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(WpError::Field(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &ComplexField) {
        assert_eq!(self.data.len(), other.data.len(), "field shapes differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn difference(&self, other: &ComplexField) -> ComplexField {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// `L^2` inner product `<self, other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        assert_eq!(self.data.len(), other.data.len(), "field shapes differ");
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.cell_volume()
    }

    /// `||f||^2_{L^2}`, summed over components.
    pub fn mass(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// Mass on nodes within `cells` cells of the boundary.
    pub fn boundary_mass(&self, cells: usize) -> f64 {
        let mask = self.grid.boundary_mask(cells);
        let n = self.grid.len();
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[i % n])
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * self.grid.cell_volume()
    }
}

/// Exponent of a Lebesgue norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lebesgue {
    L2,
    L4,
    Infinity,
}

impl TryFrom<f64> for Lebesgue {
    type Error = WpError;

    fn try_from(q: f64) -> Result<Self> {
        if q == 2.0 {
            Ok(Lebesgue::L2)
        } else if q == 4.0 {
            Ok(Lebesgue::L4)
        } else if q == f64::INFINITY {
            Ok(Lebesgue::Infinity)
        } else {
            Err(WpError::Config(format!("unsupported Lebesgue exponent {q}")))
        }
    }
}

/// Quadrature `L^q` norm of the pointwise `C^n` modulus.
pub fn lebesgue_norm(field: &ComplexField, q: Lebesgue) -> f64 {
    let n = field.grid.len();
    let pointwise = (0..n).map(|i| {
        (0..field.components)
            .map(|c| field.data[c * n + i].norm_sqr())
            .sum::<f64>()
    });
    match q {
        Lebesgue::L2 => field.l2_norm(),
        Lebesgue::L4 => (pointwise.map(|m| m * m).sum::<f64>() * field.grid.cell_volume()).powf(0.25),
        Lebesgue::Infinity => pointwise.fold(0.0, f64::max).sqrt(),
    }
}

/// Spectral weight `sum_{|alpha| <= p} eps^{2|alpha|} k^{2 alpha}`, each
/// multi-index counted once.
fn sobolev_weight(k: &[f64; MAX_DIM], dim: usize, eps: f64, p: usize) -> f64 {
    let k2: Vec<f64> = (0..dim).map(|a| k[a] * k[a]).collect();
    let e2 = eps * eps;
    let mut w = 1.0;
    if p >= 1 {
        w += e2 * k2.iter().sum::<f64>();
    }
    if p >= 2 {
        let mut second = 0.0;
        for a in 0..dim {
            for b in a..dim {
                second += k2[a] * k2[b];
            }
        }
        w += e2 * e2 * second;
    }
    w
}

/// `(sum_{|alpha| <= p} ||eps^{|alpha|} d^alpha f||^2)^{1/2}`, summed over components.
pub fn h_eps_norm(field: &ComplexField, eps: f64, p: usize) -> Result<f64> {
    h_eps_norm_with(&Spectral::new(&field.grid), field, eps, p)
}

pub fn h_eps_norm_with(spectral: &Spectral, field: &ComplexField, eps: f64, p: usize) -> Result<f64> {
    if p > 2 {
        return Err(WpError::Config(format!("H_eps^p norm supports p <= 2, got {p}")));
    }
    if p == 0 {
        return Ok(field.l2_norm());
    }
    let g = &field.grid;
    let ks: Vec<Vec<f64>> = (0..MAX_DIM)
        .map(|a| if a < g.dim { g.wavenumbers(a) } else { vec![0.0] })
        .collect();
    let mut weights = Vec::with_capacity(g.len());
    for &k0 in &ks[0] {
        for &k1 in &ks[1] {
            for &k2 in &ks[2] {
                weights.push(sobolev_weight(&[k0, k1, k2], g.dim, eps, p));
            }
        }
    }
    let mut total = 0.0;
    for c in 0..field.components {
        let mut buf = field.component(c).to_vec();
        spectral.forward(&mut buf);
        total += buf
            .iter()
            .zip(&weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>();
    }
    Ok((total * g.cell_volume() / g.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian_1d(points: usize, l: f64) -> ComplexField {
        let g = GridSpec::cubic(1, l, points).unwrap();
        ComplexField::from_fn(&g, |x| Complex64::new(PI.powf(-0.25) * (-0.5 * x[0] * x[0]).exp(), 0.0))
    }

    #[test]
    fn gaussian_norms() {
        let f = gaussian_1d(256, 12.0);
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
        let l4 = lebesgue_norm(&f, Lebesgue::L4);
        assert!((l4.powi(4) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((lebesgue_norm(&f, Lebesgue::Infinity) - PI.powf(-0.25)).abs() < 1e-12);
        assert!((lebesgue_norm(&f, Lebesgue::L2) - h_eps_norm(&f, 0.3, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn flat_field_l4() {
        let g = GridSpec::cubic(2, 1.0, 16).unwrap();
        let f = ComplexField::from_fn(&g, |_| Complex64::new(0.0, 2.0));
        assert!((lebesgue_norm(&f, Lebesgue::L4) - 2.0 * 4f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn h_eps_second_order_counts_each_index_once() {
        // f = e^{i(2x + 3y)} on [-pi, pi)^2: |alpha| = 2 terms are 16 + 36 + 81
        let g = GridSpec::cubic(2, PI, 16).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * x[0] + 3.0 * x[1]));
        let eps: f64 = 0.1;
        let area = 4.0 * PI * PI;
        let expect = area * (1.0 + eps * eps * 13.0 + eps.powi(4) * (16.0 + 36.0 + 81.0));
        let got = h_eps_norm(&f, eps, 2).unwrap();
        assert!((got * got - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn lebesgue_exponent_parsing() {
        assert_eq!(Lebesgue::try_from(4.0).unwrap(), Lebesgue::L4);
        assert!(Lebesgue::try_from(3.0).is_err());
    }

    #[test]
    fn from_data_validates() {
        let g = GridSpec::cubic(1, 1.0, 16).unwrap();
        assert!(ComplexField::from_data(&g, 2, vec![Complex64::new(0.0, 0.0); 16]).is_err());
        let mut bad = vec![Complex64::new(0.0, 0.0); 16];
        bad[3].re = f64::NAN;
        assert!(ComplexField::from_data(&g, 1, bad).is_err());
    }
}
