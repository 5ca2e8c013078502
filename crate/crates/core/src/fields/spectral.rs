use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::GridSpec;
use crate::linalg::MAX_DIM;

/// Axis-by-axis FFTs for one grid. The forward transform is unnormalized,
/// the inverse divides by the point count.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    k2: Arc<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = (0..grid.dim)
            .map(|a| planner.plan_fft_forward(grid.points[a]))
            .collect();
        let inverse = (0..grid.dim)
            .map(|a| planner.plan_fft_inverse(grid.points[a]))
            .collect();
        Spectral {
            grid: grid.clone(),
            forward,
            inverse,
            k2: Arc::new(grid.k_squared()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `|k|^2` in storage order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.grid.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let g = &self.grid;
        assert_eq!(data.len(), g.len(), "buffer does not match grid");
        for (a, plan) in plans.iter().enumerate() {
            let n = g.points[a];
            let inner: usize = g.points[a + 1..].iter().product();
            if inner == 1 {
                plan.process(data);
                continue;
            }
            let outer: usize = g.points[..a].iter().product();
            let block = n * inner;
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            for o in 0..outer {
                let chunk = &mut data[o * block..(o + 1) * block];
                for j in 0..n {
                    for i in 0..inner {
                        lines[i * n + j] = chunk[j * inner + i];
                    }
                }
                plan.process(&mut lines);
                for j in 0..n {
                    for i in 0..inner {
                        chunk[j * inner + i] = lines[i * n + j];
                    }
                }
            }
        }
    }

    /// Multiplies Fourier coefficients by `(i k)^order` along every axis.
    /// Odd orders drop the unpaired Nyquist coefficient.
    pub fn apply_derivative(&self, spectrum: &mut [Complex64], order: [usize; MAX_DIM]) {
        let g = &self.grid;
        let factors: Vec<Vec<Complex64>> = (0..MAX_DIM)
            .map(|a| {
                if a >= g.dim || order[a] == 0 {
                    return vec![Complex64::new(1.0, 0.0); g.points[a]];
                }
                let n = g.points[a];
                g.wavenumbers(a)
                    .into_iter()
                    .enumerate()
                    .map(|(j, k)| {
                        if j == n / 2 && order[a] % 2 == 1 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(0.0, k).powu(order[a] as u32)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut idx = 0;
        for f0 in &factors[0] {
            for f1 in &factors[1] {
                let f01 = f0 * f1;
                for f2 in &factors[2] {
                    spectrum[idx] *= f01 * f2;
                    idx += 1;
                }
            }
        }
    }

    /// `d^order f` of one component by spectral differentiation.
    pub fn derivative(&self, values: &[Complex64], order: [usize; MAX_DIM]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        self.apply_derivative(&mut buf, order);
        self.inverse(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let g = GridSpec::new(2, &[1.0, 3.0], &[16, 32]).unwrap();
        let s = Spectral::new(&g);
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = orig.clone();
        s.forward(&mut buf);
        s.inverse(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn forward_matches_direct_dft_3d() {
        let g = GridSpec::new(3, &[1.0, 1.0, 1.0], &[16, 16, 32]).unwrap();
        let s = Spectral::new(&g);
        let vals: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new(((i * 7) % 13) as f64, ((i * 3) % 5) as f64))
            .collect();
        let mut buf = vals.clone();
        s.forward(&mut buf);
        let target = [3usize, 5, 30];
        let mut direct = Complex64::new(0.0, 0.0);
        for (i, v) in vals.iter().enumerate() {
            let m = g.multi_index(i);
            let phase: f64 = (0..3)
                .map(|a| -2.0 * std::f64::consts::PI * (m[a] * target[a]) as f64 / g.points[a] as f64)
                .sum();
            direct += v * Complex64::from_polar(1.0, phase);
        }
        let flat = target[0] * 512 + target[1] * 32 + target[2];
        assert!((buf[flat] - direct).norm() < 1e-9 * direct.norm().max(1.0));
    }

    #[test]
    fn single_mode_derivatives_are_exact() {
        let g = GridSpec::new(2, &[std::f64::consts::PI, std::f64::consts::PI], &[32, 16]).unwrap();
        let s = Spectral::new(&g);
        let nodes = g.node_coords();
        let f: Vec<Complex64> = nodes
            .iter()
            .map(|x| Complex64::from_polar(1.0, 3.0 * x[0] - 2.0 * x[1]))
            .collect();
        let d = s.derivative(&f, [1, 2, 0]);
        for (v, x) in d.iter().zip(&nodes) {
            let expect = Complex64::new(0.0, 3.0) * Complex64::new(0.0, -2.0).powu(2)
                * Complex64::from_polar(1.0, 3.0 * x[0] - 2.0 * x[1]);
            assert!((v - expect).norm() < 1e-11);
        }
    }
}
