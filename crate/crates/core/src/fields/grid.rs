use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Result, WpError};
use crate::linalg::{Vec3, MAX_DIM};

/// Periodic tensor grid on `[-L_1, L_1) x ... x [-L_d, L_d)`.
///
/// Axes beyond `dim` carry one point and zero width, so products over all
/// three axes are always valid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: [f64; MAX_DIM],
    pub points: [usize; MAX_DIM],
}

pub const MIN_POINTS: usize = 16;

impl GridSpec {
    pub fn new(dim: usize, half_width: &[f64], points: &[usize]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(WpError::Config(format!("grid dimension {dim} not in 1..=3")));
        }
        if half_width.len() != dim || points.len() != dim {
            return Err(WpError::Config(format!(
                "grid of dimension {dim} given {} half-widths and {} point counts",
                half_width.len(),
                points.len()
            )));
        }
        let mut g = GridSpec {
            dim,
            half_width: [0.0; MAX_DIM],
            points: [1; MAX_DIM],
        };
        for a in 0..dim {
            if !(half_width[a] > 0.0) || !half_width[a].is_finite() {
                return Err(WpError::Config(format!(
                    "half-width {} on axis {a} must be positive",
                    half_width[a]
                )));
            }
            if points[a] < MIN_POINTS || !points[a].is_power_of_two() {
                return Err(WpError::Config(format!(
                    "point count {} on axis {a} must be a power of two >= {MIN_POINTS}",
                    points[a]
                )));
            }
            g.half_width[a] = half_width[a];
            g.points[a] = points[a];
        }
        Ok(g)
    }

    /// Same half-width and point count on every axis.
    pub fn cubic(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(dim, &vec![half_width; dim], &vec![points; dim])
    }

    /// Smallest power-of-two grid covering `[lo - margin, hi + margin]` on each
    /// axis (symmetrised about the origin) whose spacing passes
    /// [`GridSpec::resolution_check`] for `eps` and `xi_max`.
    pub fn covering(dim: usize, lo: &Vec3, hi: &Vec3, margin: f64, eps: f64, xi_max: f64) -> Result<Self> {
        let dx = max_spacing(eps, xi_max);
        let mut l = vec![0.0; dim];
        let mut n = vec![0; dim];
        for a in 0..dim {
            l[a] = lo[a].abs().max(hi[a].abs()) + margin;
            let needed = (2.0 * l[a] / dx).ceil() as usize;
            n[a] = needed.max(MIN_POINTS).next_power_of_two();
        }
        Self::new(dim, &l, &n)
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.points[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Node coordinates `-L + j dx` along one axis.
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.points[axis])
            .map(|j| -self.half_width[axis] + j as f64 * h)
            .collect()
    }

    /// Angular wavenumbers in FFT order along one axis.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let base = PI / self.half_width[axis];
        (0..n).map(|j| base * signed_index(j, n) as f64).collect()
    }

    /// Row-major strides (axis 0 outermost).
    pub fn strides(&self) -> [usize; MAX_DIM] {
        [self.points[1] * self.points[2], self.points[2], 1]
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let s = self.strides();
        [
            flat / s[0],
            (flat / s[1]) % self.points[1],
            flat % self.points[2],
        ]
    }

    /// Coordinates of every node, in storage order.
    pub fn node_coords(&self) -> Vec<Vec3> {
        let axes: Vec<Vec<f64>> = (0..MAX_DIM)
            .map(|a| if a < self.dim { self.axis_nodes(a) } else { vec![0.0] })
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for &x0 in &axes[0] {
            for &x1 in &axes[1] {
                for &x2 in &axes[2] {
                    out.push([x0, x1, x2]);
                }
            }
        }
        out
    }

    /// `|k|^2` at every node of the frequency grid, in storage order.
    pub fn k_squared(&self) -> Vec<f64> {
        let ks: Vec<Vec<f64>> = (0..MAX_DIM)
            .map(|a| if a < self.dim { self.wavenumbers(a) } else { vec![0.0] })
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for &k0 in &ks[0] {
            for &k1 in &ks[1] {
                for &k2 in &ks[2] {
                    out.push(k0 * k0 + k1 * k1 + k2 * k2);
                }
            }
        }
        out
    }

    /// Checks `dx <= sqrt(eps)/4` and `dx <= eps/(4 xi_max + 1)` on every axis.
    pub fn resolution_check(&self, eps: f64, xi_max: f64) -> Result<()> {
        let dx = self.max_spacing();
        let width_bound = eps.sqrt() / 4.0;
        if dx > width_bound {
            return Err(WpError::Resolution(format!(
                "dx = {dx:.4e} > sqrt(eps)/4 = {width_bound:.4e} (eps = {eps})"
            )));
        }
        let phase_bound = eps / (4.0 * xi_max + 1.0);
        if dx > phase_bound {
            return Err(WpError::Resolution(format!(
                "dx = {dx:.4e} > eps/(4|xi|+1) = {phase_bound:.4e} (eps = {eps}, |xi| = {xi_max})"
            )));
        }
        Ok(())
    }

    /// Flat indices of nodes within `cells` cells of the boundary on any axis.
    pub fn boundary_mask(&self, cells: usize) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                let m = self.multi_index(i);
                (0..self.dim).any(|a| m[a] < cells || m[a] + cells >= self.points[a])
            })
            .collect()
    }

    pub fn contains(&self, x: &Vec3, margin: f64) -> bool {
        (0..self.dim).all(|a| x[a] - margin >= -self.half_width[a] && x[a] + margin <= self.half_width[a])
    }
}

/// Largest spacing allowed by the resolution rule.
pub fn max_spacing(eps: f64, xi_max: f64) -> f64 {
    (eps.sqrt() / 4.0).min(eps / (4.0 * xi_max + 1.0))
}

/// FFT-order index `j` of an `n`-point transform as a signed frequency.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_counts() {
        assert!(GridSpec::cubic(1, 1.0, 8).is_err());
        assert!(GridSpec::cubic(1, 1.0, 48).is_err());
        assert!(GridSpec::cubic(4, 1.0, 16).is_err());
        assert!(GridSpec::cubic(2, -1.0, 16).is_err());
    }

    #[test]
    fn geometry() {
        let g = GridSpec::new(2, &[1.0, 2.0], &[16, 32]).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!(g.spacing(0), 0.125);
        assert_eq!(g.spacing(1), 0.125);
        let nodes = g.node_coords();
        assert_eq!(nodes[0], [-1.0, -2.0, 0.0]);
        assert_eq!(nodes[33], [-0.875, -1.875, 0.0]);
        assert_eq!(g.multi_index(33), [1, 1, 0]);
        let k = g.wavenumbers(0);
        assert_eq!(k[1], PI);
        assert_eq!(k[15], -PI);
        assert_eq!(k[8], -8.0 * PI);
    }

    #[test]
    fn covering_grid_meets_resolution() {
        let lo = [-1.0, 0.0, 0.0];
        let hi = [0.5, 0.0, 0.0];
        let eps = 2f64.powi(-6);
        let g = GridSpec::covering(1, &lo, &hi, 1.0, eps, 1.2).unwrap();
        g.resolution_check(eps, 1.2).unwrap();
        assert_eq!(g.half_width[0], 2.0);
        assert!(GridSpec::cubic(1, 2.0, 64).unwrap().resolution_check(eps, 1.2).is_err());
    }

    #[test]
    fn resolution_message_names_inequality() {
        let g = GridSpec::cubic(1, 4.0, 64).unwrap();
        let err = g.resolution_check(0.01, 0.0).unwrap_err().to_string();
        assert!(err.contains("sqrt(eps)/4"), "{err}");
    }
}
