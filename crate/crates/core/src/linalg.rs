//! Fixed-size vectors and matrices for points in up to three dimensions.
//!
//! Entries beyond the active dimension are kept at zero so that dot
//! products and quadratic forms need no explicit dimension argument.

pub const MAX_DIM: usize = 3;

pub type Vec3 = [f64; MAX_DIM];
pub type Mat3 = [[f64; MAX_DIM]; MAX_DIM];

pub const ZERO3: Vec3 = [0.0; MAX_DIM];
pub const ZERO33: Mat3 = [[0.0; MAX_DIM]; MAX_DIM];

pub fn to_vec3(x: &[f64]) -> Vec3 {
    assert!(x.len() <= MAX_DIM, "dimension {} exceeds {MAX_DIM}", x.len());
    let mut v = ZERO3;
    v[..x.len()].copy_from_slice(x);
    v
}

pub fn identity(dim: usize) -> Mat3 {
    let mut m = ZERO33;
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = 1.0;
    }
    m
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add_scaled(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = ZERO3;
    for i in 0..MAX_DIM {
        out[i] = dot(&m[i], v);
    }
    out
}

/// `<m v, v>`
pub fn quad_form(m: &Mat3, v: &Vec3) -> f64 {
    dot(&mat_vec(m, v), v)
}

pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    let mut m = ZERO33;
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

pub fn mat_add_scaled(a: &Mat3, s: f64, b: &Mat3) -> Mat3 {
    let mut m = *a;
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            m[i][j] += s * b[i][j];
        }
    }
    m
}

pub fn mat_scale(s: f64, a: &Mat3) -> Mat3 {
    mat_add_scaled(&ZERO33, s, a)
}

/// Frobenius norm.
pub fn mat_norm(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}
