//! Two-packet data: different modes, or one mode with distinct phase-space
//! points. Same-mode packets sharing a point are merged into one packet.

use num_complex::Complex64;
use serde::Serialize;

use super::convergence::{run_main_convergence, ConvergenceStudy, StudyOptions};
use super::pipeline::trajectories;
use super::report::Gate;
use super::scenario::Scenario;
use crate::classical::TrajectoryRecord;
use crate::error::{Result, WpError};
use crate::fields::{Envelope, PacketParams};
use crate::linalg::Vec3;
use crate::potential::{MatrixPotential, Mode};

/// Points per axis (d = 1) or Halton samples (d > 1) used for the infimum.
pub const GAMMA_SAMPLES: usize = 20_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SuperpositionKind {
    DifferentModes,
    SameMode,
    /// Same mode and same phase-space point: run as one packet.
    Coincident,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperpositionStudy {
    pub kind: SuperpositionKind,
    /// `inf_x |E_+ - E_- - (lambda_+(x) - lambda_-(x))|` for different modes.
    pub gamma: Option<f64>,
    pub study: ConvergenceStudy,
}

fn halton(mut n: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while n > 0 {
        f /= base as f64;
        r += f * (n % base) as f64;
        n /= base;
    }
    r
}

/// `inf_x |E_plus - E_minus - (lambda_+(x) - lambda_-(x))|`, sampled on a box
/// of half-width `half_width` (plus the limit at infinity when `V` has one).
pub fn energy_gap_constant(model: &MatrixPotential, e_plus: f64, e_minus: f64, half_width: f64) -> Result<f64> {
    let d = model.dim;
    let de = e_plus - e_minus;
    let gap_at = |x: &Vec3| -> Result<f64> {
        let e = model.eigen(&x[..d])?;
        Ok((de - (e.lambda_plus - e.lambda_minus)).abs())
    };
    let mut best = f64::INFINITY;
    if let (Some(p), Some(m)) = (model.lambda_infinity(Mode::Plus), model.lambda_infinity(Mode::Minus)) {
        best = (de - (p - m)).abs();
    }
    let n = GAMMA_SAMPLES;
    for k in 0..n {
        let mut x = [0.0; 3];
        if d == 1 {
            x[0] = half_width * (2.0 * k as f64 / (n - 1) as f64 - 1.0);
        } else {
            for (a, base) in [2usize, 3, 5].iter().enumerate().take(d) {
                x[a] = half_width * (2.0 * halton(k + 1, *base) - 1.0);
            }
        }
        best = best.min(gap_at(&x)?);
    }
    Ok(best)
}

/// `Gamma` for a plus/minus pair of trajectories, on a box twice as wide as
/// their extent.
pub fn gamma_for(model: &MatrixPotential, a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<f64> {
    let (plus, minus) = match (a.mode, b.mode) {
        (Mode::Plus, Mode::Minus) => (a, b),
        (Mode::Minus, Mode::Plus) => (b, a),
        _ => return Err(WpError::Config("Gamma is defined for packets on different modes".into())),
    };
    let mut reach: f64 = 4.0;
    for r in [a, b] {
        let (lo, hi) = r.extent();
        for ax in 0..model.dim {
            reach = reach.max(lo[ax].abs()).max(hi[ax].abs());
        }
    }
    energy_gap_constant(model, plus.energy, minus.energy, 2.0 * reach)
}

fn coincide(a: &PacketParams, b: &PacketParams) -> bool {
    a.mode == b.mode && a.position == b.position && a.momentum == b.momentum
}

/// The single packet equivalent to two same-mode packets sharing a point.
pub fn merge_packets(a: &PacketParams, b: &PacketParams) -> PacketParams {
    let one = Complex64::new(1.0, 0.0);
    PacketParams {
        position: a.position,
        momentum: a.momentum,
        envelope: Envelope::Sum(vec![(a.amplitude, a.envelope.clone()), (b.amplitude, b.envelope.clone())]),
        mode: a.mode,
        amplitude: one,
    }
}

pub fn run_superposition(scenario: &Scenario, ladder: &[f64], opts: &StudyOptions) -> Result<SuperpositionStudy> {
    if scenario.packets.len() != 2 {
        return Err(WpError::Config(format!(
            "superposition needs exactly 2 packets, got {}",
            scenario.packets.len()
        )));
    }
    let (a, b) = (&scenario.packets[0], &scenario.packets[1]);
    let mut s = scenario.clone();
    s.correction = false;
    let opts = StudyOptions {
        theta_order_min: None,
        ..opts.clone()
    };
    if a.mode != b.mode {
        let records = trajectories(&s)?;
        let gamma = gamma_for(&s.model, &records[0], &records[1])?;
        if !(gamma > 0.0) {
            return Err(WpError::Gamma { gamma });
        }
        let mut study = run_main_convergence(&s, ladder, &opts)?;
        study
            .gates
            .insert(0, Gate::new("gamma_positive", true, format!("Gamma = {gamma:.6e} > 0")));
        return Ok(SuperpositionStudy {
            kind: SuperpositionKind::DifferentModes,
            gamma: Some(gamma),
            study,
        });
    }
    if coincide(a, b) {
        s.packets = vec![merge_packets(a, b)];
        let study = run_main_convergence(&s, ladder, &opts)?;
        return Ok(SuperpositionStudy {
            kind: SuperpositionKind::Coincident,
            gamma: None,
            study,
        });
    }
    let study = run_main_convergence(&s, ladder, &opts)?;
    Ok(SuperpositionStudy {
        kind: SuperpositionKind::SameMode,
        gamma: None,
        study,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::integrate_trajectory;
    use crate::potential::PotentialKind;

    #[test]
    fn constant_gap_gives_the_energy_mismatch() {
        let m = MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0: 0.0, rho: 0.5 }, 1).unwrap();
        let g = energy_gap_constant(&m, 1.3, -0.1, 3.0).unwrap();
        assert!((g - 0.4).abs() < 1e-14);
        let a = integrate_trajectory(&m, &[-1.0], &[1.0], Mode::Plus, 1.0, 1e-12).unwrap();
        let b = integrate_trajectory(&m, &[1.0], &[-0.5], Mode::Minus, 1.0, 1e-12).unwrap();
        // E_+ = 1/2 + 1/2, E_- = 1/8 - 1/2, gap 1
        assert!((gamma_for(&m, &a, &b).unwrap() - 0.375).abs() < 1e-14);
        assert!((gamma_for(&m, &b, &a).unwrap() - 0.375).abs() < 1e-14);
        assert!(gamma_for(&m, &a, &a).is_err());
    }

    #[test]
    fn coincident_packets_are_detected() {
        let p = PacketParams::new(&[0.1], &[1.0], Mode::Plus);
        let q = p.clone().with_amplitude(Complex64::new(0.0, 2.0));
        assert!(coincide(&p, &q));
        assert!(!coincide(&p, &PacketParams::new(&[0.1], &[1.0], Mode::Minus)));
        let m = merge_packets(&p, &q);
        assert_eq!(m.amplitude, Complex64::new(1.0, 0.0));
        assert_eq!(m.position, p.position);
    }
}
