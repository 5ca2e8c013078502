use num_complex::Complex64;

use crate::error::{Result, WpError};
use crate::fields::{Envelope, GridSpec, PacketParams};
use crate::linalg::Vec3;
use crate::potential::{MatrixPotential, Mode, PotentialKind};
use crate::profile::{default_profile_grid, DEFAULT_PROFILE_DT};

pub const DEFAULT_SNAPSHOTS: usize = 64;
pub const DEFAULT_MARGIN: f64 = 10.0;
pub const DEFAULT_TRAJECTORY_TOLERANCE: f64 = 1e-11;

/// Smooth, fixed-shape perturbation of the initial data, rescaled to
/// `||eta||_{H_eps^1} = eps^gamma0` and polarized along `(1, 1)/sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub gamma0: f64,
    /// Centre relative to the first packet's position.
    pub offset: Vec3,
    pub width: f64,
}

/// Everything that defines one study except `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: MatrixPotential,
    pub packets: Vec<PacketParams>,
    pub lambda: f64,
    /// Nonlinearity exponent; `None` selects the critical `1 + d/2`.
    pub beta: Option<f64>,
    pub t_final: f64,
    pub snapshots: usize,
    pub dt: Option<f64>,
    /// Box margin around the trajectories, in units of `sqrt(eps)`.
    pub margin: f64,
    pub profile_grid: GridSpec,
    pub profile_dt: f64,
    pub trajectory_tolerance: f64,
    /// Also solve for the correction term and report `theta`.
    pub correction: bool,
    pub perturbation: Option<Perturbation>,
    /// Stop a run once `||w||_{H_eps^1}` exceeds this value.
    pub stop_threshold: Option<f64>,
    /// Fixed x-grid for every `eps` instead of the covering rule.
    pub x_grid: Option<GridSpec>,
}

impl Scenario {
    pub fn new(name: &str, model: MatrixPotential, packets: Vec<PacketParams>, lambda: f64, t_final: f64) -> Result<Self> {
        let dim = model.dim;
        Ok(Scenario {
            name: name.to_string(),
            model,
            packets,
            lambda,
            beta: None,
            t_final,
            snapshots: DEFAULT_SNAPSHOTS,
            dt: None,
            margin: DEFAULT_MARGIN,
            profile_grid: default_profile_grid(dim)?,
            profile_dt: DEFAULT_PROFILE_DT,
            trajectory_tolerance: DEFAULT_TRAJECTORY_TOLERANCE,
            correction: false,
            perturbation: None,
            stop_threshold: None,
            x_grid: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.packets.is_empty() {
            return Err(WpError::Config("scenario has no packets".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(WpError::Config(format!(
                "Lambda = {} < 0: the focusing case is excluded",
                self.lambda
            )));
        }
        if !(self.t_final > 0.0) || self.snapshots == 0 {
            return Err(WpError::Config("need T > 0 and at least one snapshot".into()));
        }
        if self.correction && self.packets.len() != 1 {
            return Err(WpError::Config("the correction term is defined for single-packet data".into()));
        }
        if self.x_grid.as_ref().is_some_and(|g| g.dim != self.dim()) {
            return Err(WpError::Config("x-grid dimension differs from the model".into()));
        }
        if self.profile_grid.dim != self.dim() {
            return Err(WpError::Config("profile grid dimension differs from the model".into()));
        }
        for p in &self.packets {
            p.envelope.validate()?;
        }
        Ok(())
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        (0..=self.snapshots)
            .map(|k| self.t_final * k as f64 / self.snapshots as f64)
            .collect()
    }
}

fn packet(x0: &[f64], xi0: &[f64], mode: Mode) -> PacketParams {
    PacketParams::new(x0, xi0, mode)
}

/// Bump-coupling model, one plus-mode packet crossing the coupling region
/// (d = 3: a slow packet launched off-centre, sized for a single smoke point).
pub fn main_scenario(dim: usize) -> Result<Scenario> {
    let model = MatrixPotential::bump_coupling(dim);
    let (x0, xi0): (Vec<f64>, Vec<f64>) = match dim {
        1 => (vec![-1.5], vec![1.2]),
        2 => (vec![-1.5, 0.1], vec![1.2, 0.0]),
        _ => (vec![-2.5, 0.0, 0.0], vec![0.1, 0.0, 0.0]),
    };
    let mut s = Scenario::new(&format!("main_d{dim}"), model, vec![packet(&x0, &xi0, Mode::Plus)], 1.0, 1.0)?;
    s.correction = true;
    if dim == 3 {
        s.margin = 6.0;
    }
    Ok(s)
}

/// Constant diagonal potential with `Lambda = 0`: the ansatz is exact.
pub fn diagonal_control(dim: usize) -> Result<Scenario> {
    let model = MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0: 0.0, rho: 1.0 }, dim)?;
    let mut x0 = vec![0.0; dim];
    let mut xi0 = vec![0.0; dim];
    x0[0] = -0.25;
    xi0[0] = 0.5;
    let mut s = Scenario::new(&format!("diagonal_d{dim}"), model, vec![packet(&x0, &xi0, Mode::Plus)], 0.0, 1.0)?;
    s.correction = true;
    Ok(s)
}

/// Two packets on different modes crossing each other, with `E_+ - E_-`
/// about 0.5 below the range of the eigenvalue gap (`Gamma ~ 0.52`).
pub fn superposition_different_modes() -> Result<Scenario> {
    let model = MatrixPotential::bump_coupling(1);
    Scenario::new(
        "superposition_diff",
        model,
        vec![packet(&[-0.5], &[1.0], Mode::Plus), packet(&[0.5], &[-1.6], Mode::Minus)],
        1.0,
        1.0,
    )
}

/// Two plus packets meeting head on.
pub fn superposition_same_mode() -> Result<Scenario> {
    let model = MatrixPotential::bump_coupling(1);
    Scenario::new(
        "superposition_same",
        model,
        vec![packet(&[-0.6], &[1.0], Mode::Plus), packet(&[0.6], &[-1.0], Mode::Plus)],
        1.0,
        1.0,
    )
}

/// Two envelopes sharing one phase-space point, given as separate packets.
pub fn superposition_coincident() -> Result<Scenario> {
    let model = MatrixPotential::bump_coupling(1);
    let a = packet(&[-0.5], &[1.0], Mode::Plus);
    let b = packet(&[-0.5], &[1.0], Mode::Plus)
        .with_envelope(Envelope::Gaussian { width: 0.7 })
        .with_amplitude(Complex64::new(0.0, 0.5));
    Scenario::new("superposition_coincident", model, vec![a, b], 1.0, 1.0)
}

/// Barrier-crossing escape on the bump model used for the breakdown study.
pub fn breakdown_scenario() -> Result<Scenario> {
    let model = MatrixPotential::bump_coupling(1);
    let mut s = Scenario::new(
        "breakdown_d1",
        model,
        vec![packet(&[-1.5], &[1.4], Mode::Plus)],
        1.0,
        4.0,
    )?;
    s.snapshots = 128;
    s.stop_threshold = Some(0.5);
    s.profile_grid = GridSpec::cubic(1, 96.0, 2048)?;
    Ok(s)
}

