//! Run configuration: flat `key = value` sections, resolved against the
//! built-in scenarios so that the echoed file reproduces the run.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use wplab::experiments::ladder::dyadic;
use wplab::experiments::scenario::{self, Perturbation, Scenario};
use wplab::experiments::convergence::THETA_ORDER_GATE;
use wplab::fields::{Envelope, GridSpec, PacketParams};
use wplab::{MatrixPotential, Mode, PotentialKind, WpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Main,
    Perturbed,
    Breakdown,
    SuperpositionDiff,
    SuperpositionSame,
    Interaction,
    Growth,
    Audit,
}

impl Experiment {
    pub fn parse(id: &str) -> Result<Self, WpError> {
        Ok(match id {
            "main" => Experiment::Main,
            "perturbed" => Experiment::Perturbed,
            "breakdown" => Experiment::Breakdown,
            "superposition_diff" => Experiment::SuperpositionDiff,
            "superposition_same" => Experiment::SuperpositionSame,
            "interaction" => Experiment::Interaction,
            "growth" => Experiment::Growth,
            "audit" => Experiment::Audit,
            other => {
                return Err(WpError::Config(format!(
                    "unknown experiment id '{other}' (expected main, perturbed, breakdown, superposition_diff, superposition_same, interaction, growth or audit)"
                )))
            }
        })
    }

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Main => "main",
            Experiment::Perturbed => "perturbed",
            Experiment::Breakdown => "breakdown",
            Experiment::SuperpositionDiff => "superposition_diff",
            Experiment::SuperpositionSame => "superposition_same",
            Experiment::Interaction => "interaction",
            Experiment::Growth => "growth",
            Experiment::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    pub output: Option<String>,
    pub workers: Option<usize>,
    /// Reserved: every pipeline is deterministic.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// bump | rotation | synthetic_quadratic | constant_diagonal | gaussian_coupling
    pub id: Option<String>,
    pub dim: Option<usize>,
    pub delta0: Option<f64>,
    pub rho0_amplitude: Option<f64>,
    pub decay: Option<f64>,
    pub coupling_amplitude: Option<f64>,
    pub coupling_radius: Option<f64>,
    pub coupling_center: Option<Vec<f64>>,
    pub angle_amplitude: Option<f64>,
    pub angle_radius: Option<f64>,
    pub rho0: Option<f64>,
    pub rho: Option<f64>,
    pub coupling_width: Option<f64>,
    pub declared_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub eps: Option<Vec<f64>>,
    /// `eps = 2^-k` for `k` in `dyadic_min..=dyadic_max`, when `eps` is absent.
    pub dyadic_min: Option<i32>,
    pub dyadic_max: Option<i32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub snapshots: Option<usize>,
    pub correction: Option<bool>,
    pub trajectory_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub margin: Option<f64>,
    pub profile_half_width: Option<f64>,
    pub profile_points: Option<usize>,
    pub profile_dt: Option<f64>,
    /// Fixed x-grid for every `eps`; both keys or neither.
    pub x_half_width: Option<Vec<f64>>,
    pub x_points: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
    /// "+" or "-".
    pub mode: String,
    pub width: Option<f64>,
    /// `[re, im]`.
    pub amplitude: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub gamma: Option<f64>,
    pub gamma0: Option<f64>,
    pub threshold: Option<f64>,
    pub theta_order_min: Option<f64>,
    pub dt_halving: Option<bool>,
    pub perturbation_width: Option<f64>,
    pub perturbation_offset: Option<Vec<f64>>,
    pub audit_half_width: Option<f64>,
    pub audit_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub memory_limit_mb: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub ladder: LadderSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub grid: GridSection,
    pub packet1: Option<PacketSection>,
    pub packet2: Option<PacketSection>,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub limits: LimitsSection,
}

pub const DEFAULT_MEMORY_LIMIT_MB: f64 = 4096.0;
pub const DEFAULT_AUDIT_HALF_WIDTH: f64 = 8.0;
pub const DEFAULT_AUDIT_SAMPLES: usize = 4096;
pub const DEFAULT_GROWTH_T: f64 = 10.0;

/// Everything `run` and `validate` need, with every default filled in.
#[derive(Debug, Clone)]
pub struct Plan {
    pub experiment: Experiment,
    pub scenario: Scenario,
    pub ladder: Vec<f64>,
    pub workers: usize,
    pub output: PathBuf,
    pub gamma: f64,
    pub gamma0: f64,
    pub threshold: f64,
    pub theta_order_min: Option<f64>,
    pub dt_halving: bool,
    pub audit_half_width: f64,
    pub audit_samples: usize,
    pub memory_limit_mb: f64,
    /// The configuration with every resolved value written back.
    pub resolved: SimConfig,
}

pub fn parse(text: &str) -> Result<SimConfig, WpError> {
    toml::from_str(text).map_err(|e| WpError::Config(format!("malformed config: {e}")))
}

pub fn load(path: &Path) -> Result<SimConfig, WpError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WpError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn echo(cfg: &SimConfig) -> String {
    toml::to_string(cfg).expect("config sections serialize")
}

fn parse_mode(s: &str) -> Result<Mode, WpError> {
    match s {
        "+" | "plus" => Ok(Mode::Plus),
        "-" | "minus" => Ok(Mode::Minus),
        other => Err(WpError::Config(format!("mode '{other}' is not + or -"))),
    }
}

fn mode_str(m: Mode) -> String {
    match m {
        Mode::Plus => "+".into(),
        Mode::Minus => "-".into(),
    }
}

fn vec3(v: &[f64], dim: usize, what: &str) -> Result<[f64; 3], WpError> {
    if v.len() != dim {
        return Err(WpError::Config(format!("{what} has {} entries, expected {dim}", v.len())));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

fn build_potential(p: &mut PotentialSection, dim: usize) -> Result<MatrixPotential, WpError> {
    let id = p.id.get_or_insert_with(|| "bump".into()).clone();
    let kind = match id.as_str() {
        "bump" => PotentialKind::BumpCoupling {
            rho0_amplitude: *p.rho0_amplitude.get_or_insert(0.5),
            decay: *p.decay.get_or_insert(2.0),
            coupling_amplitude: *p.coupling_amplitude.get_or_insert(0.6),
            coupling_radius: *p.coupling_radius.get_or_insert(1.5),
            coupling_center: vec3(p.coupling_center.get_or_insert_with(|| vec![0.0; dim]), dim, "coupling_center")?,
        },
        "rotation" => PotentialKind::Rotation {
            decay: *p.decay.get_or_insert(1.0),
            angle_amplitude: *p.angle_amplitude.get_or_insert(1.0),
            angle_radius: *p.angle_radius.get_or_insert(1.5),
        },
        "synthetic_quadratic" => PotentialKind::SyntheticQuadratic,
        "constant_diagonal" => PotentialKind::ConstantDiagonal {
            rho0: *p.rho0.get_or_insert(0.0),
            rho: *p.rho.get_or_insert(1.0),
        },
        "gaussian_coupling" => PotentialKind::GaussianCoupling {
            coupling_amplitude: *p.coupling_amplitude.get_or_insert(0.6),
            coupling_width: *p.coupling_width.get_or_insert(0.5),
            declared_radius: *p.declared_radius.get_or_insert(1.5),
        },
        other => {
            return Err(WpError::Config(format!(
                "unknown potential '{other}' (expected bump, rotation, synthetic_quadratic, constant_diagonal or gaussian_coupling)"
            )))
        }
    };
    let model = MatrixPotential::new(kind, dim)?;
    let delta0 = *p.delta0.get_or_insert(model.delta0);
    Ok(model.with_delta0(delta0))
}

fn packet_section(p: &PacketParams, dim: usize) -> PacketSection {
    PacketSection {
        x0: p.position[..dim].to_vec(),
        xi0: p.momentum[..dim].to_vec(),
        mode: mode_str(p.mode),
        width: Some(p.envelope.max_width()),
        amplitude: Some([p.amplitude.re, p.amplitude.im]),
    }
}

fn packet_from(s: &PacketSection, dim: usize) -> Result<PacketParams, WpError> {
    vec3(&s.x0, dim, "x0")?;
    vec3(&s.xi0, dim, "xi0")?;
    let mut p = PacketParams::new(&s.x0, &s.xi0, parse_mode(&s.mode)?);
    if let Some(w) = s.width {
        p = p.with_envelope(Envelope::Gaussian { width: w });
    }
    if let Some([re, im]) = s.amplitude {
        p = p.with_amplitude(Complex64::new(re, im));
    }
    Ok(p)
}

fn base_scenario(exp: Experiment, dim: usize) -> Result<Scenario, WpError> {
    let one_dim = |name: &str| {
        if dim != 1 {
            Err(WpError::Config(format!("the {name} experiment is defined for d = 1")))
        } else {
            Ok(())
        }
    };
    match exp {
        Experiment::Main | Experiment::Perturbed | Experiment::Audit => scenario::main_scenario(dim),
        Experiment::Growth => {
            let mut s = scenario::main_scenario(dim)?;
            s.t_final = DEFAULT_GROWTH_T;
            s.correction = false;
            s.packets[0].momentum[0] = 1.8;
            s.profile_grid = GridSpec::cubic(dim, 160.0, if dim == 1 { 2048 } else { 128 })?;
            Ok(s)
        }
        Experiment::Breakdown => {
            one_dim("breakdown")?;
            scenario::breakdown_scenario()
        }
        Experiment::SuperpositionDiff | Experiment::Interaction => {
            one_dim(exp.id())?;
            scenario::superposition_different_modes()
        }
        Experiment::SuperpositionSame => {
            one_dim("superposition_same")?;
            scenario::superposition_same_mode()
        }
    }
}

fn default_ladder(exp: Experiment, dim: usize) -> (i32, i32) {
    match (exp, dim) {
        (Experiment::Breakdown, _) => (3, 9),
        (Experiment::Interaction, _) => (2, 8),
        (Experiment::Main, 1) => (2, 8),
        (_, 1) => (2, 7),
        (_, 2) => (2, 5),
        _ => (3, 3),
    }
}

fn check_packets(exp: Experiment, s: &Scenario) -> Result<(), WpError> {
    let p = &s.packets;
    let two = matches!(
        exp,
        Experiment::SuperpositionDiff | Experiment::SuperpositionSame | Experiment::Interaction
    );
    if two && p.len() != 2 {
        return Err(WpError::Config(format!("{} needs exactly 2 packets, got {}", exp.id(), p.len())));
    }
    if !two && p.len() != 1 {
        return Err(WpError::Config(format!("{} takes a single packet, got {}", exp.id(), p.len())));
    }
    match exp {
        Experiment::SuperpositionDiff if p[0].mode == p[1].mode => {
            Err(WpError::Config("superposition_diff needs packets on different modes".into()))
        }
        Experiment::SuperpositionSame if p[0].mode != p[1].mode => {
            Err(WpError::Config("superposition_same needs packets on the same mode".into()))
        }
        _ => Ok(()),
    }
}

/// Fills in every default and builds the scenario. `output` and `workers`
/// override the file's values.
pub fn resolve(cfg: &SimConfig, output: Option<&Path>, workers: Option<usize>) -> Result<Plan, WpError> {
    let mut r = cfg.clone();
    let exp = Experiment::parse(&r.experiment.id)?;
    let dim = *r.potential.dim.get_or_insert(1);
    if !(1..=3).contains(&dim) {
        return Err(WpError::Config(format!("dimension {dim} not in 1..=3")));
    }
    let mut s = base_scenario(exp, dim)?;
    s.model = build_potential(&mut r.potential, dim)?;

    if let Some(p1) = &r.packet1 {
        let mut packets = vec![packet_from(p1, dim)?];
        if let Some(p2) = &r.packet2 {
            packets.push(packet_from(p2, dim)?);
        }
        s.packets = packets;
    } else if r.packet2.is_some() {
        return Err(WpError::Config("packet2 given without packet1".into()));
    }
    r.packet1 = Some(packet_section(&s.packets[0], dim));
    r.packet2 = s.packets.get(1).map(|p| packet_section(p, dim));

    let e = &mut r.evolution;
    s.lambda = *e.lambda.get_or_insert(s.lambda);
    if s.lambda < 0.0 {
        return Err(WpError::Config(format!(
            "Lambda = {} < 0: the focusing case is excluded",
            s.lambda
        )));
    }
    s.beta = e.beta.or(s.beta);
    s.t_final = *e.t_final.get_or_insert(s.t_final);
    s.dt = e.dt.or(s.dt);
    s.snapshots = *e.snapshots.get_or_insert(s.snapshots);
    if exp == Experiment::Perturbed && e.correction.is_none() {
        e.correction = Some(false);
    }
    s.correction = *e.correction.get_or_insert(s.correction && s.packets.len() == 1);
    s.trajectory_tolerance = *e.trajectory_tolerance.get_or_insert(s.trajectory_tolerance);

    let g = &mut r.grid;
    s.margin = *g.margin.get_or_insert(s.margin);
    let phw = *g.profile_half_width.get_or_insert(s.profile_grid.half_width[0]);
    let pn = *g.profile_points.get_or_insert(s.profile_grid.points[0]);
    s.profile_grid = GridSpec::cubic(dim, phw, pn)?;
    s.profile_dt = *g.profile_dt.get_or_insert(s.profile_dt);
    match (&g.x_half_width, &g.x_points) {
        (Some(hw), Some(n)) => s.x_grid = Some(GridSpec::new(dim, hw, n)?),
        (None, None) => {}
        _ => return Err(WpError::Config("x_half_width and x_points go together".into())),
    }

    let ladder = match (&r.ladder.eps, r.ladder.dyadic_min, r.ladder.dyadic_max) {
        (Some(eps), None, None) => eps.clone(),
        (None, lo, hi) => {
            let (dlo, dhi) = default_ladder(exp, dim);
            let (lo, hi) = (*r.ladder.dyadic_min.get_or_insert(lo.unwrap_or(dlo)), *r.ladder.dyadic_max.get_or_insert(hi.unwrap_or(dhi)));
            if lo > hi {
                return Err(WpError::Config(format!("dyadic_min {lo} > dyadic_max {hi}")));
            }
            dyadic(lo, hi)
        }
        _ => return Err(WpError::Config("give either eps or dyadic_min/dyadic_max, not both".into())),
    };
    let ladder = wplab::experiments::ladder::normalize(&ladder)?;
    r.ladder = LadderSection {
        eps: Some(ladder.clone()),
        dyadic_min: None,
        dyadic_max: None,
    };

    let st = &mut r.study;
    let gamma = *st.gamma.get_or_insert(0.25);
    let gamma0 = *st.gamma0.get_or_insert(0.5);
    let threshold = *st.threshold.get_or_insert(s.stop_threshold.unwrap_or(0.5));
    let theta_default = (exp == Experiment::Main && dim == 1 && s.correction).then_some(THETA_ORDER_GATE);
    let theta_order_min = st.theta_order_min.or(theta_default);
    st.theta_order_min = theta_order_min;
    let dt_halving = *st.dt_halving.get_or_insert(true);
    if exp == Experiment::Perturbed {
        let width = *st.perturbation_width.get_or_insert(0.5);
        let offset = vec3(st.perturbation_offset.get_or_insert_with(|| vec![0.0; dim]), dim, "perturbation_offset")?;
        s.perturbation = Some(Perturbation { gamma0, offset, width });
    }
    let audit_half_width = *st.audit_half_width.get_or_insert(DEFAULT_AUDIT_HALF_WIDTH);
    let audit_samples = *st.audit_samples.get_or_insert(DEFAULT_AUDIT_SAMPLES);

    let memory_limit_mb = *r.limits.memory_limit_mb.get_or_insert(DEFAULT_MEMORY_LIMIT_MB);
    if let Some(w) = workers {
        r.experiment.workers = Some(w);
    }
    let workers = *r.experiment.workers.get_or_insert(1);
    if workers == 0 {
        return Err(WpError::Config("workers must be at least 1".into()));
    }
    if let Some(o) = output {
        r.experiment.output = Some(o.display().to_string());
    }
    let output = PathBuf::from(r.experiment.output.get_or_insert_with(|| format!("out/{}", exp.id())).clone());

    check_packets(exp, &s)?;
    if matches!(exp, Experiment::Perturbed | Experiment::SuperpositionDiff | Experiment::SuperpositionSame) && ladder.len() < 4 {
        return Err(WpError::Config(format!(
            "{} fits need at least 4 ladder points, got {}",
            exp.id(),
            ladder.len()
        )));
    }
    s.validate()?;
    Ok(Plan {
        experiment: exp,
        scenario: s,
        ladder,
        workers,
        output,
        gamma,
        gamma0,
        threshold,
        theta_order_min,
        dt_halving,
        audit_half_width,
        audit_samples,
        memory_limit_mb,
        resolved: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_to_defaults() {
        let cfg = parse("[experiment]\nid = \"main\"\n").unwrap();
        let plan = resolve(&cfg, None, None).unwrap();
        assert_eq!(plan.experiment, Experiment::Main);
        assert_eq!(plan.ladder.len(), 7);
        assert_eq!(plan.theta_order_min, Some(THETA_ORDER_GATE));
        assert_eq!(plan.workers, 1);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse("[experiment]\nid = \"superposition_diff\"\n[ladder]\ndyadic_min = 2\ndyadic_max = 5\n").unwrap();
        let plan = resolve(&cfg, None, Some(2)).unwrap();
        let again = parse(&echo(&plan.resolved)).unwrap();
        let plan2 = resolve(&again, None, None).unwrap();
        assert_eq!(plan2.resolved, plan.resolved);
        assert_eq!(plan2.scenario, plan.scenario);
        assert_eq!(plan2.workers, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[experiment]\nid = \"main\"\nbogus = 1\n").is_err());
        assert!(parse("[experiment]\nid = \"main\"\n[nested.deeper]\nx = 1\n").is_err());
    }

    #[test]
    fn focusing_sign_is_a_config_error() {
        let cfg = parse("[experiment]\nid = \"main\"\n[evolution]\nlambda = -1.0\n").unwrap();
        let e = resolve(&cfg, None, None).unwrap_err();
        assert!(matches!(e, WpError::Config(ref m) if m.contains("focusing")));
    }

    #[test]
    fn packets_must_match_the_dimension() {
        let cfg = parse("[experiment]\nid = \"main\"\n[potential]\ndim = 2\n[packet1]\nx0 = [0.0]\nxi0 = [1.0]\nmode = \"+\"\n").unwrap();
        assert!(resolve(&cfg, None, None).is_err());
    }
}
