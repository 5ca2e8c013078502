//! `run` and `validate`.

use std::fmt::Write as _;

use wplab::experiments::convergence::{audit_scenario, run_smoke, MASS_GATE};
use wplab::experiments::growth::run_growth;
use wplab::experiments::interaction::interaction_ladder;
use wplab::experiments::pipeline::{grid_for, trajectories, Prepared};
use wplab::experiments::report::{fmt_f64, Artifacts, Gate};
use wplab::experiments::superposition::gamma_for;
use wplab::experiments::{
    run_breakdown_time, run_main_convergence, run_perturbed_data, run_superposition, StudyOptions,
};
use wplab::potential::{assumption_audit, AuditReport};
use wplab::solver::EvolutionConfig;
use wplab::WpError;

use crate::config::{echo, Experiment, Plan};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_GATE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

pub fn exit_code(e: &WpError) -> i32 {
    match e {
        WpError::Config(_) | WpError::Io(_) => EXIT_CONFIG,
        _ => EXIT_GATE,
    }
}

/// Short machine-readable name of an error variant.
pub fn error_kind(e: &WpError) -> &'static str {
    match e {
        WpError::GapViolation { .. } => "gap_violation",
        WpError::Resolution(_) => "resolution",
        WpError::Boundary(_) => "boundary",
        WpError::Interpolation(_) => "interpolation",
        WpError::BoundaryLeak { .. } => "boundary_leak",
        WpError::MassDrift { .. } => "mass_drift",
        WpError::StepFailure { .. } => "step_failure",
        WpError::Config(_) => "config",
        WpError::Fit(_) => "fit",
        WpError::Gamma { .. } => "gamma",
        WpError::Field(_) => "field",
        WpError::Io(_) => "io",
    }
}

fn study_options(plan: &Plan) -> StudyOptions {
    StudyOptions {
        workers: plan.workers,
        theta_order_min: plan.theta_order_min,
        dt_halving: plan.dt_halving,
    }
}

fn audit_artifacts(plan: &Plan, a: &AuditReport) -> Artifacts {
    let s = &plan.scenario;
    let gates = vec![
        Gate::new("gap", a.gap_ok, format!("min(rho^2 + omega^2) = {:.6e}, delta0 = {:.3e}", a.min_gap_sq, s.model.delta0)),
        Gate::new(
            "long_range",
            a.long_range_ok,
            format!("max <x>^p |V - V_inf| = {:.6e}", a.max_weighted_deviation),
        ),
        Gate::new(
            "compact_coupling",
            a.diagonal_outside_support_ok,
            format!("max |omega| outside the declared support = {:.6e}", a.max_coupling_outside_support),
        ),
    ];
    let mut table = String::from("quantity,value\n");
    for (k, v) in [
        ("samples", a.samples as f64),
        ("min_gap_sq", a.min_gap_sq),
        ("inner_min_gap_sq", a.inner_min_gap_sq),
        ("outer_min_gap_sq", a.outer_min_gap_sq),
        ("max_weighted_deviation", a.max_weighted_deviation),
        ("inner_max_weighted_deviation", a.inner_max_weighted_deviation),
        ("outer_max_weighted_deviation", a.outer_max_weighted_deviation),
        ("max_weighted_gradient", a.max_weighted_gradient),
        ("max_coupling_outside_support", a.max_coupling_outside_support),
    ] {
        let _ = writeln!(table, "{k},{}", fmt_f64(v));
    }
    Artifacts {
        title: "assumption audit".into(),
        gates,
        notes: a.violations.clone(),
        tables: vec![("audit.csv".into(), table)],
        ..Default::default()
    }
}

/// Runs the experiment and returns its artifacts without writing them.
pub fn execute(plan: &Plan) -> Result<Artifacts, WpError> {
    let s = &plan.scenario;
    let ladder = &plan.ladder;
    let opts = study_options(plan);
    match plan.experiment {
        Experiment::Main if ladder.len() < 4 => {
            let mut a = run_smoke(s, ladder, plan.workers)?.artifacts("smoke run");
            a.notes.push(format!("{} ladder point(s): no fits", ladder.len()));
            Ok(a)
        }
        Experiment::Main => Ok(run_main_convergence(s, ladder, &opts)?.artifacts("convergence")),
        Experiment::Perturbed => {
            let p = run_perturbed_data(s, plan.gamma0, ladder, &opts)?;
            let mut a = p.study.artifacts("perturbed data");
            a.notes.push(format!(
                "gamma0 = {}, within theorem range: {}, decay ratio {:.6e}",
                p.gamma0,
                p.within_theorem,
                p.decay_ratio()
            ));
            Ok(a)
        }
        Experiment::Breakdown => {
            Ok(run_breakdown_time(s, ladder, plan.threshold, plan.workers, plan.dt_halving)?.artifacts())
        }
        Experiment::SuperpositionDiff | Experiment::SuperpositionSame => {
            let r = run_superposition(s, ladder, &opts)?;
            let mut a = r.study.artifacts("superposition");
            a.notes.push(format!("kind: {:?}", r.kind));
            if let Some(g) = r.gamma {
                a.notes.push(format!("Gamma = {g:.6e}"));
            }
            Ok(a)
        }
        Experiment::Interaction => {
            let records = trajectories(s)?;
            Ok(interaction_ladder(&records[0], &records[1], ladder, plan.gamma, s.t_final)?.artifacts())
        }
        Experiment::Growth => run_growth(s)?.artifacts(),
        Experiment::Audit => {
            let a = assumption_audit(&s.model, plan.audit_half_width, plan.audit_samples, s.model.delta0);
            Ok(audit_artifacts(plan, &a))
        }
    }
}

pub fn failures_text(gates: &[&Gate]) -> String {
    let mut out = String::from("kind,name,detail\n");
    for g in gates {
        let _ = writeln!(out, "gate,{},\"{}\"", g.name, g.detail.replace('"', "'"));
    }
    out
}

fn error_text(e: &WpError) -> String {
    format!("kind,name,detail\nerror,{},\"{}\"\n", error_kind(e), e.to_string().replace('"', "'"))
}

/// Writes `config.echo` first, then the artifacts, or the error as the
/// failure list. Returns the exit status.
pub fn run(plan: &Plan, out: &mut impl std::io::Write) -> i32 {
    let dir = plan.output.as_path();
    if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("config.echo"), echo(&plan.resolved))) {
        let _ = writeln!(out, "FAIL io: {e}");
        return EXIT_CONFIG;
    }
    let _ = std::fs::remove_file(dir.join("failures.csv"));
    match execute(plan) {
        Ok(a) => {
            if let Err(e) = a.write_dir(dir) {
                let _ = writeln!(out, "FAIL {}: {e}", error_kind(&e));
                return exit_code(&e);
            }
            for g in &a.gates {
                let _ = writeln!(out, "{}", g.line());
            }
            let failed = a.failures();
            if failed.is_empty() {
                let _ = writeln!(out, "RESULT PASS ({})", dir.display());
                EXIT_PASS
            } else {
                let _ = std::fs::write(dir.join("failures.csv"), failures_text(&failed));
                let _ = writeln!(out, "RESULT FAIL ({} gate(s), see {})", failed.len(), dir.join("failures.csv").display());
                EXIT_GATE
            }
        }
        Err(e) => {
            let _ = std::fs::write(dir.join("failures.csv"), error_text(&e));
            let _ = writeln!(out, "FAIL {}: {e}", error_kind(&e));
            exit_code(&e)
        }
    }
}

/// Bytes per grid point of one ladder run: the solution, its driven
/// correction, the ansatz, spectral work arrays and per-snapshot scratch.
pub const BYTES_PER_POINT: f64 = 16.0 * 24.0;
/// Wall-clock seconds per grid point per time step per `log2 N`, indexed by
/// `d - 1`; measured single-threaded on the default ladders.
pub const SECONDS_PER_POINT_STEP: [f64; 3] = [6.0e-8, 3.4e-8, 7.0e-8];

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub eps: f64,
    pub points: Vec<usize>,
    pub steps: usize,
    pub memory_mb: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub gates: Vec<Gate>,
    pub warnings: Vec<String>,
    pub estimates: Vec<Estimate>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| !g.failed())
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_GATE
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let _ = writeln!(out, "{}", g.line());
        }
        for w in &self.warnings {
            let _ = writeln!(out, "WARNING {w}");
        }
        for e in &self.estimates {
            let pts: Vec<String> = e.points.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(
                out,
                "ESTIMATE eps={:.6e} grid={} steps={} memory={:.1} MB runtime={:.1} s",
                e.eps,
                pts.join("x"),
                e.steps,
                e.memory_mb,
                e.seconds
            );
        }
        let _ = writeln!(out, "RESULT {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

fn estimate(plan: &Plan, prepared: &Prepared, eps: f64) -> Result<Estimate, WpError> {
    let s = &plan.scenario;
    let grid = grid_for(s, prepared, eps)?;
    let n = grid.len() as f64;
    let mut cfg = EvolutionConfig::new(eps, s.lambda, s.dim());
    if let Some(dt) = s.dt {
        cfg = cfg.with_dt(dt);
    }
    let steps = (s.t_final / cfg.dt()).ceil() as usize;
    let profiles = (s.snapshots + 1) as f64 * s.profile_grid.len() as f64 * 16.0 * s.packets.len() as f64;
    let memory = n * BYTES_PER_POINT + profiles;
    let seconds = SECONDS_PER_POINT_STEP[s.dim() - 1] * steps as f64 * n * n.log2().max(1.0);
    Ok(Estimate {
        eps,
        points: grid.points[..s.dim()].to_vec(),
        steps,
        memory_mb: memory / (1024.0 * 1024.0),
        seconds,
    })
}

/// Dry run: trajectories, audit and the eps-dependent grid gates, with a
/// memory and runtime estimate per ladder point. No field is evolved, so
/// the envelope tail is bounded by the profile box and the box estimate is
/// an upper bound.
pub fn validate(plan: &Plan) -> Result<Validation, WpError> {
    let s = &plan.scenario;
    let mut v = Validation::default();
    if plan.resolved.experiment.seed.is_some() {
        v.warnings.push("seed is reserved and ignored: every pipeline is deterministic".into());
    }

    let audit = if plan.experiment == Experiment::Audit {
        assumption_audit(&s.model, plan.audit_half_width, plan.audit_samples, s.model.delta0)
    } else {
        let records = match trajectories(s) {
            Ok(r) => r,
            Err(e) => {
                v.gates.push(Gate::new("trajectories", false, e.to_string()));
                return Ok(v);
            }
        };
        let probe = Prepared {
            records,
            profiles: Vec::new(),
            profile_radius: 0.0,
        };
        audit_scenario(s, &probe)
    };
    let audit_gate = Gate::new(
        "assumption_audit",
        audit.passed(),
        format!("{} sample(s), {} violation(s)", audit.samples, audit.violations.len()),
    );
    for viol in &audit.violations {
        v.warnings.push(format!("audit: {viol}"));
    }
    if plan.experiment == Experiment::Audit {
        v.gates.push(audit_gate.informational());
        return Ok(v);
    }
    v.gates.push(audit_gate);

    let records = trajectories(s)?;
    match plan.experiment {
        Experiment::Breakdown => {
            let escaping = records.iter().all(|r| r.escape.escaping);
            v.gates.push(Gate::new("escaping_trajectory", escaping, "every trajectory escapes"));
        }
        Experiment::SuperpositionDiff | Experiment::Interaction if records[0].mode != records[1].mode => {
            let g = gamma_for(&s.model, &records[0], &records[1])?;
            v.gates.push(Gate::new("gamma_positive", g > 0.0, format!("Gamma = {g:.6e} > 0")));
        }
        _ => {}
    }
    if matches!(plan.experiment, Experiment::Growth | Experiment::Interaction) {
        return Ok(v);
    }

    let prepared = Prepared {
        records,
        profiles: Vec::new(),
        profile_radius: s.profile_grid.half_width[..s.dim()].iter().cloned().fold(0.0, f64::max),
    };
    let mut resolution = Vec::new();
    for &eps in &plan.ladder {
        match estimate(plan, &prepared, eps) {
            Ok(e) => {
                if e.memory_mb > plan.memory_limit_mb {
                    v.warnings.push(format!(
                        "eps = {eps:.6e}: estimated memory {:.1} MB exceeds the limit of {:.1} MB",
                        e.memory_mb, plan.memory_limit_mb
                    ));
                }
                v.estimates.push(e);
            }
            Err(e) => resolution.push(e.to_string()),
        }
    }
    v.gates.push(Gate::new(
        "resolution",
        resolution.is_empty(),
        if resolution.is_empty() {
            "dx <= min(sqrt(eps)/4, eps/(4|xi|+1)) at every eps".to_string()
        } else {
            resolution.join("; ")
        },
    ));
    v.gates.push(
        Gate::new("mass_conservation", true, format!("checked during the run at {MASS_GATE:.0e}")).informational(),
    );
    Ok(v)
}

/// `validate`, then prints the report. Returns the exit status.
pub fn validate_and_print(plan: &Plan, out: &mut impl std::io::Write) -> i32 {
    match validate(plan) {
        Ok(v) => {
            let _ = write!(out, "{}", v.render());
            v.exit_code()
        }
        Err(e) => {
            let _ = writeln!(out, "FAIL {}: {e}", error_kind(&e));
            exit_code(&e)
        }
    }
}
