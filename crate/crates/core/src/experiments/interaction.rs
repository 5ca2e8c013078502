//! Times at which two classical trajectories come within `eps^gamma`.

use std::fmt::Write as _;

use serde::Serialize;

use super::fit::{convergence_order, LineFit};
use super::ladder::normalize;
use super::report::{fmt_f64, Artifacts, Gate, NamedFit};
use super::superposition::gamma_for;
use crate::classical::TrajectoryRecord;
use crate::error::{Result, WpError};

/// Crossings are refined to this time accuracy.
pub const CROSSING_TOLERANCE: f64 = 1e-9;
pub const SAMPLE_STEP: f64 = 1e-3;
const ZDDOT_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionReport {
    pub gamma: f64,
    pub eps: f64,
    pub t_final: f64,
    /// Lebesgue measure of `{t : |x_1(t) - x_2(t)| <= eps^gamma}`.
    pub measure: f64,
    /// Number of maximal subintervals.
    pub n_intervals: usize,
    /// Length of the longest subinterval.
    pub max_j: f64,
    pub intervals: Vec<(f64, f64)>,
    /// Energy-gap constant, for trajectories on different modes.
    pub gap_constant: Option<f64>,
    /// `min z''` over the set, `z = |x_1 - x_2|^2`.
    pub zddot_min: Option<f64>,
}

impl InteractionReport {
    /// `N max_J`, accumulated by repeated addition so that the comparison
    /// with `measure` is exact under monotone rounding.
    pub fn count_bound(&self) -> f64 {
        (0..self.n_intervals).fold(0.0, |acc, _| acc + self.max_j)
    }

    pub fn identity_holds(&self) -> bool {
        self.measure <= self.count_bound()
    }

    /// `min z'' / Gamma^2`, when both are known.
    pub fn delta(&self) -> Option<f64> {
        match (self.zddot_min, self.gap_constant) {
            (Some(z), Some(g)) if g > 0.0 => Some(z / (g * g)),
            _ => None,
        }
    }
}

fn separation_sq(a: &TrajectoryRecord, b: &TrajectoryRecord, t: f64) -> f64 {
    let (p, q) = (a.state_at(t), b.state_at(t));
    (0..a.dim).map(|i| (p.x[i] - q.x[i]).powi(2)).sum()
}

/// `z'' = 2|xi_1 - xi_2|^2 - 2 (x_1 - x_2).(grad lambda_1(x_1) - grad lambda_2(x_2))`.
pub fn zddot(a: &TrajectoryRecord, b: &TrajectoryRecord, t: f64) -> Result<f64> {
    let (p, q) = (a.state_at(t), b.state_at(t));
    let d = a.dim;
    let ga = a.model().grad_lambda(&p.x[..d], a.mode)?;
    let gb = b.model().grad_lambda(&q.x[..d], b.mode)?;
    let mut out = 0.0;
    for i in 0..d {
        out += 2.0 * (p.xi[i] - q.xi[i]).powi(2) - 2.0 * (p.x[i] - q.x[i]) * (ga[i] - gb[i]);
    }
    Ok(out)
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inside_lo = f(lo) <= 0.0;
    while hi - lo > CROSSING_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if (f(mid) <= 0.0) == inside_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sublevel set of `|x_1 - x_2| - eps^gamma` on `[0, T]`, by sampling every
/// `SAMPLE_STEP` and bisecting each sign change.
pub fn measure_interaction_interval(
    a: &TrajectoryRecord,
    b: &TrajectoryRecord,
    eps: f64,
    gamma: f64,
    t_final: f64,
) -> Result<InteractionReport> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(WpError::Config(format!("gamma = {gamma} must lie in (0, 1/2)")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(WpError::Config(format!("eps = {eps} is outside (0, 1]")));
    }
    if a.dim != b.dim {
        return Err(WpError::Config("trajectories live in different dimensions".into()));
    }
    if !(t_final > 0.0) || t_final > a.t_final() || t_final > b.t_final() {
        return Err(WpError::Config(format!(
            "T = {t_final} must be positive and covered by both trajectories"
        )));
    }
    let r2 = eps.powf(2.0 * gamma);
    let f = |t: f64| separation_sq(a, b, t) - r2;
    let n = (t_final / SAMPLE_STEP).ceil() as usize;
    let mut intervals = Vec::new();
    let mut start = if f(0.0) <= 0.0 { Some(0.0) } else { None };
    let mut t_prev = 0.0;
    let mut in_prev = start.is_some();
    for k in 1..=n {
        let t = if k == n { t_final } else { k as f64 * t_final / n as f64 };
        let inside = f(t) <= 0.0;
        if inside != in_prev {
            let c = bisect(&f, t_prev, t);
            if inside {
                start = Some(c);
            } else if let Some(s) = start.take() {
                intervals.push((s, c));
            }
        }
        t_prev = t;
        in_prev = inside;
    }
    if let Some(s) = start {
        intervals.push((s, t_final));
    }
    let measure = intervals.iter().map(|(s, e)| e - s).sum();
    let max_j = intervals.iter().map(|(s, e)| e - s).fold(0.0, f64::max);

    let gap_constant = if a.mode != b.mode { Some(gamma_for(a.model(), a, b)?) } else { None };
    let mut zmin: Option<f64> = None;
    for (s, e) in &intervals {
        for j in 0..=ZDDOT_SAMPLES {
            let t = s + (e - s) * j as f64 / ZDDOT_SAMPLES as f64;
            let z = zddot(a, b, t)?;
            zmin = Some(zmin.map_or(z, |m| m.min(z)));
        }
    }
    Ok(InteractionReport {
        gamma,
        eps,
        t_final,
        measure,
        n_intervals: intervals.len(),
        max_j,
        intervals,
        gap_constant,
        zddot_min: zmin,
    })
}

pub const INTERACTION_ORDER_FACTOR: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionStudy {
    pub reports: Vec<InteractionReport>,
    /// Order of `|I|` in `eps`, over the points with a nonempty set.
    pub fit: Option<LineFit>,
    pub gates: Vec<Gate>,
}

impl InteractionStudy {
    pub fn passed(&self) -> bool {
        super::report::all_passed(&self.gates)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("eps,gamma,measure,n_intervals,max_j,gap_constant,zddot_min\n");
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(r.eps),
                fmt_f64(r.gamma),
                fmt_f64(r.measure),
                r.n_intervals,
                fmt_f64(r.max_j),
                r.gap_constant.map(fmt_f64).unwrap_or_default(),
                r.zddot_min.map(fmt_f64).unwrap_or_default()
            );
        }
        out
    }

    pub fn artifacts(&self) -> Artifacts {
        let mut notes = Vec::new();
        for r in &self.reports {
            notes.push(format!(
                "eps = {:.4e}: |I| = {:.6e}, N = {}, max J = {:.6e}, min z'' = {}",
                r.eps,
                r.measure,
                r.n_intervals,
                r.max_j,
                r.zddot_min.map(|z| format!("{z:.4e}")).unwrap_or_else(|| "-".into())
            ));
        }
        Artifacts {
            title: "interaction interval".into(),
            series: Vec::new(),
            fits: self.fit.iter().map(|f| NamedFit::new("measure", *f)).collect(),
            gates: self.gates.clone(),
            notes,
            tables: vec![("interaction.csv".into(), self.table())],
        }
    }
}

/// Measures the set along a ladder and gates the fitted order at
/// `0.9 gamma` when the ladder has at least four nonempty points.
pub fn interaction_ladder(
    a: &TrajectoryRecord,
    b: &TrajectoryRecord,
    ladder: &[f64],
    gamma: f64,
    t_final: f64,
) -> Result<InteractionStudy> {
    let ladder = normalize(ladder)?;
    let reports = ladder
        .iter()
        .map(|&e| measure_interaction_interval(a, b, e, gamma, t_final))
        .collect::<Result<Vec<_>>>()?;
    let mut gates = vec![Gate::new(
        "count_identity",
        reports.iter().all(InteractionReport::identity_holds),
        "|I| <= N max_J at every eps",
    )];
    let hit: Vec<&InteractionReport> = reports.iter().filter(|r| r.measure > 0.0).collect();
    let fit = if hit.len() >= 4 {
        let eps: Vec<f64> = hit.iter().map(|r| r.eps).collect();
        let m: Vec<f64> = hit.iter().map(|r| r.measure).collect();
        Some(convergence_order(&eps, &m)?)
    } else {
        None
    };
    if let Some(f) = &fit {
        let min = INTERACTION_ORDER_FACTOR * gamma;
        gates.push(Gate::new(
            "measure_order",
            f.slope >= min,
            format!("fitted order of |I| {:.4} >= {min:.4}", f.slope),
        ));
    }
    if a.mode != b.mode {
        let positive = reports.iter().all(|r| r.zddot_min.is_none_or(|z| z > 0.0));
        gates.push(Gate::new("zddot_positive", positive, "z'' > 0 on the interaction set"));
    }
    Ok(InteractionStudy { reports, fit, gates })
}
