use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use wplab::classical::integrate_trajectory;
use wplab::experiments::breakdown::t_star_nondecreasing;
use wplab::experiments::convergence::{nonincreasing, strictly_decreasing};
use wplab::experiments::fit::LineFit;
use wplab::experiments::interaction::interaction_ladder;
use wplab::experiments::ladder::dyadic;
use wplab::experiments::pipeline::trajectories;
use wplab::experiments::scenario::{breakdown_scenario, main_scenario, superposition_different_modes, superposition_same_mode};
use wplab::experiments::{
    measure_interaction_interval, run_breakdown_time, run_main_convergence, run_superposition, BreakdownStudy,
    ConvergenceStudy, ErrorSeries, StudyOptions, SuperpositionStudy,
};
use wplab::fields::{build_wavepacket, ComplexField, GridSpec, ModeFrame, PacketParams};
use wplab::profile::{
    default_profile_grid, energy_identity_residual, solve_profile, DecayingHessian, HessianSource, ProfileState,
    DEFAULT_PROFILE_DT,
};
use wplab::solver::{EvolutionConfig, FullSolver};
use wplab::{MatrixPotential, Mode, PotentialKind};

type Verdict = (bool, String);

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn max_drift(series: &[&ErrorSeries]) -> f64 {
    series.iter().map(|s| s.max_mass_drift()).fold(0.0, f64::max)
}

fn main_study(dim: usize, lo: i32, hi: i32, theta_min: Option<f64>) -> ConvergenceStudy {
    let opts = StudyOptions {
        workers: workers(),
        theta_order_min: theta_min,
        dt_halving: true,
    };
    run_main_convergence(&main_scenario(dim).unwrap(), &dyadic(lo, hi), &opts).unwrap()
}

struct Runs {
    d1: ConvergenceStudy,
    d2: ConvergenceStudy,
    diff: SuperpositionStudy,
    same: SuperpositionStudy,
    breakdown: BreakdownStudy,
}

fn conservation(r: &Runs) -> Verdict {
    let mut all: Vec<&ErrorSeries> = Vec::new();
    all.extend(&r.d1.series);
    all.extend(&r.d2.series);
    all.extend(&r.diff.study.series);
    all.extend(&r.same.study.series);
    all.extend(r.breakdown.rows.iter().map(|row| &row.series));
    let drift = max_drift(&all);
    (drift <= 1e-8, format!("max relative mass drift {drift:.3e} over {} runs", all.len()))
}

fn gaussian_oracle() -> Verdict {
    let eps = 2f64.powi(-4);
    let (rho0, rho) = (0.25, 0.5);
    let (x0, xi0, t) = (-0.25, 0.5, 1.0);
    let model = MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0, rho }, 1).unwrap();
    let grid = GridSpec::cubic(1, 4.0, 1024).unwrap();
    let frame = ModeFrame::new(&model, &grid).unwrap();
    let packet = build_wavepacket(&PacketParams::new(&[x0], &[xi0], Mode::Plus), eps, &grid).unwrap();
    let mut solver = FullSolver::new(frame.polarize(&packet, Mode::Plus), &model, EvolutionConfig::new(eps, 0.0, 1), xi0).unwrap();
    solver.advance_to(t).unwrap();

    let i = Complex64::new(0.0, 1.0);
    let s0 = Complex64::new(eps, 0.0);
    let st = s0 + i * eps * t;
    let amp = (std::f64::consts::PI * eps).powf(-0.25) * (s0 / st).sqrt();
    let energy = rho0 + rho;
    let exact = ComplexField::from_fn(&grid, |x| {
        let y = x[0] - x0;
        let z = x[0] - x0 - xi0 * t;
        amp * (-z * z / (2.0 * st) + i * (xi0 * y - 0.5 * xi0 * xi0 * t - energy * t) / eps).exp()
    });
    let exact = frame.polarize(&exact, Mode::Plus);
    let err = solver.psi().difference(&exact).l2_norm();
    (err <= 1e-6, format!("L2 distance to the closed-form Gaussian {err:.3e} at T = 1"))
}

fn classical_layer() -> Verdict {
    let mut drift: f64 = 0.0;
    for (dim, x0, xi0) in [(1, vec![-1.5], vec![1.2]), (2, vec![-1.5, 0.1], vec![1.2, 0.0])] {
        let m = MatrixPotential::bump_coupling(dim);
        for mode in [Mode::Plus, Mode::Minus] {
            let rec = integrate_trajectory(&m, &x0, &xi0, mode, 4.0, 1e-12).unwrap();
            drift = drift.max(rec.energy_drift);
        }
    }

    let harmonic = MatrixPotential::new(PotentialKind::SyntheticQuadratic, 1).unwrap();
    let rec = integrate_trajectory(&harmonic, &[1.0], &[0.0], Mode::Plus, 6.0, 1e-12).unwrap();
    let action_err = rec
        .t
        .iter()
        .zip(&rec.action)
        .map(|(t, s)| (s + (2.0 * t).sin() / 4.0).abs())
        .fold(0.0, f64::max);

    let m = MatrixPotential::bump_coupling(2);
    let h = 1e-4;
    let mut hess_err: f64 = 0.0;
    for x in [[-1.2, 0.3], [0.2, -0.4], [0.9, 0.8], [1.7, -0.1]] {
        for mode in [Mode::Plus, Mode::Minus] {
            let hess = m.hessian_lambda(&x, mode).unwrap();
            for j in 0..2 {
                let (mut p, mut q) = (x, x);
                p[j] += h;
                q[j] -= h;
                let gp = m.grad_lambda(&p, mode).unwrap();
                let gq = m.grad_lambda(&q, mode).unwrap();
                for i in 0..2 {
                    hess_err = hess_err.max((hess[i][j] - (gp[i] - gq[i]) / (2.0 * h)).abs());
                }
            }
        }
    }
    (
        drift <= 1e-10 && action_err <= 1e-8 && hess_err <= 1e-5,
        format!("energy drift {drift:.3e}, harmonic action error {action_err:.3e}, Hessian vs finite differences {hess_err:.3e}"),
    )
}

fn gaussian_profile(g: &GridSpec) -> ComplexField {
    let norm = std::f64::consts::PI.powf(-0.25);
    ComplexField::from_fn(g, |y| Complex64::new(norm * (-0.5 * y[0] * y[0]).exp(), 0.0))
}

fn profile_layer() -> Verdict {
    let g = default_profile_grid(1).unwrap();
    let a = gaussian_profile(&g);
    let mut base = [[0.0; 3]; 3];
    base[0][0] = 1.0;
    let q = DecayingHessian { base, power: 3.0 };
    let src: Arc<dyn HessianSource> = Arc::new(q);

    let finals: Vec<ComplexField> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| solve_profile(&a, src.clone(), 1.0, &[1.0], dt).unwrap().remove(0).u)
        .collect();
    let e1 = finals[0].difference(&finals[1]).l2_norm();
    let e2 = finals[1].difference(&finals[2]).l2_norm();
    let order = (e1 / e2).log2();
    let mass = finals.iter().map(|u| (u.mass() - a.mass()).abs() / a.mass()).fold(0.0, f64::max);

    let residual = |dt: f64| -> f64 {
        let n = (1.0 / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let states: Vec<ProfileState> = solve_profile(&a, src.clone(), 1.0, &times, dt).unwrap();
        energy_identity_residual(&states, &q, 1.0).unwrap().into_iter().fold(0.0, f64::max)
    };
    let r1 = residual(DEFAULT_PROFILE_DT);
    let r2 = residual(0.5 * DEFAULT_PROFILE_DT);
    let rate = (r1 / r2).log2();
    (
        mass <= 1e-10 && (order - 2.0).abs() <= 0.3 && r1 <= 1e-4 && (rate - 2.0).abs() <= 0.3,
        format!(
            "mass drift {mass:.3e}, Strang self-convergence order {order:.3}, energy identity residual {r1:.3e} (halved dt {r2:.3e}, rate {rate:.3})"
        ),
    )
}

fn desk_scale_d1(r: &Runs) -> Verdict {
    let w = r.d1.sup_w();
    let order = r.d1.fit("theta_l2").map_or(f64::NAN, |f| f.slope);
    (
        strictly_decreasing(&w) && order >= 0.45,
        format!("sup_t ||w||_Heps1 {}; fitted theta L2 order {order:.4}", list(&w)),
    )
}

fn desk_scale_d2(r: &Runs) -> Verdict {
    let w = r.d2.sup_w();
    let order = r.d2.fit("theta_l2").map_or(f64::NAN, |f| f.slope);
    let w_order = r.d2.fit("w_heps1").map_or(f64::NAN, |f| f.slope);
    (
        nonincreasing(&w),
        format!("sup_t ||w||_Heps1 {}; orders (reported) w {w_order:.4}, theta {order:.4}", list(&w)),
    )
}

fn bootstrap(r: &Runs) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, s) in [("d=1", &r.d1), ("d=2", &r.d2)] {
        match &s.bootstrap {
            Some(b) => {
                ok &= !b.gate().failed();
                detail.push(format!("{label} max/median {:.3}", b.ratio()));
            }
            None => {
                ok = false;
                detail.push(format!("{label} missing"));
            }
        }
    }
    (ok, detail.join(", "))
}

fn decoupling(r: &Runs) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, s) in [("d=1", &r.d1), ("d=2", &r.d2)] {
        let minus = s.sup_minus_mass();
        let w = s.sup_w();
        let bounded = minus.iter().zip(&w).all(|(m, w)| m <= w);
        let decreasing = nonincreasing(&minus);
        ok &= bounded && decreasing;
        detail.push(format!("{label} sup ||Pi_- psi|| {}", list(&minus)));
    }
    (ok, detail.join("; "))
}

fn superposition(r: &Runs) -> Verdict {
    let wd = r.diff.study.sup_w();
    let ws = r.same.study.sup_w();
    let gamma = r.diff.gamma.unwrap_or(f64::NAN);
    (
        nonincreasing(&wd) && nonincreasing(&ws) && gamma > 0.0,
        format!("different modes {} (Gamma {gamma:.4e}); same mode {}", list(&wd), list(&ws)),
    )
}

fn interaction() -> Verdict {
    let flat = MatrixPotential::new(PotentialKind::ConstantDiagonal { rho0: 0.0, rho: 1.0 }, 1).unwrap();
    let a = integrate_trajectory(&flat, &[-1.0], &[1.0], Mode::Plus, 2.0, 1e-12).unwrap();
    let b = integrate_trajectory(&flat, &[1.0], &[-1.0], Mode::Plus, 2.0, 1e-12).unwrap();
    let (eps, gamma) = (2f64.powi(-4), 0.25);
    let crossing = measure_interaction_interval(&a, &b, eps, gamma, 2.0).unwrap();
    let closed_form = eps.powf(gamma);
    let cf_err = (crossing.measure - closed_form).abs();

    let s = superposition_different_modes().unwrap();
    let records = trajectories(&s).unwrap();
    let study = interaction_ladder(&records[0], &records[1], &dyadic(2, 8), gamma, s.t_final).unwrap();
    let order = study.fit.map_or(f64::NAN, |f| f.slope);
    let identity = study.reports.iter().all(|r| r.identity_holds()) && crossing.identity_holds();
    (
        cf_err <= 1e-6 && order >= 0.9 * gamma && identity,
        format!("linear crossing |I| error {cf_err:.3e}; fitted order {order:.4} >= {:.4}; |I| <= N max_J at every eps: {identity}", 0.9 * gamma),
    )
}

fn large_time(r: &Runs) -> Verdict {
    let b = &r.breakdown;
    let t: Vec<String> = b
        .rows
        .iter()
        .map(|row| row.t_star.map_or("not reached".into(), |t| format!("{t:.4}")))
        .collect();
    let monotone = t_star_nondecreasing(&b.rows);
    let fit = |f: &Option<LineFit>| {
        f.map_or("missing".to_string(), |f| format!("slope {:.4}, residual {:.3e}", f.slope, f.residual))
    };
    (
        monotone && b.log_fit.is_some() && b.loglog_fit.is_some(),
        format!("t* {}; log fit {}; log-log fit {}", t.join(", "), fit(&b.log_fit), fit(&b.loglog_fit)),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = Runs {
        d1: main_study(1, 2, 7, Some(0.45)),
        d2: main_study(2, 2, 5, None),
        diff: run_superposition(&superposition_different_modes().unwrap(), &dyadic(2, 7), &StudyOptions { workers: workers(), ..StudyOptions::default() }).unwrap(),
        same: run_superposition(&superposition_same_mode().unwrap(), &dyadic(2, 7), &StudyOptions { workers: workers(), ..StudyOptions::default() }).unwrap(),
        breakdown: run_breakdown_time(&breakdown_scenario().unwrap(), &dyadic(3, 7), 0.5, workers(), false).unwrap(),
    };
    let criteria: Vec<(&str, Verdict)> = vec![
        ("conservation", conservation(&runs)),
        ("analytic oracle", gaussian_oracle()),
        ("classical layer", classical_layer()),
        ("profile layer", profile_layer()),
        ("desk-scale convergence d=1", desk_scale_d1(&runs)),
        ("desk-scale convergence d=2", desk_scale_d2(&runs)),
        ("bootstrap diagnostic", bootstrap(&runs)),
        ("adiabatic decoupling", decoupling(&runs)),
        ("superposition", superposition(&runs)),
        ("interaction interval", interaction()),
        ("large time", large_time(&runs)),
    ];
    let mut failed = 0;
    for (k, (name, (ok, detail))) in criteria.iter().enumerate() {
        println!("{} {:>2} {name}: {detail}", if *ok { "PASS" } else { "FAIL" }, k + 1);
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed in {:.0}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
