use num_complex::Complex64;
use proptest::prelude::*;
use wplab::classical::integrate_trajectory;
use wplab::experiments::convergence::{nonincreasing, strictly_decreasing, TIE_GRANULARITY};
use wplab::experiments::fit::convergence_order;
use wplab::experiments::interaction::measure_interaction_interval;
use wplab::experiments::ladder::{map_ladder, normalize};
use wplab::fields::{h_eps_norm, ComplexField, GridSpec, ModeFrame, Spectral};
use wplab::solver::pauli_exponential;
use wplab::{MatrixPotential, Mode};

fn field(grid: &GridSpec, coeffs: &[(f64, f64, f64)]) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (re, im, c))| Complex64::new(*re, *im) * (-(x[0] - c).powi(2) * (k + 1) as f64).exp())
            .sum()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interaction_measure_is_bounded_by_count_times_longest(
        x1 in -2.5..-0.5f64, v1 in 0.3..1.5f64, x2 in 0.5..2.5f64, v2 in -1.5..0.2f64,
        k in 2..9i32, gamma in 0.05..0.45f64, minus in any::<bool>(),
    ) {
        let m = MatrixPotential::bump_coupling(1);
        let mode = if minus { Mode::Minus } else { Mode::Plus };
        let a = integrate_trajectory(&m, &[x1], &[v1], Mode::Plus, 4.0, 1e-10).unwrap();
        let b = integrate_trajectory(&m, &[x2], &[v2], mode, 4.0, 1e-10).unwrap();
        let r = measure_interaction_interval(&a, &b, 2f64.powi(-k), gamma, 4.0).unwrap();
        prop_assert!(r.identity_holds());
        prop_assert!(r.measure <= r.t_final);
        prop_assert_eq!(r.intervals.len(), r.n_intervals);
        prop_assert!(r.intervals.windows(2).all(|w| w[0].1 <= w[1].0));
    }

    #[test]
    fn polarization_round_trips_and_splits_mass(c in coeffs(), other in coeffs()) {
        let m = MatrixPotential::bump_coupling(1);
        let g = GridSpec::cubic(1, 4.0, 256).unwrap();
        let frame = ModeFrame::new(&m, &g).unwrap();
        let (f, h) = (field(&g, &c), field(&g, &other));
        let mut psi = frame.polarize(&f, Mode::Plus);
        psi.axpy(Complex64::new(1.0, 0.0), &frame.polarize(&h, Mode::Minus));
        let back = frame.project(&psi, Mode::Plus);
        prop_assert!(back.difference(&f).l2_norm() <= 1e-12 * (1.0 + f.l2_norm()));
        let split = frame.project(&psi, Mode::Plus).mass() + frame.project(&psi, Mode::Minus).mass();
        prop_assert!((split - psi.mass()).abs() <= 1e-12 * (1.0 + psi.mass()));
    }

    #[test]
    fn fourier_transform_is_unitary_up_to_scale(c in coeffs()) {
        let g = GridSpec::new(2, &[3.0, 2.0], &[32, 16]).unwrap();
        let f = ComplexField::from_fn(&g, |x| {
            c.iter().map(|(re, im, s)| Complex64::new(*re, *im) * (-(x[0] - s).powi(2) - x[1] * x[1]).exp()).sum()
        });
        let sp = Spectral::new(&g);
        let mut hat = f.data.clone();
        sp.forward(&mut hat);
        let energy: f64 = hat.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.len() as f64;
        let direct: f64 = f.data.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((energy - direct).abs() <= 1e-12 * (1.0 + direct));
        sp.inverse(&mut hat);
        let back = ComplexField::from_data(&g, 1, hat).unwrap();
        prop_assert!(back.difference(&f).l2_norm() <= 1e-13 * (1.0 + f.l2_norm()));
    }

    #[test]
    fn semiclassical_norms_are_homogeneous(c in coeffs(), re in -3.0..3.0f64, im in -3.0..3.0f64, k in 1..6i32, p in 0..3usize) {
        let g = GridSpec::cubic(1, 4.0, 256).unwrap();
        let f = field(&g, &c);
        let eps = 2f64.powi(-k);
        let mut scaled = f.clone();
        let s = Complex64::new(re, im);
        scaled.scale(s);
        let a = h_eps_norm(&f, eps, p).unwrap();
        let b = h_eps_norm(&scaled, eps, p).unwrap();
        prop_assert!((b - s.norm() * a).abs() <= 1e-12 * (1.0 + b));
        if p > 0 {
            prop_assert!(h_eps_norm(&f, eps, p - 1).unwrap() <= a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tie_tolerant_monotonicity(v in prop::collection::vec(0.0..10.0f64, 2..10), jitter in 0.0..1.0f64) {
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(nonincreasing(&sorted));
        if strictly_decreasing(&v) {
            prop_assert!(nonincreasing(&v));
        }
        let mut tied = sorted.clone();
        tied[1] = tied[0] + jitter * TIE_GRANULARITY;
        prop_assert!(nonincreasing(&tied));
        tied[1] = tied[0] + 2.0 * TIE_GRANULARITY;
        prop_assert!(!nonincreasing(&tied));
    }

    #[test]
    fn normalized_ladders_are_strictly_decreasing(ks in prop::collection::btree_set(0..20i32, 1..10), rev in any::<bool>()) {
        let mut ladder: Vec<f64> = ks.iter().map(|k| 2f64.powi(-k)).collect();
        if rev {
            ladder.reverse();
        }
        let n = normalize(&ladder).unwrap();
        prop_assert_eq!(n.len(), ladder.len());
        prop_assert!(strictly_decreasing(&n));
        let mut dup = ladder.clone();
        dup.push(ladder[0]);
        prop_assert!(normalize(&dup).is_err());
        let doubled = map_ladder(&n, 3, |e| Ok(2.0 * e)).unwrap();
        prop_assert!(doubled.iter().zip(&n).all(|(d, e)| *d == 2.0 * e));
    }

    #[test]
    fn power_laws_recover_their_order(order in 0.05..2.0f64, scale in 0.01..100.0f64, lo in 1..4i32, len in 4..8i32) {
        let eps: Vec<f64> = (lo..lo + len).map(|k| 2f64.powi(-k)).collect();
        let v: Vec<f64> = eps.iter().map(|e| scale * e.powf(order)).collect();
        let fit = convergence_order(&eps, &v).unwrap();
        prop_assert!((fit.slope - order).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn pauli_exponential_is_unitary(a in -5.0..5.0f64, b in -5.0..5.0f64, re in -5.0..5.0f64, im in -5.0..5.0f64, nl in -5.0..5.0f64, dt in 0.0..2.0f64) {
        let v = [
            [Complex64::new(a, 0.0), Complex64::new(re, im)],
            [Complex64::new(re, -im), Complex64::new(b, 0.0)],
        ];
        let u = pauli_exponential(&v, nl, dt);
        for r in 0..2 {
            for s in 0..2 {
                let p = u[r][0] * u[s][0].conj() + u[r][1] * u[s][1].conj();
                let expect = if r == s { 1.0 } else { 0.0 };
                prop_assert!((p - expect).norm() < 1e-13);
            }
        }
    }
}
