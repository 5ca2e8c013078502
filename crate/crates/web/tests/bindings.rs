use wplab_web::{eigen_curves, interaction, run_packet, separation};

#[test]
fn bump_curves_keep_the_gap() {
    let v = eigen_curves("bump", -6.0, 6.0, 101).unwrap();
    assert_eq!(v.len(), 303);
    for row in v.chunks(3) {
        assert!(row[1] - row[2] >= 2.0 - 1e-12);
    }
}

#[test]
fn packet_run_returns_aligned_series() {
    let r = run_packet(0.25, -1.5, 1.2, 0.5).unwrap();
    let n = r.t().len();
    assert_eq!(n, 33);
    assert_eq!(r.w().len(), n);
    assert_eq!(r.theta().len(), n);
    assert_eq!(r.path().len(), n);
    assert!(r.w()[0] < 1e-10);
    assert!(r.path()[n - 1] > -1.5);
}

#[test]
fn interaction_matches_its_count_identity() {
    let r = interaction(0.01, 0.25, 1.0).unwrap();
    let (measure, count, max_j) = (r[0], r[1] as usize, r[2]);
    assert_eq!(r.len(), 3 + 2 * count);
    assert!(measure > 0.0 && measure <= count as f64 * max_j + 1e-15);
    let sep = separation(1.0, 101).unwrap();
    assert!(sep.iter().cloned().fold(f64::INFINITY, f64::min) <= 0.01f64.powf(0.25));
}
