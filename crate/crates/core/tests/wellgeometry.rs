use std::f64::consts::PI;

use kwell::domain::{Domain, DomainSpec, SpectralField};
use kwell::functionals::{Energies, ModelParams};
use kwell::wellgeometry::*;

fn reference() -> (Domain, ModelParams) {
    (Domain::default_interval(), ModelParams::reference())
}

/// Maximum of the fibering map along `cos t·sin x + sin t·sin 3x` over a
/// dense angle scan, with its own composite Simpson quadrature.
fn two_mode_scan(p: &ModelParams, n_angles: usize) -> f64 {
    let nx = 4000;
    let h = PI / nx as f64;
    let simpson = |f: &dyn Fn(f64) -> f64| -> f64 {
        (0..=nx)
            .map(|i| {
                let w = if i == 0 || i == nx { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    let mut best = f64::INFINITY;
    for i in 0..n_angles {
        // ground state is near t = −0.068; scan [−0.2, 0.1] finely
        let t = -0.2 + 0.3 * i as f64 / (n_angles - 1) as f64;
        let (c1, c3) = (t.cos(), t.sin());
        let a = simpson(&|x: f64| (c1 * x.cos() + 3.0 * c3 * (3.0 * x).cos()).powi(2));
        let pw = simpson(&|x: f64| (c1 * x.sin() + c3 * (3.0 * x).sin()).powi(6));
        // λ* solves a + bλ²A = λ^{q−1}P/A with q = 5: P μ² − bA² μ − aA = 0, μ = λ²
        let mu = (p.b * a * a + ((p.b * a * a).powi(2) + 4.0 * pw * p.a * a).sqrt()) / (2.0 * pw);
        let j = 0.5 * p.a * mu * a + 0.25 * p.b * mu * mu * a * a - mu.powi(3) * pw / 6.0;
        best = best.min(j);
    }
    best
}

#[test]
fn depth_agrees_with_two_mode_scan() {
    let p = ModelParams::reference();
    // three modes, generous quadrature: only sin x and sin 3x are active
    let d3 = Domain::new(DomainSpec::interval(PI, 3).with_quad(64)).unwrap();
    let (dep, _) = compute_depth(&d3, &p, &GeometrySettings { refine: false, ..Default::default() }).unwrap();
    let scan = two_mode_scan(&p, 30001);
    assert!((dep - scan).abs() < 1e-6 * scan, "descent {dep} vs scan {scan}");
}

#[test]
fn reference_landscape() {
    let (d, p) = reference();
    let g = compute_geometry(&d, &p, &GeometrySettings::default()).unwrap();
    // independent spectral computation at 64 modes
    assert!((g.s_est - 0.8094578).abs() < 1e-6, "S = {}", g.s_est);
    assert!((g.d_est - 3.0466884).abs() < 1e-6, "d = {}", g.d_est);
    assert!(g.d_est >= g.d_lower - 1e-8);
    let r = g.refinement.unwrap();
    assert!(r.rel_gap < 1e-4);

    // depth from the embedding constant: Φ₁(S^{q+1}) on the extremal ray
    let sob = estimate_sobolev_constant(&d, p.q, &GeometrySettings::default()).unwrap();
    let e = Energies::of(&d, &sob.maximizer, &p);
    let via_s = e.ray().depth_value(1.0, &p).unwrap();
    assert!((via_s - g.d_est).abs() < 1e-8 * g.d_est);

    let one_mode = SpectralField::unit(d.n_modes(), 0);
    let j_phi1 = Energies::of(&d, &one_mode, &p).ray().depth_value(1.0, &p).unwrap();
    assert!(g.d_est <= j_phi1);

    let at1 = g.d_curve.iter().find(|(x, _)| *x == 1.0).unwrap().1;
    assert!((at1 - g.d_est).abs() < 1e-8 * g.d_est);
    for w in g.d_curve.windows(2) {
        if w[1].0 <= 1.0 {
            assert!(w[1].1 - w[0].1 >= -1e-6, "{w:?}");
        } else {
            assert!(w[1].1 - w[0].1 <= 1e-6, "{w:?}");
        }
    }
    let argmax = g.d_curve.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert_eq!(argmax, 1.0);
    let tilde = g.delta_tilde.unwrap();
    assert!(tilde > 1.0);

    // roots on the continuous branch
    let j0 = 0.75 * g.d_est;
    let roots = g.delta_roots(&d, &p, j0).unwrap();
    assert!(roots.delta1 < 1.0 && 1.0 < roots.delta2);
    assert!(!roots.delta2_at_jump);
    assert!(roots.residual1 <= 1e-8 * (1.0 + j0));
    assert!(roots.residual2 <= 1e-8 * (1.0 + j0));

    // below d((q+1)/4) the upper root sits on the high-frequency drop
    let roots = g.delta_roots(&d, &p, 0.5 * g.d_est).unwrap();
    assert!(roots.delta1 < 1.0 && 1.0 < roots.delta2);
    assert!(roots.residual1 <= 1e-8 * (1.0 + 0.5 * g.d_est));
    assert!(roots.delta2_at_jump);
    assert!((roots.delta2 - 1.5).abs() < 1e-6);
}

#[test]
fn small_delta_depth_vanishes() {
    let (d, p) = reference();
    let s = GeometrySettings { refine: false, ..Default::default() };
    let (_, u) = compute_depth(&d, &p, &s).unwrap();
    let curve = d_delta_curve(&d, &p, &[1e-8, 0.01, 0.5, 1.0], &[u], &s).unwrap();
    assert!(curve[0].1 < 1e-3);
    assert!(curve[1].1 < curve[2].1 && curve[2].1 < curve[3].1);
}

#[test]
fn sobolev_constant_grows_with_modes() {
    let s = GeometrySettings { refine: false, ..Default::default() };
    let mut prev = 0.0;
    for n in [1, 2, 4, 8, 16] {
        let d = Domain::new(DomainSpec::interval(PI, n)).unwrap();
        let est = estimate_sobolev_constant(&d, 5.0, &s).unwrap().s_est;
        assert!(est >= prev - 1e-12, "n = {n}: {est} < {prev}");
        prev = est;
    }
}

#[test]
fn high_energy_bounds_are_nested() {
    let (d, p) = reference();
    let s = GeometrySettings { refine: false, ..Default::default() };
    let g = compute_geometry(&d, &p, &s).unwrap();
    let b2 = estimate_high_energy_bounds(&d, &p, &g, 2.0 * g.d_est, 400, 11, &s).unwrap();
    let b4 = estimate_high_energy_bounds(&d, &p, &g, 4.0 * g.d_est, 400, 11, &s).unwrap();
    assert!(b2.n_accepted >= 1 && b4.n_accepted >= b2.n_accepted);
    assert!(0.0 < b2.lambda_s_est && b2.lambda_s_est <= b2.big_lambda_s_est);
    assert!(b4.lambda_s_est <= b2.lambda_s_est);
    assert!(b4.big_lambda_s_est >= b2.big_lambda_s_est);
    assert!(b2.gn_lower_bound > 0.0 && b2.lambda_s_est >= b2.gn_lower_bound);
    assert!(estimate_high_energy_bounds(&d, &p, &g, 0.5 * g.d_est, 10, 1, &s).is_err());
}

#[test]
fn norm_threshold_sweep_has_no_violations() {
    let (d, p) = reference();
    let s = GeometrySettings { refine: false, ..Default::default() };
    let s_est = estimate_sobolev_constant(&d, p.q, &s).unwrap().s_est;
    let rep = verify_norm_thresholds(&d, &p, 1.0, s_est, 1000, 3, s.exec);
    assert_eq!(rep.violations, 0);
    assert!(rep.n_negative > 0 && rep.n_inside > 0);
    assert!(rep.min_norm_negative > rep.r_delta);

    let big = SpectralField::unit(d.n_modes(), 0).scaled(50.0);
    let e = Energies::of(&d, &big, &p);
    assert!(e.i_delta(1.0, &p) < 0.0 && e.h1_sq.sqrt() > rep.r_delta);
}
