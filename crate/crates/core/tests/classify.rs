use std::f64::consts::PI;
use std::sync::OnceLock;

use kwell::classify::*;
use kwell::domain::{Domain, DomainSpec, SpectralField};
use kwell::dynamics::{integrate, Outcome, SolverControls};
use kwell::error::Error;
use kwell::functionals::{Energies, ModelParams};
use kwell::sampling::{random_low_mode, rng_for};
use kwell::wellgeometry::*;

fn setup() -> (Domain, ModelParams, &'static WellGeometry) {
    static GEOMETRY: OnceLock<WellGeometry> = OnceLock::new();
    let d = Domain::default_interval();
    let p = ModelParams::reference();
    let g = GEOMETRY.get_or_init(|| compute_geometry(&d, &p, &GeometrySettings { refine: false, ..Default::default() }).unwrap());
    (d, p, g)
}

fn phi1(d: &Domain) -> SpectralField {
    SpectralField::unit(d.n_modes(), 0)
}

#[test]
fn decision_table_basics() {
    let (d, p, g) = setup();
    let c = classify_initial(&d, &phi1(&d).scaled(0.1), &p, g, None, 0.1);
    assert_eq!(c.regime, Regime::Subcritical);
    assert!(c.i0 > 0.0);
    assert_eq!(c.prediction, Prediction::Global);

    // past the zero of J along the ray
    let mu = scale_to_energy(&d, &phi1(&d), 1e-3, &p, FiberBranch::Descending).unwrap() * 1.01;
    let c = classify_initial(&d, &phi1(&d).scaled(mu), &p, g, None, 0.1);
    assert!(c.j0 <= 0.0);
    assert_eq!(c.prediction, Prediction::BlowUp);

    // supercritical, I > 0, norm between the sampled bounds
    let u = phi1(&d).scaled(2.1);
    let e = Energies::of(&d, &u, &p);
    let b = estimate_high_energy_bounds(&d, &p, g, 1.05 * e.j(&p), 200, 5, &GeometrySettings::default()).unwrap();
    let c = classify_initial(&d, &u, &p, g, Some(&b), 0.1);
    assert_eq!(c.regime, Regime::Supercritical);
    assert!(c.i0 > 0.0);
    assert!(matches!(c.prediction, Prediction::NoPrediction { .. }), "{c:?}");
    assert!(c.margins.norm_over_lambda_s.unwrap() > 0.9);
}

#[test]
fn norm_predicate_constant_and_applicability() {
    let (d, p, g) = setup();
    let u = phi1(&d).scaled(2.2);
    let np = prop51_predicate(&d, &u, &p, g).unwrap();
    let j = Energies::of(&d, &u, &p).j(&p);
    assert!((np.lhs / j - 12.0 * PI * PI).abs() < 1e-12 * np.lhs / j);
    assert!(!np.holds);
    let tiny = phi1(&d).scaled(0.1);
    assert!(matches!(prop51_predicate(&d, &tiny, &p, g), Err(Error::NotApplicable(_))));
}

#[test]
fn scaling_to_the_depth_splits_by_branch() {
    let (d, p, g) = setup();
    for (branch, sign) in [(FiberBranch::Ascending, 1.0), (FiberBranch::Descending, -1.0)] {
        let mu = scale_to_energy(&d, &phi1(&d), g.d_est, &p, branch).unwrap();
        let e = Energies::of(&d, &phi1(&d).scaled(mu), &p);
        assert!((e.j(&p) - g.d_est).abs() <= 1e-12 * g.d_est);
        assert!(sign * e.i(&p) > 0.0);
        let c = classify_initial(&d, &phi1(&d).scaled(mu), &p, g, None, 0.1);
        assert_eq!(c.regime, Regime::Critical);
    }
}

#[test]
fn high_energy_construction_blows_up() {
    let (d, p, g) = setup();
    let m = 10.0 * g.d_est;
    let c = construct_high_energy(&d, &p, g, m).unwrap();
    assert!((c.j_total - m).abs() <= 1e-6 * m);
    assert!(c.predicate.holds && c.i_total < 0.0);
    // the nonlocal term couples the two bumps even with disjoint supports
    assert!((c.additivity_defect - c.cross_term).abs() <= 1e-4 * c.cross_term);
    assert!(c.support_leakage < 1e-10);
    let cl = classify_initial(&d, &c.datum, &p, g, None, 0.1);
    assert_eq!(cl.prediction, Prediction::BlowUp);
    let r = integrate(&d, &c.datum, &p, &SolverControls::default()).unwrap();
    assert!(matches!(r.outcome, Outcome::BlowUp { .. }), "{:?}", r.outcome);

    // leakage shrinks with resolution
    let fine = Domain::new(DomainSpec::interval(PI, 128)).unwrap();
    let cf = construct_high_energy(&fine, &p, g, m).unwrap();
    assert!(cf.truncation_leakage < c.truncation_leakage);
    assert!((cf.additivity_defect - cf.cross_term).abs() < (c.additivity_defect - c.cross_term).abs());

    assert!(matches!(construct_high_energy(&d, &p, g, 0.5 * g.d_est), Err(Error::Domain(_))));
    let square = Domain::new(DomainSpec::rectangle(PI, PI, 4)).unwrap();
    assert!(construct_high_energy(&square, &p, g, m).is_err());
}

#[test]
fn small_supercritical_datum_decays() {
    let (d, p, g) = setup();
    let e5 = SpectralField::unit(d.n_modes(), 4);
    let mu = scale_to_energy(&d, &e5, 4.0, &p, FiberBranch::Ascending).unwrap();
    let u = e5.scaled(mu);
    let j0 = Energies::of(&d, &u, &p).j(&p);
    let b = estimate_high_energy_bounds(&d, &p, g, j0.max(4.0) * 1.001, 400, 7, &GeometrySettings::default()).unwrap();
    let c = classify_initial(&d, &u, &p, g, Some(&b), 0.1);
    assert_eq!(c.regime, Regime::Supercritical);
    assert!(c.i0 > 0.0 && c.l2_norm <= 0.9 * b.lambda_s_est);
    assert_eq!(c.prediction, Prediction::Global);
    let r = integrate(&d, &u, &p, &SolverControls::default()).unwrap();
    assert!(matches!(r.outcome, Outcome::GlobalDecay { .. }));
}

#[test]
fn predictions_are_never_contradicted() {
    let (d, p, g) = setup();
    let mut rng = rng_for(2024, 0);
    let mut data = Vec::new();
    for i in 0..20 {
        let dir = random_low_mode(&d, &mut rng, 4, 2.0);
        let (level, branch) = match i % 5 {
            0 => (0.5 * g.d_est, FiberBranch::Ascending),
            1 => (0.5 * g.d_est, FiberBranch::Descending),
            2 => (0.9 * g.d_est, FiberBranch::Descending),
            3 => (g.d_est, FiberBranch::Ascending),
            _ => (g.d_est, FiberBranch::Descending),
        };
        let mu = scale_to_energy(&d, &dir, level, &p, branch).unwrap();
        data.push(dir.scaled(mu));
    }
    data.push(construct_high_energy(&d, &p, g, 20.0 * g.d_est).unwrap().datum);
    let mut decided = 0;
    for u in &data {
        let mut c = classify_initial(&d, u, &p, g, None, 0.1);
        c.attach(integrate(&d, u, &p, &SolverControls::default()).unwrap().outcome);
        assert_ne!(c.agreement(), Some(false), "{c:?}");
        decided += usize::from(c.agreement().is_some());
    }
    assert!(decided >= 18, "only {decided} decided");
}

#[test]
fn threshold_sweep_along_ground_mode() {
    let (d, p, g) = setup();
    let controls = SolverControls::default();
    let rep = threshold_sweep(&d, &phi1(&d), &p, g, &controls, 0.5, 3.0, &SweepSettings::default()).unwrap();
    assert_eq!(rep.flips, 1);
    assert!(rep.mu_hi - rep.mu_lo <= 1e-3 * rep.mu_hi);
    assert!(rep.probes.len() >= 3);
    let (agree, total) = rep.subcritical_agreement;
    assert!(total > 0 && agree == total);
    // I > 0 data just above the depth level already cross over, so the
    // threshold sits between the J = d scale and the J = 0 scale
    let md = rep.mu_depth_ascending.unwrap();
    assert!(md < rep.mu_star && rep.mu_star < rep.mu_zero_energy);
    assert!(rep.probes.iter().filter(|pr| pr.mu < md).all(|pr| matches!(pr.observed, Outcome::GlobalDecay { .. })));

    let seq = threshold_sweep(&d, &phi1(&d), &p, g, &controls, 0.5, 3.0, &SweepSettings { exec: kwell::exec::Execution::Sequential, ..Default::default() }).unwrap();
    assert_eq!(seq, rep);

    match threshold_sweep(&d, &phi1(&d), &p, g, &controls, 0.2, 0.5, &SweepSettings::default()) {
        Err(Error::Bracket { lo, hi }) => assert_eq!((lo.as_str(), hi.as_str()), ("GlobalDecay", "GlobalDecay")),
        other => panic!("{other:?}"),
    }
}
