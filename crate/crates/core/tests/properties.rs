use std::f64::consts::PI;
use std::sync::OnceLock;

use kwell::domain::{Domain, DomainSpec, SpectralField};
use kwell::functionals::*;
use kwell::wellgeometry::{depth_lower_bound, estimate_sobolev_constant, GeometrySettings};
use proptest::prelude::*;

const N: usize = 16;

fn domain() -> &'static Domain {
    static D: OnceLock<Domain> = OnceLock::new();
    D.get_or_init(|| Domain::new(DomainSpec::interval(PI, N)).unwrap())
}

fn sobolev() -> f64 {
    static S: OnceLock<f64> = OnceLock::new();
    *S.get_or_init(|| estimate_sobolev_constant(domain(), 5.0, &GeometrySettings { refine: false, ..Default::default() }).unwrap().s_est)
}

/// Coefficients with `1/k` decay, not all zero.
fn field() -> impl Strategy<Value = SpectralField> {
    prop::collection::vec(-1.0f64..1.0, N)
        .prop_filter("nonzero", |c| c.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|c| SpectralField::new(c.iter().enumerate().map(|(k, x)| x / (k + 1) as f64).collect()).unwrap())
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.1f64..3.0, 0.1f64..3.0, 3.5f64..7.0).prop_map(|(a, b, q)| ModelParams::new(a, b, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn synthesis_round_trips_and_preserves_l2(u in field()) {
        let d = domain();
        let nodal = d.synthesize(&u).unwrap();
        let back = d.analyze(&nodal).unwrap();
        for (x, y) in u.coeffs().iter().zip(back.coeffs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let quad: f64 = nodal.iter().map(|v| v * v).sum::<f64>() * d.node_weight();
        prop_assert!((quad - d.l2_sq(&u)).abs() < 1e-12 * (1.0 + quad));
    }

    #[test]
    fn poincare_and_dirichlet_form(u in field()) {
        let d = domain();
        let h1: f64 = u.coeffs().iter().enumerate().map(|(k, c)| ((k + 1) * (k + 1)) as f64 * c * c).sum();
        prop_assert!((d.h1_sq(&u) - h1).abs() <= 1e-12 * h1);
        prop_assert!(d.h1_sq(&u) >= d.lambda1() * d.l2_sq(&u));
    }

    #[test]
    fn nonlocal_operator_is_strongly_monotone(u in field(), v in field(), s in 0.1f64..10.0, p in params()) {
        let d = domain();
        let u = u.scaled(s);
        let gap = monotonicity_gap(d, &u, &v, &p);
        let floor = monotonicity_floor(d, &u, &v, &p);
        let scale = 1.0 + gap.abs() + floor.abs();
        prop_assert!(gap >= floor - 1e-9 * scale, "gap {gap} floor {floor}");
    }

    #[test]
    fn fibering_map_rises_then_falls(u in field(), p in params()) {
        let d = domain();
        let ray = Energies::of(d, &u, &p).ray();
        let lam = ray.lambda_star(&p).unwrap();
        prop_assert!(ray.i_at(0.5 * lam, &p) > 0.0 && ray.i_at(2.0 * lam, &p) < 0.0);
        let peak = ray.j_at(lam, &p);
        for t in [0.2, 0.6, 0.9, 1.1, 1.5, 3.0] {
            prop_assert!(ray.j_at(t * lam, &p) <= peak * (1.0 + 1e-12));
        }
        prop_assert!(ray.j_at(0.5 * lam, &p) < ray.j_at(0.9 * lam, &p));
        prop_assert!(ray.j_at(1.1 * lam, &p) > ray.j_at(1.5 * lam, &p));
    }

    #[test]
    fn nehari_is_the_radial_derivative(u in field(), lam in 0.2f64..3.0, p in params()) {
        let d = domain();
        let ray = Energies::of(d, &u, &p).ray();
        let h = 1e-5 * lam;
        let deriv = (ray.j_at(lam + h, &p) - ray.j_at(lam - h, &p)) / (2.0 * h);
        let i = ray.i_at(lam, &p);
        let scale = 1.0 + ray.j_at(lam, &p).abs() + i.abs();
        prop_assert!((lam * deriv - i).abs() <= 1e-6 * scale, "{} vs {i}", lam * deriv);
        // the ray agrees with direct evaluation
        let direct = Energies::of(d, &u.scaled(lam), &p);
        prop_assert!((direct.j(&p) - ray.j_at(lam, &p)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn modified_nehari_vanishes_at_its_fiber_root(u in field(), delta in 0.05f64..3.0, p in params()) {
        let d = domain();
        let e = Energies::of(d, &u, &p);
        let lam = e.ray().lambda_delta(delta, &p).unwrap();
        let on = Energies::of(d, &u.scaled(lam), &p);
        let id = delta * (p.a * on.h1_sq + p.b * on.h1_sq * on.h1_sq) - on.lqp1;
        prop_assert!((on.i_delta(delta, &p) - id).abs() <= 1e-12 * (1.0 + on.lqp1));
        prop_assert!(on.i_delta(delta, &p).abs() <= 1e-9 * (1.0 + on.lqp1));
        prop_assert!((e.i_delta(1.0, &p) - e.i(&p)).abs() <= 1e-12 * (1.0 + e.lqp1));
    }

    #[test]
    fn gradient_matches_directional_difference(u in field(), v in field(), p in params()) {
        let d = domain();
        let (g, _) = energy_gradient(d, u.coeffs(), &p);
        let h = 1e-6;
        let jp = energy_j(d, &u.axpy(h, &v), &p);
        let jm = energy_j(d, &u.axpy(-h, &v), &p);
        let fd = (jp - jm) / (2.0 * h);
        let an: f64 = g.iter().zip(v.coeffs()).map(|(g, v)| g * v).sum();
        prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
    }

    #[test]
    fn fiber_maxima_clear_the_depth_lower_bound(u in field()) {
        let d = domain();
        let p = ModelParams::reference();
        let e = Energies::of(d, &u, &p);
        let s = sobolev();
        // the embedding constant is a maximum over all fields
        prop_assert!(e.lqp1.powf(1.0 / 6.0) <= s * e.h1_sq.sqrt() * (1.0 + 1e-9));
        prop_assert!(e.ray().depth_value(1.0, &p).unwrap() >= depth_lower_bound(&p, s) - 1e-9);
    }
}
