//! Energy `J`, Nehari functional `I`, the modified family `I_δ`, fibering
//! roots, and the nonlocal Kirchhoff operator `L(u) = −(a + b‖∇u‖₂²)Δu`.
//!
//! Along a ray `λ ↦ λu` every functional depends on `u` only through
//! `A = ‖∇u‖₂²` and `P = ‖u‖_{q+1}^{q+1}`, so the root-finders and the
//! well-geometry optimizers work on the scalar pair ([`Ray`]).

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, SpectralField};
use crate::error::{Error, Result};

/// Relative tolerance for the fibering root-finders.
pub const TOL_ROOT: f64 = 1e-12;

/// Constants of `M(s) = a + b s` and the power `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl ModelParams {
    /// Requires `a > 0`, `b > 0`, `q > 3`. At `q = 3` the quartic and the
    /// power term balance and the fibering map loses its unique maximum.
    pub fn new(a: f64, b: f64, q: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Config(format!("a must be positive, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Config(format!("b must be positive, got {b}")));
        }
        if !(q.is_finite() && q > 3.0) {
            return Err(Error::Config(format!("q must exceed 3, got {q}")));
        }
        Ok(Self { a, b, q })
    }

    /// The reference configuration a = b = 1, q = 5.
    pub fn reference() -> Self {
        Self { a: 1.0, b: 1.0, q: 5.0 }
    }

    /// Kirchhoff coefficient `a + b·h1_sq`.
    pub fn kirchhoff(&self, h1_sq: f64) -> f64 {
        self.a + self.b * h1_sq
    }
}

/// The three integrals every functional is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub l2_sq: f64,
    pub h1_sq: f64,
    pub lqp1: f64,
}

impl Energies {
    pub fn of(domain: &Domain, u: &SpectralField, p: &ModelParams) -> Self {
        Self {
            l2_sq: u.sum_sq(),
            h1_sq: domain.h1_sq(u),
            lqp1: domain.lqp1_raw(u.coeffs(), p.q),
        }
    }

    pub fn j(&self, p: &ModelParams) -> f64 {
        0.5 * p.a * self.h1_sq + 0.25 * p.b * self.h1_sq * self.h1_sq - self.lqp1 / (p.q + 1.0)
    }

    pub fn i(&self, p: &ModelParams) -> f64 {
        p.a * self.h1_sq + p.b * self.h1_sq * self.h1_sq - self.lqp1
    }

    pub fn i_delta(&self, delta: f64, p: &ModelParams) -> f64 {
        delta * (p.a + p.b * self.h1_sq) * self.h1_sq - self.lqp1
    }

    pub fn ray(&self) -> Ray {
        Ray { h1_sq: self.h1_sq, lqp1: self.lqp1 }
    }
}

/// A direction reduced to `(‖∇u‖₂², ‖u‖_{q+1}^{q+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub h1_sq: f64,
    pub lqp1: f64,
}

impl Ray {
    pub fn j_at(&self, lambda: f64, p: &ModelParams) -> f64 {
        let l2 = lambda * lambda;
        0.5 * p.a * l2 * self.h1_sq + 0.25 * p.b * l2 * l2 * self.h1_sq * self.h1_sq
            - lambda.powf(p.q + 1.0) * self.lqp1 / (p.q + 1.0)
    }

    pub fn i_delta_at(&self, lambda: f64, delta: f64, p: &ModelParams) -> f64 {
        let l2 = lambda * lambda;
        delta * (p.a * l2 * self.h1_sq + p.b * l2 * l2 * self.h1_sq * self.h1_sq) - lambda.powf(p.q + 1.0) * self.lqp1
    }

    pub fn i_at(&self, lambda: f64, p: &ModelParams) -> f64 {
        self.i_delta_at(lambda, 1.0, p)
    }

    /// `h_δ(λ) = δ(aλ^{1−q}A + bλ^{3−q}A²) − P`, strictly decreasing in λ.
    fn h_delta(&self, lambda: f64, delta: f64, p: &ModelParams) -> f64 {
        delta * (p.a * lambda.powf(1.0 - p.q) * self.h1_sq + p.b * lambda.powf(3.0 - p.q) * self.h1_sq * self.h1_sq)
            - self.lqp1
    }

    /// The unique `λ > 0` with `I_δ(λu) = 0`.
    pub fn lambda_delta(&self, delta: f64, p: &ModelParams) -> Result<f64> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("δ must be positive, got {delta}")));
        }
        if !(self.h1_sq > 0.0) {
            return Err(Error::Domain("fibering root requested for a zero field".into()));
        }
        if !(self.lqp1 > 0.0) {
            return Err(Error::Domain("fibering root requested for a field with vanishing L^{q+1} norm".into()));
        }
        let h = |l: f64| self.h_delta(l, delta, p);
        let (mut lo, mut hi) = (1.0, 1.0);
        if h(1.0) > 0.0 {
            while h(hi) > 0.0 {
                lo = hi;
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Domain("fibering root bracket overflowed".into()));
                }
            }
        } else {
            while h(lo) <= 0.0 {
                hi = lo;
                lo *= 0.5;
                if lo == 0.0 {
                    return Err(Error::Domain("fibering root bracket underflowed".into()));
                }
            }
        }
        Ok(bisect_decreasing(h, lo, hi, TOL_ROOT))
    }

    /// λ* = λ(1), the maximizer of the fibering map.
    pub fn lambda_star(&self, p: &ModelParams) -> Result<f64> {
        self.lambda_delta(1.0, p)
    }

    /// `J(λ(δ)u)`.
    pub fn depth_value(&self, delta: f64, p: &ModelParams) -> Result<f64> {
        let l = self.lambda_delta(delta, p)?;
        Ok(self.j_at(l, p))
    }
}

/// Bisection for the sign change of a decreasing function on `[lo, hi]`
/// (`f(lo) > 0 ≥ f(hi)`), to relative width `tol`.
pub(crate) fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= tol * mid.abs() * 0.5 {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo), f(hi));
    if flo.abs() <= fhi.abs() {
        lo
    } else {
        hi
    }
}

pub fn energy_j(domain: &Domain, u: &SpectralField, p: &ModelParams) -> f64 {
    Energies::of(domain, u, p).j(p)
}

pub fn nehari_i(domain: &Domain, u: &SpectralField, p: &ModelParams) -> f64 {
    Energies::of(domain, u, p).i(p)
}

pub fn nehari_i_delta(domain: &Domain, u: &SpectralField, delta: f64, p: &ModelParams) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("δ must be positive, got {delta}")));
    }
    Ok(Energies::of(domain, u, p).i_delta(delta, p))
}

/// The unique stationary point of `λ ↦ J(λu)`.
pub fn fiber_lambda_star(domain: &Domain, u: &SpectralField, p: &ModelParams) -> Result<f64> {
    Energies::of(domain, u, p).ray().lambda_star(p)
}

/// `λ(δ)` with `I_δ(λ(δ)u) = 0`.
pub fn fiber_lambda_delta(domain: &Domain, u: &SpectralField, delta: f64, p: &ModelParams) -> Result<f64> {
    Energies::of(domain, u, p).ray().lambda_delta(delta, p)
}

/// Coefficients of `L(u)`: `(a + b‖∇u‖₂²)·λ_k·c_k`. The duality pairing
/// `⟨L(u), v⟩` is the coefficient dot product with `v`.
pub fn apply_nonlocal_l(domain: &Domain, u: &SpectralField, p: &ModelParams) -> SpectralField {
    let m = p.kirchhoff(domain.h1_sq(u));
    SpectralField::from_vec_unchecked(
        domain.eigenvalues().iter().zip(u.coeffs()).map(|(l, c)| m * l * c).collect(),
    )
}

/// `⟨L(u) − L(v), u − v⟩`.
pub fn monotonicity_gap(domain: &Domain, u: &SpectralField, v: &SpectralField, p: &ModelParams) -> f64 {
    let lu = apply_nonlocal_l(domain, u, p);
    let lv = apply_nonlocal_l(domain, v, p);
    lu.axpy(-1.0, &lv).dot(&u.axpy(-1.0, v))
}

/// Lower bound the monotonicity gap must clear:
/// `a‖u−v‖²_{H₀¹} + (b/2)(‖∇u‖₂² − ‖∇v‖₂²)²`.
pub fn monotonicity_floor(domain: &Domain, u: &SpectralField, v: &SpectralField, p: &ModelParams) -> f64 {
    let diff = u.axpy(-1.0, v);
    let (au, av) = (domain.h1_sq(u), domain.h1_sq(v));
    p.a * domain.h1_sq(&diff) + 0.5 * p.b * (au - av).powi(2)
}

/// Gradient of `J` in coefficient space, `L(u) − Π(|u|^{q−1}u)`, together
/// with the energies at `u`. The flow is `ċ = −∇J(c)`.
pub fn energy_gradient(domain: &Domain, c: &[f64], p: &ModelParams) -> (Vec<f64>, Energies) {
    let h1_sq = domain.h1_sq_raw(c);
    let m = p.kirchhoff(h1_sq);
    let (lqp1, n) = domain.power_terms(c, p.q);
    let g = domain
        .eigenvalues()
        .iter()
        .zip(c)
        .zip(&n)
        .map(|((l, c), n)| m * l * c - n)
        .collect();
    let l2_sq = c.iter().map(|x| x * x).sum();
    (g, Energies { l2_sq, h1_sq, lqp1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use std::f64::consts::PI;

    fn sine(domain: &Domain) -> SpectralField {
        SpectralField::unit(domain.n_modes(), 0).scaled((PI / 2.0).sqrt())
    }

    fn dom() -> Domain {
        Domain::new(DomainSpec::interval(PI, 16)).unwrap()
    }

    #[test]
    fn rejects_q_at_most_three() {
        assert!(ModelParams::new(1.0, 1.0, 3.0).is_err());
        assert!(ModelParams::new(0.0, 1.0, 5.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 5.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 3.5).is_ok());
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let d = dom();
        let p = ModelParams::reference();
        assert_eq!(energy_j(&d, &d.zeros(), &p), 0.0);
        assert_eq!(nehari_i(&d, &d.zeros(), &p), 0.0);
        assert!(apply_nonlocal_l(&d, &d.zeros(), &p).is_zero());
    }

    #[test]
    fn sine_closed_forms() {
        let d = dom();
        let p = ModelParams::reference();
        let u = sine(&d);
        let j = PI / 4.0 + PI * PI / 16.0 - 5.0 * PI / 96.0;
        let i = PI / 2.0 + PI * PI / 4.0 - 5.0 * PI / 16.0;
        assert!((energy_j(&d, &u, &p) - j).abs() < 1e-12 * j);
        assert!((nehari_i(&d, &u, &p) - i).abs() < 1e-12 * i);
        assert!((j - 1.238624).abs() < 1e-6);
        assert!((i - 3.056450).abs() < 1e-6);
        let ih = nehari_i_delta(&d, &u, 0.5, &p).unwrap();
        let ih_exact = 0.5 * (PI / 2.0 + PI * PI / 4.0) - 5.0 * PI / 16.0;
        assert!((ih - ih_exact).abs() < 1e-12);
        assert!((ih - 1.037351).abs() < 1e-6);
        assert_eq!(nehari_i_delta(&d, &u, 1.0, &p).unwrap(), nehari_i(&d, &u, &p));
    }

    #[test]
    fn i_delta_requires_positive_delta() {
        let d = dom();
        let p = ModelParams::reference();
        assert!(matches!(nehari_i_delta(&d, &sine(&d), 0.0, &p), Err(Error::Domain(_))));
        assert!(matches!(fiber_lambda_delta(&d, &sine(&d), -1.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_star_matches_quadratic_oracle() {
        let d = dom();
        let p = ModelParams::reference();
        let u = sine(&d);
        // (5π/16) y² − (π²/4) y − π/2 = 0, y = λ²
        let (qa, qb, qc) = (5.0 * PI / 16.0, -PI * PI / 4.0, -PI / 2.0);
        let y = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        let ls = fiber_lambda_star(&d, &u, &p).unwrap();
        assert!((ls - y.sqrt()).abs() < 1e-10, "{ls} vs {}", y.sqrt());
        assert!((ls - 1.743459).abs() < 1e-6);
        assert!(nehari_i(&d, &u.scaled(ls), &p).abs() < 1e-10);
    }

    #[test]
    fn lambda_star_is_one_on_the_nehari_manifold() {
        let d = dom();
        let p = ModelParams::reference();
        let u = sine(&d);
        let ls = fiber_lambda_star(&d, &u, &p).unwrap();
        let v = u.scaled(ls);
        assert!((fiber_lambda_star(&d, &v, &p).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn lambda_delta_is_increasing_and_matches_star_at_one() {
        let d = dom();
        let p = ModelParams::reference();
        let u = sine(&d);
        let l1 = fiber_lambda_delta(&d, &u, 1.0, &p).unwrap();
        let lh = fiber_lambda_delta(&d, &u, 0.5, &p).unwrap();
        assert_eq!(l1, fiber_lambda_star(&d, &u, &p).unwrap());
        assert!(lh < l1);
        assert!(nehari_i_delta(&d, &u.scaled(lh), 0.5, &p).unwrap().abs() < 1e-10);
        // dense scan oracle: sign change of I_δ along the ray lies within one cell of lh
        let ray = Energies::of(&d, &u, &p).ray();
        let grid: Vec<f64> = (1..20000).map(|i| i as f64 * 1e-4).collect();
        let cross = grid.windows(2).find(|w| ray.i_delta_at(w[0], 0.5, &p) > 0.0 && ray.i_delta_at(w[1], 0.5, &p) <= 0.0).unwrap();
        assert!(cross[0] <= lh && lh <= cross[1]);
    }

    #[test]
    fn zero_field_has_no_fibering_root() {
        let d = dom();
        assert!(matches!(fiber_lambda_star(&d, &d.zeros(), &ModelParams::reference()), Err(Error::Domain(_))));
    }

    #[test]
    fn nonlocal_operator_on_first_mode() {
        let d = dom();
        let p = ModelParams::reference();
        let e1 = SpectralField::unit(d.n_modes(), 0);
        let l = apply_nonlocal_l(&d, &e1, &p);
        assert!((l.coeffs()[0] - 2.0).abs() < 1e-14);
        assert!(l.coeffs()[1..].iter().all(|c| *c == 0.0));
        // pairing against quadrature of (a + bA)∫u'v'
        let nodal_du: Vec<f64> = d.nodes(0).iter().map(|x| (2.0 / PI).sqrt() * x.cos()).collect();
        // u' = cos does not vanish at the ends, so the trapezoid needs the endpoint terms
        let ends = d.node_weight() * (2.0 / PI);
        let grad_pairing = d.node_weight() * nodal_du.iter().map(|v| v * v).sum::<f64>() + ends;
        assert!((2.0 * grad_pairing - l.dot(&e1)).abs() < 1e-12);
        let l2 = apply_nonlocal_l(&d, &e1.scaled(2.0), &p);
        assert!((l2.coeffs()[0] - 2.0 * l.coeffs()[0]).abs() > 1.0);
    }

    #[test]
    fn monotonicity_gap_examples() {
        let d = dom();
        let p = ModelParams::reference();
        let u = sine(&d);
        assert_eq!(monotonicity_gap(&d, &u, &u, &p), 0.0);
        let g = monotonicity_gap(&d, &u, &d.zeros(), &p);
        assert!((g - (PI / 2.0 + PI * PI / 4.0)).abs() < 1e-12);
        assert!((g - 4.038197).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = Domain::new(DomainSpec::interval(PI, 6)).unwrap();
        let p = ModelParams::new(1.3, 0.7, 5.0).unwrap();
        let c = vec![0.8, -0.3, 0.2, 0.1, -0.05, 0.02];
        let (g, _) = energy_gradient(&d, &c, &p);
        for k in 0..c.len() {
            let h = 1e-6;
            let mut cp = c.clone();
            cp[k] += h;
            let mut cm = c.clone();
            cm[k] -= h;
            let jp = energy_j(&d, &SpectralField::new(cp).unwrap(), &p);
            let jm = energy_j(&d, &SpectralField::new(cm).unwrap(), &p);
            let fd = (jp - jm) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * (1.0 + g[k].abs()), "k={k}: {fd} vs {}", g[k]);
        }
    }
}
