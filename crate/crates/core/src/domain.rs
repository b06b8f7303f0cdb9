//! Box domains with homogeneous Dirichlet conditions.
//!
//! Fields are stored as coefficients against the L²-orthonormal Dirichlet
//! eigenbasis of −Δ. On an interval of length `L` the basis is
//! `φ_k(x) = √(2/L) sin(kπx/L)` with eigenvalue `(kπ/L)²`; rectangles use
//! tensor products. Nodal values live on the uniform interior grid
//! `x_j = jL/(n_quad+1)`, where the trapezoid rule (endpoint values vanish)
//! integrates every trigonometric polynomial of frequency below
//! `2(n_quad+1)` exactly. Products of two basis functions are therefore
//! integrated exactly whenever `n_quad ≥ n_modes`, and the degree-`(q+1)`
//! integrand of the nonlinear energy is exact for odd integer `q` once
//! `2(n_quad+1) > (q+1)·n_modes`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainKind {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Modes per axis.
    pub n_modes: usize,
    /// Quadrature points per axis.
    pub n_quad: usize,
}

impl DomainSpec {
    /// Interval `(0, length)` with the default quadrature `3·n_modes + 2`,
    /// which integrates the quintic nonlinearity without aliasing.
    pub fn interval(length: f64, n_modes: usize) -> Self {
        Self {
            kind: DomainKind::Interval { length },
            n_modes,
            n_quad: default_quad(n_modes),
        }
    }

    pub fn rectangle(lx: f64, ly: f64, n_modes: usize) -> Self {
        Self {
            kind: DomainKind::Rectangle { lx, ly },
            n_modes,
            n_quad: default_quad(n_modes),
        }
    }

    pub fn with_quad(mut self, n_quad: usize) -> Self {
        self.n_quad = n_quad;
        self
    }

    /// Same geometry with `factor` times as many modes (and matching quadrature).
    pub fn refined(&self, factor: usize) -> Self {
        let n_modes = self.n_modes * factor;
        Self {
            kind: self.kind,
            n_modes,
            n_quad: self.n_quad.max(default_quad(n_modes)).max(self.n_quad * factor),
        }
    }

    fn validate(&self) -> Result<()> {
        let lengths: Vec<f64> = match self.kind {
            DomainKind::Interval { length } => vec![length],
            DomainKind::Rectangle { lx, ly } => vec![lx, ly],
        };
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config(format!("domain lengths must be positive and finite, got {lengths:?}")));
        }
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be positive".into()));
        }
        if self.n_quad < 2 * self.n_modes + 2 {
            return Err(Error::Config(format!(
                "n_quad = {} is below the dealiasing minimum 2·n_modes + 2 = {}",
                self.n_quad,
                2 * self.n_modes + 2
            )));
        }
        Ok(())
    }
}

fn default_quad(n_modes: usize) -> usize {
    3 * n_modes + 2
}

/// An H₀¹ field as coefficients over the sorted eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    /// Rejects non-finite coefficients.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Config(format!("coefficient {i} is not finite")));
        }
        Ok(Self { coeffs })
    }

    /// Unit coefficient on mode `index` (0-based in sorted order).
    pub fn unit(n: usize, index: usize) -> Self {
        let mut coeffs = vec![0.0; n];
        coeffs[index] = 1.0;
        Self { coeffs }
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| s * c).collect() }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + s * y).collect(),
        }
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x * y).sum()
    }

    /// Σ c_k² (the squared L² norm by Parseval).
    pub fn sum_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    /// 1-based wavenumber along x.
    pub kx: usize,
    /// 1-based wavenumber along y; 0 on intervals.
    pub ky: usize,
}

#[derive(Debug, Clone)]
struct Axis {
    length: f64,
    n_modes: usize,
    n_quad: usize,
    weight: f64,
    nodes: Vec<f64>,
    /// Row-major `n_quad × n_modes`, entry `(j, k)` = φ_{k+1}(x_j).
    basis: Vec<f64>,
}

impl Axis {
    fn new(length: f64, n_modes: usize, n_quad: usize) -> Self {
        let h = length / (n_quad as f64 + 1.0);
        let nodes: Vec<f64> = (1..=n_quad).map(|j| j as f64 * h).collect();
        let norm = (2.0 / length).sqrt();
        let mut basis = vec![0.0; n_quad * n_modes];
        for (j, row) in basis.chunks_mut(n_modes).enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                let arg = std::f64::consts::PI * ((k + 1) * (j + 1)) as f64 / (n_quad as f64 + 1.0);
                *v = norm * arg.sin();
            }
        }
        Self { length, n_modes, n_quad, weight: h, nodes, basis }
    }

    fn eigenvalue(&self, k: usize) -> f64 {
        let w = k as f64 * std::f64::consts::PI / self.length;
        w * w
    }
}

/// A prepared domain: sorted eigenvalues, quadrature and nodal basis tables.
///
/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone)]
pub struct Domain {
    spec: DomainSpec,
    axes: Vec<Axis>,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    /// Position of each sorted mode in the row-major `(kx, ky)` coefficient grid.
    grid_index: Vec<usize>,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let axes = match spec.kind {
            DomainKind::Interval { length } => vec![Axis::new(length, spec.n_modes, spec.n_quad)],
            DomainKind::Rectangle { lx, ly } => vec![
                Axis::new(lx, spec.n_modes, spec.n_quad),
                Axis::new(ly, spec.n_modes, spec.n_quad),
            ],
        };
        let mut entries: Vec<(f64, Mode, usize)> = match axes.as_slice() {
            [x] => (1..=x.n_modes).map(|k| (x.eigenvalue(k), Mode { kx: k, ky: 0 }, k - 1)).collect(),
            [x, y] => {
                let mut v = Vec::with_capacity(x.n_modes * y.n_modes);
                for kx in 1..=x.n_modes {
                    for ky in 1..=y.n_modes {
                        v.push((
                            x.eigenvalue(kx) + y.eigenvalue(ky),
                            Mode { kx, ky },
                            (kx - 1) * y.n_modes + (ky - 1),
                        ));
                    }
                }
                v
            }
            _ => unreachable!(),
        };
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.kx.cmp(&b.1.kx)).then(a.1.ky.cmp(&b.1.ky)));
        Ok(Self {
            spec,
            axes,
            eigenvalues: entries.iter().map(|e| e.0).collect(),
            modes: entries.iter().map(|e| e.1).collect(),
            grid_index: entries.iter().map(|e| e.2).collect(),
        })
    }

    /// `(0, π)` with 64 modes.
    pub fn default_interval() -> Self {
        Self::new(DomainSpec::interval(std::f64::consts::PI, 64)).expect("default domain is valid")
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Number of basis functions (coefficients per field).
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of nodal values per field.
    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n_quad).product()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// First Dirichlet eigenvalue of −Δ.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// |Ω|.
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    /// Per-axis quadrature nodes.
    pub fn nodes(&self, axis: usize) -> &[f64] {
        &self.axes[axis].nodes
    }

    /// The (uniform) quadrature weight of every node.
    pub fn node_weight(&self) -> f64 {
        self.axes.iter().map(|a| a.weight).product()
    }

    pub fn zeros(&self) -> SpectralField {
        SpectralField::zeros(self.n_modes())
    }

    fn check_field(&self, u: &SpectralField) -> Result<()> {
        if u.len() != self.n_modes() {
            return Err(Error::Config(format!(
                "field has {} coefficients, domain has {} modes",
                u.len(),
                self.n_modes()
            )));
        }
        Ok(())
    }

    /// Nodal values on the quadrature grid (row-major over axes).
    pub fn synthesize(&self, u: &SpectralField) -> Result<Vec<f64>> {
        self.check_field(u)?;
        Ok(self.synthesize_raw(u.coeffs()))
    }

    pub(crate) fn synthesize_raw(&self, c: &[f64]) -> Vec<f64> {
        match self.axes.as_slice() {
            [x] => {
                let nm = x.n_modes;
                x.basis
                    .chunks(nm)
                    .map(|row| row.iter().zip(c).map(|(b, c)| b * c).sum())
                    .collect()
            }
            [x, y] => {
                let mut grid = vec![0.0; x.n_modes * y.n_modes];
                for (pos, v) in self.grid_index.iter().zip(c) {
                    grid[*pos] = *v;
                }
                // t[i][ky] = Σ_kx Bx[i][kx] C[kx][ky]
                let mut t = vec![0.0; x.n_quad * y.n_modes];
                for i in 0..x.n_quad {
                    let brow = &x.basis[i * x.n_modes..(i + 1) * x.n_modes];
                    let trow = &mut t[i * y.n_modes..(i + 1) * y.n_modes];
                    for (kx, b) in brow.iter().enumerate() {
                        if *b == 0.0 {
                            continue;
                        }
                        let crow = &grid[kx * y.n_modes..(kx + 1) * y.n_modes];
                        for (tv, cv) in trow.iter_mut().zip(crow) {
                            *tv += b * cv;
                        }
                    }
                }
                let mut out = vec![0.0; x.n_quad * y.n_quad];
                for i in 0..x.n_quad {
                    let trow = &t[i * y.n_modes..(i + 1) * y.n_modes];
                    for j in 0..y.n_quad {
                        let brow = &y.basis[j * y.n_modes..(j + 1) * y.n_modes];
                        out[i * y.n_quad + j] = trow.iter().zip(brow).map(|(a, b)| a * b).sum();
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Quadrature projection of nodal values onto the eigenbasis.
    pub fn analyze(&self, nodal: &[f64]) -> Result<SpectralField> {
        if nodal.len() != self.n_nodes() {
            return Err(Error::Config(format!(
                "expected {} nodal values, got {}",
                self.n_nodes(),
                nodal.len()
            )));
        }
        Ok(SpectralField::from_vec_unchecked(self.analyze_raw(nodal)))
    }

    /// `∫ f φ_k` for every mode, with `f` given at the nodes.
    pub(crate) fn analyze_raw(&self, nodal: &[f64]) -> Vec<f64> {
        let w = self.node_weight();
        match self.axes.as_slice() {
            [x] => {
                let nm = x.n_modes;
                let mut out = vec![0.0; nm];
                for (row, f) in x.basis.chunks(nm).zip(nodal) {
                    if *f == 0.0 {
                        continue;
                    }
                    for (o, b) in out.iter_mut().zip(row) {
                        *o += b * f;
                    }
                }
                out.iter_mut().for_each(|o| *o *= w);
                out
            }
            [x, y] => {
                // s[i][ky] = Σ_j F[i][j] By[j][ky]
                let mut s = vec![0.0; x.n_quad * y.n_modes];
                for i in 0..x.n_quad {
                    let srow = &mut s[i * y.n_modes..(i + 1) * y.n_modes];
                    for j in 0..y.n_quad {
                        let f = nodal[i * y.n_quad + j];
                        if f == 0.0 {
                            continue;
                        }
                        let brow = &y.basis[j * y.n_modes..(j + 1) * y.n_modes];
                        for (sv, b) in srow.iter_mut().zip(brow) {
                            *sv += f * b;
                        }
                    }
                }
                let mut grid = vec![0.0; x.n_modes * y.n_modes];
                for i in 0..x.n_quad {
                    let brow = &x.basis[i * x.n_modes..(i + 1) * x.n_modes];
                    let srow = &s[i * y.n_modes..(i + 1) * y.n_modes];
                    for (kx, b) in brow.iter().enumerate() {
                        let grow = &mut grid[kx * y.n_modes..(kx + 1) * y.n_modes];
                        for (g, sv) in grow.iter_mut().zip(srow) {
                            *g += b * sv;
                        }
                    }
                }
                self.grid_index.iter().map(|&p| grid[p] * w).collect()
            }
            _ => unreachable!(),
        }
    }

    /// ‖u‖₂² by Parseval.
    pub fn l2_sq(&self, u: &SpectralField) -> f64 {
        u.sum_sq()
    }

    /// ‖∇u‖₂² = Σ λ_k c_k².
    pub fn h1_sq(&self, u: &SpectralField) -> f64 {
        self.h1_sq_raw(u.coeffs())
    }

    pub(crate) fn h1_sq_raw(&self, c: &[f64]) -> f64 {
        self.eigenvalues.iter().zip(c).map(|(l, c)| l * c * c).sum()
    }

    pub fn norm_l2(&self, u: &SpectralField) -> f64 {
        self.l2_sq(u).sqrt()
    }

    /// ‖∇u‖₂, the H₀¹ norm.
    pub fn norm_h1(&self, u: &SpectralField) -> f64 {
        self.h1_sq(u).sqrt()
    }

    /// ∫|u|^p by quadrature.
    pub fn lp_pow(&self, u: &SpectralField, p: f64) -> Result<f64> {
        self.check_field(u)?;
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("Lebesgue exponent must be ≥ 1, got {p}")));
        }
        let nodal = self.synthesize_raw(u.coeffs());
        Ok(self.node_weight() * nodal.iter().map(|v| v.abs().powf(p)).sum::<f64>())
    }

    /// ‖u‖_p.
    pub fn norm_lp(&self, u: &SpectralField, p: f64) -> Result<f64> {
        Ok(self.lp_pow(u, p)?.powf(1.0 / p))
    }

    /// `(∫|u|^{q+1}, [∫|u|^{q−1}u φ_k]_k)` from a single synthesis.
    pub(crate) fn power_terms(&self, c: &[f64], q: f64) -> (f64, Vec<f64>) {
        let mut nodal = self.synthesize_raw(c);
        let mut total = 0.0;
        let odd_int = q == 5.0;
        for v in nodal.iter_mut() {
            let x = *v;
            let (pow_qp1, pow_q) = if odd_int {
                let x2 = x * x;
                let x4 = x2 * x2;
                (x4 * x2, x4 * x)
            } else {
                let ax = x.abs();
                let p = ax.powf(q);
                (p * ax, p.copysign(x))
            };
            total += pow_qp1;
            *v = pow_q;
        }
        (total * self.node_weight(), self.analyze_raw(&nodal))
    }

    /// ∫|u|^{q+1} only.
    pub(crate) fn lqp1_raw(&self, c: &[f64], q: f64) -> f64 {
        let nodal = self.synthesize_raw(c);
        let s: f64 = if q == 5.0 {
            nodal.iter().map(|x| { let x2 = x * x; x2 * x2 * x2 }).sum()
        } else {
            nodal.iter().map(|x| x.abs().powf(q + 1.0)).sum()
        };
        s * self.node_weight()
    }

    /// Coefficients of a function given pointwise, by quadrature projection.
    pub fn project_fn<F: Fn(&[f64]) -> f64>(&self, f: F) -> SpectralField {
        let nodal: Vec<f64> = match self.axes.as_slice() {
            [x] => x.nodes.iter().map(|&xi| f(&[xi])).collect(),
            [x, y] => {
                let mut v = Vec::with_capacity(x.n_quad * y.n_quad);
                for &xi in &x.nodes {
                    for &yj in &y.nodes {
                        v.push(f(&[xi, yj]));
                    }
                }
                v
            }
            _ => unreachable!(),
        };
        SpectralField::from_vec_unchecked(self.analyze_raw(&nodal))
    }

    /// Evaluate a field at an arbitrary point by direct summation.
    pub fn eval_at(&self, u: &SpectralField, point: &[f64]) -> f64 {
        let mut s = 0.0;
        for (m, c) in self.modes.iter().zip(u.coeffs()) {
            let mut v = *c;
            let x = &self.axes[0];
            v *= (2.0 / x.length).sqrt() * (m.kx as f64 * std::f64::consts::PI * point[0] / x.length).sin();
            if let Some(y) = self.axes.get(1) {
                v *= (2.0 / y.length).sqrt() * (m.ky as f64 * std::f64::consts::PI * point[1] / y.length).sin();
            }
            s += v;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interval(n: usize) -> Domain {
        Domain::new(DomainSpec::interval(PI, n)).unwrap()
    }

    #[test]
    fn interval_eigenvalues_are_squares() {
        let d = interval(8);
        for (k, l) in d.eigenvalues().iter().enumerate() {
            assert!((l - ((k + 1) * (k + 1)) as f64).abs() < 1e-12);
        }
        assert!((d.lambda1() - 1.0).abs() < 1e-14);
        assert!((d.measure() - PI).abs() < 1e-15);
    }

    #[test]
    fn rectangle_first_eigenvalue_is_two() {
        let d = Domain::new(DomainSpec::rectangle(PI, PI, 4)).unwrap();
        assert_eq!(d.modes()[0], Mode { kx: 1, ky: 1 });
        assert!((d.lambda1() - 2.0).abs() < 1e-12);
        assert!(d.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        assert!((d.measure() - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(Domain::new(DomainSpec::interval(-1.0, 4)), Err(Error::Config(_))));
        assert!(matches!(Domain::new(DomainSpec::interval(1.0, 0)), Err(Error::Config(_))));
        assert!(matches!(Domain::new(DomainSpec::interval(1.0, 8).with_quad(10)), Err(Error::Config(_))));
    }

    #[test]
    fn unit_field_reproduces_first_eigenfunction() {
        let d = interval(16);
        let u = SpectralField::unit(16, 0);
        let nodal = d.synthesize(&u).unwrap();
        for (x, v) in d.nodes(0).iter().zip(&nodal) {
            assert!((v - (2.0 / PI).sqrt() * x.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_has_zero_nodal_values() {
        let d = interval(8);
        assert!(d.synthesize(&d.zeros()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn size_mismatch_is_config_error() {
        let d = interval(8);
        assert!(matches!(d.synthesize(&SpectralField::zeros(7)), Err(Error::Config(_))));
        assert!(matches!(d.analyze(&[0.0; 3]), Err(Error::Config(_))));
    }

    #[test]
    fn quadrature_is_exact_for_basis_products() {
        let d = interval(12);
        for j in 0..12 {
            let nodal = d.synthesize(&SpectralField::unit(12, j)).unwrap();
            let back = d.analyze(&nodal).unwrap();
            for (k, c) in back.coeffs().iter().enumerate() {
                let expect = if k == j { 1.0 } else { 0.0 };
                assert!((c - expect).abs() < 1e-13, "({j},{k}) -> {c}");
            }
        }
    }

    #[test]
    fn sine_norms_match_closed_forms() {
        // u = sin x = √(π/2) φ₁
        let d = interval(8);
        let u = SpectralField::unit(8, 0).scaled((PI / 2.0).sqrt());
        assert!((d.l2_sq(&u) - PI / 2.0).abs() < 1e-14);
        assert!((d.h1_sq(&u) - PI / 2.0).abs() < 1e-14);
        assert!((d.lp_pow(&u, 6.0).unwrap() - 5.0 * PI / 16.0).abs() < 1e-13);
        assert!((d.norm_lp(&u, 2.0).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn lp_rejects_small_exponent() {
        let d = interval(4);
        assert!(matches!(d.lp_pow(&d.zeros(), 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rectangle_round_trip() {
        let d = Domain::new(DomainSpec::rectangle(1.0, 2.0, 5)).unwrap();
        let u = SpectralField::new((0..25).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect()).unwrap();
        let back = d.analyze(&d.synthesize(&u).unwrap()).unwrap();
        for (a, b) in u.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = [0.3, 1.1];
        let nodal_sum = d.eval_at(&u, &p);
        assert!(nodal_sum.is_finite());
    }

    #[test]
    fn power_terms_match_separate_evaluation() {
        let d = interval(6);
        let u = SpectralField::new(vec![0.5, -0.2, 0.1, 0.0, 0.05, -0.01]).unwrap();
        let (p, n) = d.power_terms(u.coeffs(), 5.0);
        assert!((p - d.lp_pow(&u, 6.0).unwrap()).abs() < 1e-14);
        // N · u = ∫|u|^{q+1}
        let dot: f64 = n.iter().zip(u.coeffs()).map(|(a, b)| a * b).sum();
        assert!((dot - p).abs() < 1e-14);
        let (p2, _) = d.power_terms(u.coeffs(), 5.5);
        assert!((p2 - d.lp_pow(&u, 6.5).unwrap()).abs() < 1e-14);
    }
}
