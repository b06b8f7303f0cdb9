//! The potential-well landscape on a discrete mode set: optimal embedding
//! constant, depth `d`, the depth curve `d(δ)`, radii `r(δ)`, the δ-roots
//! of `d(δ) = J0`, and sampled bounds on `N_s`.
//!
//! Every quantity is a scale-invariant function of the direction, so all
//! optimizations run on the H₀¹ unit sphere (see [`crate::optimize`]).
//!
//! Along a direction, `J(λ(δ)u)` depends only on `ρ = P/A^{(q+1)/2}`. For
//! `δ ≤ (q+1)/4` it decreases in `ρ`, so the minimizer is the embedding
//! maximizer; beyond that threshold small `ρ` (high frequencies) wins and
//! the discrete `d(δ)` drops by many orders of magnitude. Both extremal-ratio
//! directions are critical points of every `J(λ(δ)·)`, so they serve as
//! anchors for each `d(δ)` evaluation, and [`DeltaRoots`] flags a root that
//! lands on the drop.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, SpectralField};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, map_slice, Execution};
use crate::functionals::{Energies, ModelParams, Ray};
use crate::optimize::{minimize_on_sphere, DescentSettings, SphereObjective};
use crate::sampling::{random_low_mode, random_field, rng_for};

#[derive(Debug, Clone, Copy)]
pub struct GeometrySettings {
    /// Random low-mode starts per optimization, on top of the structural ones.
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub exec: Execution,
    /// Recompute `d` on twice the modes to size the critical band.
    pub refine: bool,
}

impl Default for GeometrySettings {
    fn default() -> Self {
        Self { restarts: 6, max_iters: 4000, seed: 0x5eed, exec: Execution::Parallel, refine: true }
    }
}

impl GeometrySettings {
    fn descent(&self) -> DescentSettings {
        DescentSettings { max_iters: self.max_iters, ..DescentSettings::default() }
    }
}

/// `‖u‖_{q+1} ≤ S ‖∇u‖₂` on the mode set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub s_est: f64,
    /// H₀¹-normalized maximizer.
    pub maximizer: SpectralField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub n_modes_fine: usize,
    pub d_fine: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WellGeometry {
    pub n_modes: usize,
    pub s_est: f64,
    pub d_est: f64,
    pub d_lower: f64,
    pub d_curve: Vec<(f64, f64)>,
    /// First sampled `δ > 1` with `d(δ) ≤ 0`, refined by bisection.
    pub delta_tilde: Option<f64>,
    /// Attains `d_est`; lies on the Nehari manifold.
    pub minimizer: SpectralField,
    /// H₀¹-normalized direction minimizing `‖u‖_{q+1}^{q+1}/‖∇u‖₂^{q+1}`.
    pub low_ratio_direction: SpectralField,
    pub refinement: Option<Refinement>,
}

/// Sampled estimates of `inf`/`sup ‖u‖₂` over `N ∩ {J < s}`. Inner
/// approximations: `lambda_s_est ≥ λ_s` and `big_lambda_s_est ≤ Λ_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighEnergyBounds {
    pub s: f64,
    pub lambda_s_est: f64,
    #[serde(rename = "Lambda_s_est")]
    pub big_lambda_s_est: f64,
    pub n_samples: usize,
    pub n_accepted: usize,
    /// Estimated constant in `‖u‖_{q+1}^{q+1} ≤ C ‖∇u‖₂^{n(q−1)/2} ‖u‖₂^{q+1−n(q−1)/2}`.
    pub gn_constant: f64,
    /// Smallest per-sample lower bound on `‖u‖₂` implied by `C` on `N`.
    pub gn_lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormThresholdReport {
    pub delta: f64,
    pub r_delta: f64,
    pub n_samples: usize,
    pub n_negative: usize,
    pub n_inside: usize,
    /// Samples with `I_δ < −tol` and `‖∇u‖₂ ≤ r(δ)`.
    pub violations: usize,
    /// Smallest `‖∇u‖₂` among samples with `I_δ < 0` (∞ if none).
    pub min_norm_negative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRoots {
    pub delta1: f64,
    pub delta2: f64,
    pub residual1: f64,
    pub residual2: f64,
    /// `δ₂` sits on the high-frequency drop of `d(δ)` near `(q+1)/4`, where
    /// no δ attains `J0` and the residual is the jump height.
    pub delta2_at_jump: bool,
}

// ---------------------------------------------------------------------------
// objectives

/// `sign·(−ln P/(q+1) + ln A/2)`; `sign = 1` maximizes the embedding ratio,
/// `sign = −1` minimizes it.
struct SobolevObjective<'a> {
    domain: &'a Domain,
    q: f64,
    sign: f64,
}

impl SphereObjective for SobolevObjective<'_> {
    fn value_grad(&self, c: &[f64]) -> Option<(f64, Vec<f64>)> {
        let a = self.domain.h1_sq_raw(c);
        let (p, n) = self.domain.power_terms(c, self.q);
        if !(a > 0.0 && p > 0.0) {
            return None;
        }
        let f = -p.ln() / (self.q + 1.0) + 0.5 * a.ln();
        let g = self
            .domain
            .eigenvalues()
            .iter()
            .zip(c)
            .zip(&n)
            .map(|((l, c), n)| self.sign * (-n / p + l * c / a))
            .collect();
        Some((self.sign * f, g))
    }
}

/// `c ↦ J(λ(δ)c)` with the implicit-function gradient through `λ(δ)`.
struct FiberObjective<'a> {
    domain: &'a Domain,
    p: ModelParams,
    delta: f64,
}

impl SphereObjective for FiberObjective<'_> {
    fn value_grad(&self, c: &[f64]) -> Option<(f64, Vec<f64>)> {
        let a = self.domain.h1_sq_raw(c);
        let (pw, n) = self.domain.power_terms(c, self.p.q);
        if !(a > 0.0 && pw > 0.0) {
            return None;
        }
        let ray = Ray { h1_sq: a, lqp1: pw };
        let lam = ray.lambda_delta(self.delta, &self.p).ok()?;
        let (pa, pb, q, d) = (self.p.a, self.p.b, self.p.q, self.delta);
        let value = ray.j_at(lam, &self.p);
        // F(λ, A, P) = I_δ(λu)/λ² = 0 defines λ(A, P).
        let f_l = 2.0 * d * pb * lam * a * a - (q - 1.0) * lam.powf(q - 2.0) * pw;
        let f_a = d * (pa + 2.0 * pb * lam * lam * a);
        let f_p = -lam.powf(q - 1.0);
        let l2 = lam * lam;
        let jr_l = pa * lam * a + pb * l2 * lam * a * a - lam.powf(q) * pw;
        let jr_a = 0.5 * pa * l2 + 0.5 * pb * l2 * l2 * a;
        let jr_p = -lam.powf(q + 1.0) / (q + 1.0);
        let g_a = jr_a - jr_l * f_a / f_l;
        let g_p = jr_p - jr_l * f_p / f_l;
        let grad = self
            .domain
            .eigenvalues()
            .iter()
            .zip(c)
            .zip(&n)
            .map(|((l, c), n)| g_a * 2.0 * l * c + g_p * (q + 1.0) * n)
            .collect();
        value.is_finite().then_some((value, grad))
    }
}

/// `−ln P + β ln A + (α/2) ln ‖u‖₂²`, whose infimum is `−ln C_GN`.
struct GnObjective<'a> {
    domain: &'a Domain,
    q: f64,
    beta: f64,
    alpha: f64,
}

impl SphereObjective for GnObjective<'_> {
    fn value_grad(&self, c: &[f64]) -> Option<(f64, Vec<f64>)> {
        let a = self.domain.h1_sq_raw(c);
        let l = c.iter().map(|x| x * x).sum::<f64>();
        let (p, n) = self.domain.power_terms(c, self.q);
        if !(a > 0.0 && p > 0.0 && l > 0.0) {
            return None;
        }
        let f = -p.ln() + self.beta * a.ln() + 0.5 * self.alpha * l.ln();
        let g = self
            .domain
            .eigenvalues()
            .iter()
            .zip(c)
            .zip(&n)
            .map(|((lk, c), n)| -(self.q + 1.0) * n / p + self.beta * 2.0 * lk * c / a + self.alpha * c / l)
            .collect();
        Some((f, g))
    }
}

fn gn_exponents(domain: &Domain, q: f64) -> (f64, f64) {
    let n = domain.dim() as f64;
    (n * (q - 1.0) / 4.0, q + 1.0 - n * (q - 1.0) / 2.0)
}

// ---------------------------------------------------------------------------
// multi-start driver

fn first_mode(domain: &Domain) -> Vec<f64> {
    SpectralField::unit(domain.n_modes(), 0).into_coeffs()
}

struct Best {
    value: f64,
    point: Vec<f64>,
}

/// `extra`, then `restarts` random low-mode mixtures.
fn start_set(domain: &Domain, settings: &GeometrySettings, stream: u64, extra: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut starts = extra.to_vec();
    for i in 0..settings.restarts {
        let mut rng = rng_for(settings.seed, stream * 1_000 + i as u64);
        starts.push(random_low_mode(domain, &mut rng, 8, 2.0).into_coeffs());
    }
    starts
}

/// Runs every start and keeps the lowest value. A start that exhausts its
/// budget still contributes its best iterate (any direction bounds the
/// infimum from above); at least one start must converge.
fn multi_start<O: SphereObjective>(
    domain: &Domain,
    obj: &O,
    starts: &[Vec<f64>],
    settings: &GeometrySettings,
    what: &str,
) -> Result<Best> {
    let runs = map_slice(settings.exec, starts, |s| minimize_on_sphere(domain, obj, s, settings.descent(), what));
    let mut best: Option<Best> = None;
    let mut any_converged = false;
    let mut stalled: Option<Error> = None;
    for run in runs {
        let (value, point) = match run {
            Ok(r) => {
                any_converged = true;
                (r.value, r.point)
            }
            Err(Error::NonConvergence { best_value, best, iterations, grad_norm, what }) => {
                let cand = (best_value, best.clone());
                if stalled.as_ref().is_none_or(|e| matches!(e, Error::NonConvergence { best_value: v, .. } if best_value < *v)) {
                    stalled = Some(Error::NonConvergence { what, iterations, best_value, grad_norm, best });
                }
                cand
            }
            Err(_) => continue,
        };
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Best { value, point });
        }
    }
    match (best, any_converged) {
        (Some(b), true) => Ok(b),
        _ => Err(stalled.unwrap_or_else(|| Error::Domain(format!("{what}: objective undefined at every start")))),
    }
}

// ---------------------------------------------------------------------------
// operations

/// Largest `‖u‖_{q+1}/‖∇u‖₂` over the mode set.
pub fn estimate_sobolev_constant(domain: &Domain, q: f64, settings: &GeometrySettings) -> Result<SobolevEstimate> {
    if !(q > 3.0) {
        return Err(Error::Domain(format!("q must exceed 3, got {q}")));
    }
    let obj = SobolevObjective { domain, q, sign: 1.0 };
    let starts = start_set(domain, settings, 1, &[first_mode(domain)]);
    let best = multi_start(domain, &obj, &starts, settings, "embedding constant")?;
    Ok(SobolevEstimate { s_est: (-best.value).exp(), maximizer: SpectralField::from_vec_unchecked(best.point) })
}

/// Direction of smallest `‖u‖_{q+1}/‖∇u‖₂`, started from the top modes.
pub fn estimate_low_ratio_direction(domain: &Domain, q: f64, settings: &GeometrySettings) -> Result<SpectralField> {
    let n = domain.n_modes();
    let obj = SobolevObjective { domain, q, sign: -1.0 };
    let starts: Vec<_> = (n.saturating_sub(3)..n).rev().map(|k| SpectralField::unit(n, k).into_coeffs()).collect();
    let local = GeometrySettings { restarts: 0, ..*settings };
    // only an anchor: an unconverged best iterate is still usable
    let point = match multi_start(domain, &obj, &starts, &local, "smallest embedding ratio") {
        Ok(b) => b.point,
        Err(Error::NonConvergence { best, .. }) => best,
        Err(e) => return Err(e),
    };
    Ok(SpectralField::from_vec_unchecked(point))
}

/// `a(q−1)/(2(q+1))·(a/S^{q+1})^{2/(q−1)} + b(q−3)/(4(q+1))·(a/S^{q+1})^{4/(q−1)}`.
pub fn depth_lower_bound(p: &ModelParams, s: f64) -> f64 {
    let t = p.a / s.powf(p.q + 1.0);
    p.a * (p.q - 1.0) / (2.0 * (p.q + 1.0)) * t.powf(2.0 / (p.q - 1.0))
        + p.b * (p.q - 3.0) / (4.0 * (p.q + 1.0)) * t.powf(4.0 / (p.q - 1.0))
}

/// `r(δ) = (δb/S^{q+1})^{1/(q−3)}`.
pub fn r_delta(delta: f64, p: &ModelParams, s: f64) -> f64 {
    (delta * p.b / s.powf(p.q + 1.0)).powf(1.0 / (p.q - 3.0))
}

fn on_fiber(domain: &Domain, dir: &[f64], delta: f64, p: &ModelParams) -> Result<SpectralField> {
    let ray = Ray { h1_sq: domain.h1_sq_raw(dir), lqp1: domain.lqp1_raw(dir, p.q) };
    let lam = ray.lambda_delta(delta, p)?;
    Ok(SpectralField::from_vec_unchecked(dir.iter().map(|c| lam * c).collect()))
}

/// `d = inf_N J`, with the minimizer scaled onto the Nehari manifold.
pub fn compute_depth(domain: &Domain, p: &ModelParams, settings: &GeometrySettings) -> Result<(f64, SpectralField)> {
    let obj = FiberObjective { domain, p: *p, delta: 1.0 };
    let starts = start_set(domain, settings, 2, &[first_mode(domain)]);
    let best = multi_start(domain, &obj, &starts, settings, "depth")?;
    let u = on_fiber(domain, &best.point, 1.0, p)?;
    Ok((best.value, u))
}

/// `d(δ) = inf_{N_δ} J` from the given anchors, the first eigenfunction
/// (when `n_random > 0`) and `n_random` random starts. Returns the value and
/// the minimizing direction.
pub fn d_delta(
    domain: &Domain,
    p: &ModelParams,
    delta: f64,
    anchors: &[Vec<f64>],
    n_random: usize,
    settings: &GeometrySettings,
) -> Result<(f64, Vec<f64>)> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("δ must be positive, got {delta}")));
    }
    let mut extra = anchors.to_vec();
    if n_random > 0 {
        extra.push(first_mode(domain));
    }
    let local = GeometrySettings { restarts: n_random, exec: Execution::Sequential, ..*settings };
    let starts = start_set(domain, &local, 3 + delta.to_bits() % 1_000_003, &extra);
    let obj = FiberObjective { domain, p: *p, delta };
    let best = multi_start(domain, &obj, &starts, &local, "depth curve")?;
    Ok((best.value, best.point))
}

/// Logarithmic grid on `[0.05, 1]` and `[1, delta_max]`, containing 1.
pub fn default_delta_grid(delta_max: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..10).map(|i| (0.05f64.ln() * (1.0 - i as f64 / 10.0)).exp()).collect();
    g.push(1.0);
    let m = 10;
    g.extend((1..=m).map(|i| (delta_max.ln() * i as f64 / m as f64).exp()));
    g
}

/// Samples `d(δ)` on `grid` (in parallel over δ), warm-started from `anchors`.
pub fn d_delta_curve(
    domain: &Domain,
    p: &ModelParams,
    grid: &[f64],
    anchors: &[SpectralField],
    settings: &GeometrySettings,
) -> Result<Vec<(f64, f64)>> {
    if grid.iter().any(|d| !(*d > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("δ grid must be positive and strictly increasing".into()));
    }
    let anchors: Vec<_> = anchors.iter().map(|a| a.coeffs().to_vec()).collect();
    let n_random = settings.restarts / 2;
    let vals = map_slice(settings.exec, grid, |&d| d_delta(domain, p, d, &anchors, n_random, settings));
    grid.iter().zip(vals).map(|(&d, v)| v.map(|(val, _)| (d, val))).collect()
}

/// Bisection on `[lo, hi]` with `f(lo) > 0 ≥ f(hi)` (either orientation of
/// `lo`, `hi` on the line), to relative width `tol`.
fn bisect_sign<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    for _ in 0..200 {
        if (hi - lo).abs() <= tol * lo.abs().max(hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The two roots of `d(δ) = J0` on either side of `δ = 1`, bracketed from
/// the sampled curve and refined with `eval`.
pub fn find_delta_roots<F: Fn(f64) -> Result<f64>>(
    j0: f64,
    d_est: f64,
    curve: &[(f64, f64)],
    eval: F,
) -> Result<DeltaRoots> {
    if !(j0 > 0.0 && j0 < d_est) {
        return Err(Error::Domain(format!("J0 = {j0} must lie in (0, d = {d_est})")));
    }
    let g = |d: f64| -> Result<f64> { Ok(eval(d)? - j0) };
    let left: Vec<_> = curve.iter().filter(|(d, _)| *d <= 1.0).copied().collect();
    let right: Vec<_> = curve.iter().filter(|(d, _)| *d >= 1.0).copied().collect();

    // increasing branch: lo has d < J0, hi has d ≥ J0
    let (mut lo, mut hi) = (f64::NAN, 1.0);
    for w in left.windows(2) {
        if w[0].1 < j0 && w[1].1 >= j0 {
            (lo, hi) = (w[0].0, w[1].0);
        }
    }
    if lo.is_nan() {
        let mut x = left.first().map_or(1.0, |p| p.0);
        hi = x;
        for _ in 0..200 {
            x *= 0.5;
            if g(x)? < 0.0 {
                break;
            }
            hi = x;
        }
        lo = x;
    }
    let delta1 = bisect_sign(|d| Ok(-g(d)?), lo, hi, 1e-14)?;

    // decreasing branch: lo has d > J0, hi has d ≤ J0
    let (mut lo, mut hi) = (1.0, f64::NAN);
    for w in right.windows(2) {
        if w[0].1 > j0 && w[1].1 <= j0 {
            (lo, hi) = (w[0].0, w[1].0);
            break;
        }
    }
    if hi.is_nan() {
        let mut x = right.last().map_or(1.0, |p| p.0);
        lo = x;
        for _ in 0..200 {
            x *= 2.0;
            if g(x)? <= 0.0 {
                break;
            }
            lo = x;
        }
        hi = x;
    }
    let delta2 = bisect_sign(g, lo, hi, 1e-14)?;

    let residual1 = g(delta1)?.abs();
    let residual2 = g(delta2)?.abs();
    Ok(DeltaRoots { delta1, delta2, residual1, residual2, delta2_at_jump: residual2 > 1e-8 * (1.0 + j0) })
}

impl WellGeometry {
    /// Critical-band half width: `max(1e−6, 2·|d_2N − d_N|)`.
    pub fn critical_tol(&self) -> f64 {
        let gap = self.refinement.map_or(0.0, |r| (r.d_fine - self.d_est).abs());
        (2.0 * gap).max(1e-6)
    }

    /// `d(δ)` as the smaller fibering value of the two extremal-ratio
    /// directions. Both are critical points of every `J(λ(δ)·)`, and the
    /// random-start curve samples confirm nothing lower was found between.
    pub fn d_at(&self, domain: &Domain, p: &ModelParams, delta: f64) -> Result<f64> {
        let a = Energies::of(domain, &self.minimizer, p).ray().depth_value(delta, p)?;
        let b = Energies::of(domain, &self.low_ratio_direction, p).ray().depth_value(delta, p)?;
        Ok(a.min(b))
    }

    pub fn delta_roots(&self, domain: &Domain, p: &ModelParams, j0: f64) -> Result<DeltaRoots> {
        find_delta_roots(j0, self.d_est, &self.d_curve, |d| self.d_at(domain, p, d))
    }

    pub fn r(&self, delta: f64, p: &ModelParams) -> f64 {
        r_delta(delta, p, self.s_est)
    }
}

/// Full landscape: embedding constant, depth, depth curve (grid extended
/// until it crosses zero), `δ̃`, and optionally the refinement gap.
pub fn compute_geometry(domain: &Domain, p: &ModelParams, settings: &GeometrySettings) -> Result<WellGeometry> {
    let sob = estimate_sobolev_constant(domain, p.q, settings)?;
    let (d_est, minimizer) = compute_depth(domain, p, settings)?;
    let d_lower = depth_lower_bound(p, sob.s_est);
    let low = estimate_low_ratio_direction(domain, p.q, settings)?;
    let anchors = [minimizer.clone(), low.clone()];

    let mut delta_max = 3.0;
    let mut curve = d_delta_curve(domain, p, &default_delta_grid(delta_max), &anchors, settings)?;
    while !curve.iter().any(|(d, v)| *d > 1.0 && *v <= 0.0) && delta_max < 1e3 {
        delta_max *= 2.0;
        curve = d_delta_curve(domain, p, &default_delta_grid(delta_max), &anchors, settings)?;
    }
    let mut geometry = WellGeometry {
        n_modes: domain.n_modes(),
        s_est: sob.s_est,
        d_est,
        d_lower,
        d_curve: curve,
        delta_tilde: None,
        minimizer,
        low_ratio_direction: low,
        refinement: None,
    };

    if let Some(w) = geometry.d_curve.windows(2).find(|w| w[0].0 >= 1.0 && w[0].1 > 0.0 && w[1].1 <= 0.0) {
        let (lo, hi) = (w[0].0, w[1].0);
        geometry.delta_tilde = Some(bisect_sign(|d| geometry.d_at(domain, p, d), lo, hi, 1e-10)?);
    }

    if settings.refine {
        let fine = Domain::new(domain.spec().refined(2))?;
        let (d_fine, _) = compute_depth(&fine, p, settings)?;
        geometry.refinement =
            Some(Refinement { n_modes_fine: fine.n_modes(), d_fine, rel_gap: (d_fine - d_est).abs() / d_est.abs() });
    }
    Ok(geometry)
}

/// Samples `N ∩ {J < s}` and records the extreme `L²` norms. Sample 0 is the
/// depth minimizer; the others are random low-mode directions projected to
/// the Nehari manifold. The same seed gives nested accepted sets across `s`.
pub fn estimate_high_energy_bounds(
    domain: &Domain,
    p: &ModelParams,
    geometry: &WellGeometry,
    s: f64,
    n_samples: usize,
    seed: u64,
    settings: &GeometrySettings,
) -> Result<HighEnergyBounds> {
    if !(s > geometry.d_est) {
        return Err(Error::Domain(format!("level s = {s} must exceed d = {}", geometry.d_est)));
    }
    let (beta, alpha) = gn_exponents(domain, p.q);
    let q = p.q;
    // (‖u‖₂², ‖∇u‖₂², ‖u‖_{q+1}^{q+1}) on the Nehari manifold, or None
    let samples: Vec<Option<(f64, f64, f64)>> = map_indexed(settings.exec, n_samples.max(1), |i| {
        let dir = if i == 0 {
            geometry.minimizer.clone()
        } else {
            let mut rng = rng_for(seed, i as u64);
            let decay = 0.5 + 2.5 * rand::Rng::random::<f64>(&mut rng);
            random_low_mode(domain, &mut rng, 16, decay)
        };
        let u = on_fiber(domain, dir.coeffs(), 1.0, p).ok()?;
        let a = domain.h1_sq(&u);
        let j_nehari = p.a * (q - 1.0) / (2.0 * (q + 1.0)) * a + p.b * (q - 3.0) / (4.0 * (q + 1.0)) * a * a;
        (j_nehari < s).then(|| (domain.l2_sq(&u), a, domain.lqp1_raw(u.coeffs(), q)))
    });
    let accepted: Vec<_> = samples.into_iter().flatten().collect();
    if accepted.is_empty() {
        return Err(Error::Domain(format!("no sampled Nehari point has J < {s}; try a larger level")));
    }

    let obj = GnObjective { domain, q, beta, alpha };
    let starts = start_set(domain, settings, 4, &[first_mode(domain)]);
    let c_opt = match multi_start(domain, &obj, &starts, settings, "interpolation constant") {
        Ok(b) => (-b.value).exp(),
        Err(Error::NonConvergence { best_value, .. }) => (-best_value).exp(),
        Err(e) => return Err(e),
    };
    let c_gn = accepted.iter().map(|&(l, a, pw)| pw / (a.powf(beta) * l.powf(0.5 * alpha))).fold(c_opt, f64::max);
    // On N: a‖∇u‖² ≤ P ≤ C A^β ‖u‖₂^α
    let gn_lower_bound =
        accepted.iter().map(|&(_, a, _)| (p.a * a.powf(1.0 - beta) / c_gn).powf(1.0 / alpha)).fold(f64::INFINITY, f64::min);
    let norms = accepted.iter().map(|(l, _, _)| l.sqrt());
    Ok(HighEnergyBounds {
        s,
        lambda_s_est: norms.clone().fold(f64::INFINITY, f64::min),
        big_lambda_s_est: norms.fold(0.0, f64::max),
        n_samples,
        n_accepted: accepted.len(),
        gn_constant: c_gn,
        gn_lower_bound,
    })
}

/// Checks that `I_δ(u) < 0` forces `‖∇u‖₂ > r(δ)` over random fields whose
/// gradient norms straddle `r(δ)`.
pub fn verify_norm_thresholds(
    domain: &Domain,
    p: &ModelParams,
    delta: f64,
    s_est: f64,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> NormThresholdReport {
    let r = r_delta(delta, p, s_est);
    let rows: Vec<(f64, f64, f64)> = map_indexed(exec, n_samples, |i| {
        let mut rng = rng_for(seed, i as u64);
        let u = random_field(domain, &mut rng, r / 20.0, r * 20.0);
        let a = domain.h1_sq(&u);
        let pw = domain.lqp1_raw(u.coeffs(), p.q);
        let pos = delta * (p.a * a + p.b * a * a);
        (a.sqrt(), pos - pw, 1e-10 * (1.0 + pos + pw))
    });
    let mut rep = NormThresholdReport {
        delta,
        r_delta: r,
        n_samples,
        n_negative: 0,
        n_inside: 0,
        violations: 0,
        min_norm_negative: f64::INFINITY,
    };
    for (norm, i_d, tol) in rows {
        let inside = norm <= r * (1.0 + 1e-12);
        if inside {
            rep.n_inside += 1;
        }
        if i_d < 0.0 {
            rep.n_negative += 1;
            rep.min_norm_negative = rep.min_norm_negative.min(norm);
        }
        if inside && i_d < -tol {
            rep.violations += 1;
        }
    }
    rep
}
