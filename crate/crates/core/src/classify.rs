//! Outcome prediction for an initial datum, the supercritical norm
//! predicate, the arbitrarily-high-energy blow-up constructor, energy-level
//! scaling along a ray, and empirical threshold sweeps.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainKind, SpectralField};
use crate::dynamics::{integrate, Outcome, SolverControls};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::functionals::{energy_gradient, Energies, ModelParams, Ray};
use crate::wellgeometry::{HighEnergyBounds, WellGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Prediction {
    Global,
    BlowUp,
    NoPrediction { reason: String },
}

impl Prediction {
    /// `Some(true)` when the observed outcome confirms the prediction,
    /// `Some(false)` when it contradicts it, `None` when it cannot decide.
    pub fn agrees_with(&self, observed: &Outcome) -> Option<bool> {
        match (self, observed) {
            (Prediction::Global, Outcome::GlobalDecay { .. }) | (Prediction::BlowUp, Outcome::BlowUp { .. }) => Some(true),
            (Prediction::Global, Outcome::BlowUp { .. }) | (Prediction::BlowUp, Outcome::GlobalDecay { .. }) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `J0 − d_est`.
    pub energy_gap: f64,
    pub tol_d: f64,
    /// `‖u0‖₂ / lambda_s_est` when sampled bounds were supplied.
    pub norm_over_lambda_s: Option<f64>,
    /// `‖u0‖₂ / Lambda_s_est` when sampled bounds were supplied.
    pub norm_over_big_lambda_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub j0: f64,
    pub i0: f64,
    pub l2_norm: f64,
    pub regime: Regime,
    pub prediction: Prediction,
    /// Which criteria were applied and the quantities compared.
    pub evidence: Vec<String>,
    pub observed: Option<Outcome>,
    pub margins: Margins,
}

impl Classification {
    pub fn attach(&mut self, observed: Outcome) {
        self.observed = Some(observed);
    }

    pub fn agreement(&self) -> Option<bool> {
        self.observed.as_ref().and_then(|o| self.prediction.agrees_with(o))
    }
}

/// Sign tolerance for `I`, relative to the size of its terms.
fn i_tol(e: &Energies, p: &ModelParams) -> f64 {
    1e-10 * (1.0 + p.a * e.h1_sq + p.b * e.h1_sq * e.h1_sq + e.lqp1)
}

/// Result of the supercritical norm predicate
/// `4(q+1)/(q−3)·|Ω|^{(q−1)/2}·J(u0) ≤ ‖u0‖₂^{q+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPredicate {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `I(u0)`, which must be negative whenever the predicate holds.
    pub i0: f64,
}

pub fn prop51_predicate(domain: &Domain, u0: &SpectralField, p: &ModelParams, geometry: &WellGeometry) -> Result<NormPredicate> {
    let e = Energies::of(domain, u0, p);
    let j0 = e.j(p);
    if !(j0 > geometry.d_est) {
        return Err(Error::NotApplicable(format!("norm predicate needs J(u0) > d, got {j0} ≤ {}", geometry.d_est)));
    }
    let q = p.q;
    let lhs = 4.0 * (q + 1.0) / (q - 3.0) * domain.measure().powf(0.5 * (q - 1.0)) * j0;
    let rhs = e.l2_sq.powf(0.5 * (q + 1.0));
    Ok(NormPredicate { holds: lhs <= rhs, lhs, rhs, i0: e.i(p) })
}

/// Applies the decision table. `bounds` must be sampled at a level
/// `s ≥ J(u0)` to be used; `norm_margin` is the relative clearance demanded
/// of the sampled norm bounds.
pub fn classify_initial(
    domain: &Domain,
    u0: &SpectralField,
    p: &ModelParams,
    geometry: &WellGeometry,
    bounds: Option<&HighEnergyBounds>,
    norm_margin: f64,
) -> Classification {
    let e = Energies::of(domain, u0, p);
    let (j0, i0) = (e.j(p), e.i(p));
    let tol = i_tol(&e, p);
    let d = geometry.d_est;
    let tol_d = geometry.critical_tol();
    let l2_norm = e.l2_sq.sqrt();
    let regime = if (j0 - d).abs() <= tol_d {
        Regime::Critical
    } else if j0 < d {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    };
    let mut margins = Margins { energy_gap: j0 - d, tol_d, norm_over_lambda_s: None, norm_over_big_lambda_s: None };
    let mut evidence = vec![format!("J(u0) = {j0:.12e}, d = {d:.12e}, band ±{tol_d:.3e}"), format!("I(u0) = {i0:.12e}")];

    let prediction = match regime {
        Regime::Subcritical | Regime::Critical => {
            let level = if regime == Regime::Critical { "J(u0) = d within the band" } else { "J(u0) < d" };
            if i0 >= -tol {
                evidence.push(format!("{level} and I(u0) ≥ 0: datum in the closed stable well, solution is global"));
                Prediction::Global
            } else if j0 <= 0.0 {
                evidence.push("J(u0) ≤ 0 with I(u0) < 0: nonpositive energy forces blow-up".into());
                Prediction::BlowUp
            } else {
                evidence.push(format!("{level} and I(u0) < 0: datum in the unstable set, solution blows up"));
                Prediction::BlowUp
            }
        }
        Regime::Supercritical => {
            let pred = prop51_predicate(domain, u0, p, geometry).ok();
            if let Some(np) = pred.filter(|np| np.holds) {
                evidence.push(format!("norm predicate holds: {:.6e} ≤ ‖u0‖₂^(q+1) = {:.6e}", np.lhs, np.rhs));
                if np.i0 < 0.0 {
                    evidence.push("I(u0) < 0 as the predicate requires: blow-up".into());
                    Prediction::BlowUp
                } else {
                    evidence.push("predicate holds but I(u0) ≥ 0: contradicts the predicate's conclusion".into());
                    Prediction::NoPrediction { reason: "norm predicate held with I(u0) ≥ 0".into() }
                }
            } else {
                match bounds.filter(|b| b.s >= j0) {
                    None => {
                        evidence.push("no sampled norm bounds at level ≥ J(u0)".into());
                        Prediction::NoPrediction { reason: "outside the supercritical norm hypotheses (no bounds)".into() }
                    }
                    Some(b) => {
                        margins.norm_over_lambda_s = Some(l2_norm / b.lambda_s_est);
                        margins.norm_over_big_lambda_s = Some(l2_norm / b.big_lambda_s_est);
                        if i0 > tol && l2_norm <= b.lambda_s_est * (1.0 - norm_margin) {
                            evidence.push(format!(
                                "I(u0) > 0 and ‖u0‖₂ = {l2_norm:.6e} ≤ (1−{norm_margin})·λ_s ≈ {:.6e}: global, decaying",
                                b.lambda_s_est
                            ));
                            Prediction::Global
                        } else if i0 < -tol && l2_norm >= b.big_lambda_s_est * (1.0 + norm_margin) {
                            evidence.push(format!(
                                "I(u0) < 0 and ‖u0‖₂ = {l2_norm:.6e} ≥ (1+{norm_margin})·Λ_s ≈ {:.6e}: blow-up",
                                b.big_lambda_s_est
                            ));
                            Prediction::BlowUp
                        } else {
                            evidence.push(format!(
                                "‖u0‖₂ = {l2_norm:.6e} not clear of sampled bounds [{:.6e}, {:.6e}] with the sign of I",
                                b.lambda_s_est, b.big_lambda_s_est
                            ));
                            Prediction::NoPrediction { reason: "outside the supercritical norm hypotheses".into() }
                        }
                    }
                }
            }
        }
    };
    Classification { j0, i0, l2_norm, regime, prediction, evidence, observed: None, margins }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiberBranch {
    /// `μ ≤ λ*`, where `I(μu) ≥ 0`.
    Ascending,
    /// `μ ≥ λ*`, where `I(μu) ≤ 0`.
    Descending,
}

/// Bisection to adjacent floats for an increasing `f` with `f(lo) < 0 ≤ f(hi)`.
fn bisect_full<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return if f(hi).abs() < f(lo).abs() { hi } else { lo };
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `μ` on the requested fibering branch with `J(μ·u_shape) = e_target`.
pub fn scale_to_energy(domain: &Domain, u_shape: &SpectralField, e_target: f64, p: &ModelParams, branch: FiberBranch) -> Result<f64> {
    let ray = Energies::of(domain, u_shape, p).ray();
    let lam = ray.lambda_star(p)?;
    let peak = ray.j_at(lam, p);
    if !(e_target > 0.0) {
        return Err(Error::Domain(format!("target energy must be positive, got {e_target}")));
    }
    if e_target > peak {
        return Err(Error::Domain(format!("target {e_target} exceeds the fibering maximum {peak} of this shape")));
    }
    let f = |mu: f64| ray.j_at(mu, p) - e_target;
    Ok(match branch {
        FiberBranch::Ascending => bisect_full(f, 0.0, lam),
        FiberBranch::Descending => {
            let mut hi = 2.0 * lam;
            while f(hi) > 0.0 {
                hi *= 2.0;
            }
            bisect_full(|mu| -f(mu), lam, hi)
        }
    })
}

/// `μ > λ*` with `J(μu) = 0`.
fn zero_energy_scale(ray: &Ray, p: &ModelParams) -> Result<f64> {
    let lam = ray.lambda_star(p)?;
    let mut hi = 2.0 * lam;
    while ray.j_at(hi, p) > 0.0 {
        hi *= 2.0;
    }
    Ok(bisect_full(|mu| -ray.j_at(mu, p), lam, hi))
}

// ---------------------------------------------------------------------------
// high-energy construction

/// `0.5(1 − cos 2πs)·sin(mπs)` on `s ∈ [0, 1]` as a sine series in `s`:
/// `(index, amplitude)` pairs with positive indices.
fn taper_sine_series(m: u32) -> Vec<(u32, f64)> {
    let mut terms: Vec<(u32, f64)> = Vec::new();
    let mut add = |j: i64, a: f64| {
        if j == 0 {
            return;
        }
        let (idx, amp) = (j.unsigned_abs() as u32, a * (j.signum() as f64));
        match terms.iter_mut().find(|t| t.0 == idx) {
            Some(t) => t.1 += amp,
            None => terms.push((idx, amp)),
        }
    };
    let m = m as i64;
    add(m, 0.5);
    add(m + 2, -0.25);
    add(m - 2, -0.25);
    terms
}

/// `∫₀¹ cos(ωs + φ) ds`.
fn int_cos(omega: f64, phi: f64) -> f64 {
    if omega.abs() < 1e-8 {
        // second-order Taylor in ω
        phi.cos() - 0.5 * omega * phi.sin() - omega * omega / 6.0 * phi.cos()
    } else {
        ((omega + phi).sin() - phi.sin()) / omega
    }
}

/// A tapered bump of frequency `m` on `[x0, x0 + width]`, projected
/// analytically onto the sine basis of `(0, length)`. Returns the field and
/// the relative `L²` norm lost to truncation.
fn projected_bump(domain: &Domain, length: f64, x0: f64, width: f64, m: u32) -> (SpectralField, f64) {
    let series = taper_sine_series(m);
    let norm_sq: f64 = width * 0.5 * series.iter().map(|(_, a)| a * a).sum::<f64>();
    let scale = (2.0 / length).sqrt();
    let coeffs: Vec<f64> = domain
        .modes()
        .iter()
        .map(|mode| {
            let kk = mode.kx as f64 * std::f64::consts::PI / length;
            // φ_k(x0 + w s) = scale·sin(kk·w·s + kk·x0)
            let (b, c) = (kk * width, kk * x0);
            series
                .iter()
                .map(|&(j, a)| {
                    let aj = j as f64 * std::f64::consts::PI;
                    // ∫ sin(aj s) sin(b s + c) = ½∫ cos((aj−b)s − c) − cos((aj+b)s + c)
                    a * 0.5 * (int_cos(aj - b, -c) - int_cos(aj + b, c))
                })
                .sum::<f64>()
                * width
                * scale
        })
        .collect();
    let captured: f64 = coeffs.iter().map(|c| c * c).sum();
    let leakage = ((norm_sq - captured).max(0.0) / norm_sq).sqrt();
    (SpectralField::from_vec_unchecked(coeffs), leakage)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighEnergyConstruction {
    pub datum: SpectralField,
    pub m_target: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Frequency of the second bump.
    pub shape_frequency: u32,
    pub j_total: f64,
    pub j_v: f64,
    pub j_w: f64,
    pub i_total: f64,
    /// `J(αv + βw) − J(αv) − J(βw)`.
    pub additivity_defect: f64,
    /// `(b/2)‖∇(αv)‖₂²‖∇(βw)‖₂²`, the interaction the nonlocal term adds even
    /// for disjoint supports.
    pub cross_term: f64,
    /// `|P(αv+βw) − P(αv) − P(βw)| / P(αv+βw)` from support overlap after
    /// truncation.
    pub support_leakage: f64,
    /// Larger relative `L²` truncation loss of the two bumps.
    pub truncation_leakage: f64,
    pub predicate: NormPredicate,
}

/// Builds `u_M = αv + βw` with `J(u_M) = m_target`, `I(u_M) < 0` and the
/// norm predicate satisfied: `v` is a bump on the left third with
/// `J(αv) ≤ 0` and `‖αv‖₂` large enough for the predicate, `w` a bump on
/// the right third scaled on its ascending branch. The frequency of `w`
/// is raised until the energy can reach the target.
pub fn construct_high_energy(domain: &Domain, p: &ModelParams, geometry: &WellGeometry, m_target: f64) -> Result<HighEnergyConstruction> {
    let length = match domain.spec().kind {
        DomainKind::Interval { length } => length,
        _ => return Err(Error::Domain("the high-energy constructor supports interval domains".into())),
    };
    if !(m_target > geometry.d_est) {
        return Err(Error::Domain(format!("target {m_target} must exceed d = {}", geometry.d_est)));
    }
    let q = p.q;
    let third = length / 3.0;
    let (v, leak_v) = projected_bump(domain, length, 0.0, third, 1);
    let ev = Energies::of(domain, &v, p);
    let k = 4.0 * (q + 1.0) / (q - 3.0) * length.powf(0.5 * (q - 1.0));
    let alpha_norm = (k * m_target).powf(1.0 / (q + 1.0)) / ev.l2_sq.sqrt();
    let alpha = alpha_norm.max(zero_energy_scale(&ev.ray(), p)?) * (1.0 + 1e-6);
    let av = v.scaled(alpha);
    let eav = Energies::of(domain, &av, p);
    let j_v = eav.j(p);

    let max_m = (domain.n_modes() / 3).max(1) as u32;
    for m in 1..=max_m {
        let (w, leak_w) = projected_bump(domain, length, 2.0 * third, third, m);
        let total = |beta: f64| av.axpy(beta, &w);
        let slope = |beta: f64| -> f64 {
            let (g, _) = energy_gradient(domain, total(beta).coeffs(), p);
            g.iter().zip(w.coeffs()).map(|(g, w)| g * w).sum()
        };
        // d/dβ J(αv + βw) is positive then negative
        let mut hi = 1.0;
        while slope(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        let beta_peak = bisect_full(|b| -slope(b), 0.0, hi);
        let gap = |beta: f64| Energies::of(domain, &total(beta), p).j(p) - m_target;
        if gap(beta_peak) < 0.0 {
            continue;
        }
        let beta = bisect_full(gap, 0.0, beta_peak);
        let datum = total(beta);
        let e = Energies::of(domain, &datum, p);
        let bw = w.scaled(beta);
        let ebw = Energies::of(domain, &bw, p);
        let predicate = prop51_predicate(domain, &datum, p, geometry)?;
        let j_total = e.j(p);
        let j_w = ebw.j(p);
        return Ok(HighEnergyConstruction {
            datum,
            m_target,
            alpha,
            beta,
            shape_frequency: m,
            j_total,
            j_v,
            j_w,
            i_total: e.i(p),
            additivity_defect: j_total - j_v - j_w,
            cross_term: 0.5 * p.b * eav.h1_sq * ebw.h1_sq,
            support_leakage: (e.lqp1 - eav.lqp1 - ebw.lqp1).abs() / e.lqp1,
            truncation_leakage: leak_v.max(leak_w),
            predicate,
        });
    }
    Err(Error::Unreachable(format!(
        "energy {m_target} not reachable with bump frequencies up to {max_m} at {} modes; increase n_modes",
        domain.n_modes()
    )))
}

// ---------------------------------------------------------------------------
// threshold sweep

#[derive(Debug, Clone, Copy)]
pub struct SweepSettings {
    /// Interior probes per round.
    pub probes_per_round: usize,
    pub rel_width: f64,
    pub exec: Execution,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { probes_per_round: 3, rel_width: 1e-3, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub mu: f64,
    pub j0: f64,
    pub i0: f64,
    pub regime: Regime,
    pub prediction: Prediction,
    pub observed: Outcome,
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mu_star: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Every probe, sorted by `μ`.
    pub probes: Vec<Probe>,
    /// Number of observed outcome changes along the sorted probes.
    pub flips: usize,
    /// `μ` with `I(μu) = 0`.
    pub mu_nehari: f64,
    /// `μ > λ*` with `J(μu) = 0`.
    pub mu_zero_energy: f64,
    /// `μ < λ*` with `J(μu) = d_est`, when the fibering maximum reaches `d`.
    pub mu_depth_ascending: Option<f64>,
    /// (agreeing, decided) among subcritical probes.
    pub subcritical_agreement: (usize, usize),
}

fn decays(o: &Outcome) -> bool {
    matches!(o, Outcome::GlobalDecay { .. })
}

/// Locates the decay/blow-up threshold along `μ·u_shape` by k-section with
/// the observed outcome as oracle.
#[allow(clippy::too_many_arguments)]
pub fn threshold_sweep(
    domain: &Domain,
    u_shape: &SpectralField,
    p: &ModelParams,
    geometry: &WellGeometry,
    controls: &SolverControls,
    mu_lo: f64,
    mu_hi: f64,
    settings: &SweepSettings,
) -> Result<SweepReport> {
    if !(mu_lo > 0.0 && mu_hi > mu_lo) {
        return Err(Error::Domain(format!("need 0 < μ_lo < μ_hi, got {mu_lo}, {mu_hi}")));
    }
    let probe = |mu: &f64| -> Result<Probe> {
        let u = u_shape.scaled(*mu);
        let c = classify_initial(domain, &u, p, geometry, None, 0.1);
        let observed = integrate(domain, &u, p, controls)?.outcome;
        let agrees = c.prediction.agrees_with(&observed);
        Ok(Probe { mu: *mu, j0: c.j0, i0: c.i0, regime: c.regime, prediction: c.prediction, observed, agrees })
    };
    let ends: Vec<Probe> = map_slice(settings.exec, &[mu_lo, mu_hi], probe).into_iter().collect::<Result<_>>()?;
    if !(decays(&ends[0].observed) && matches!(ends[1].observed, Outcome::BlowUp { .. })) {
        return Err(Error::Bracket { lo: ends[0].observed.kind().into(), hi: ends[1].observed.kind().into() });
    }
    let mut probes = ends;
    let (mut lo, mut hi) = (mu_lo, mu_hi);
    let k = settings.probes_per_round.max(1);
    while hi - lo > settings.rel_width * hi {
        let mus: Vec<f64> = (1..=k).map(|j| lo + (hi - lo) * j as f64 / (k + 1) as f64).collect();
        let round: Vec<Probe> = map_slice(settings.exec, &mus, probe).into_iter().collect::<Result<_>>()?;
        if let Some(r) = round.iter().find(|r| matches!(r.observed, Outcome::Undetermined { .. })) {
            return Err(Error::Unreachable(format!("probe at μ = {} was undetermined; raise t_max", r.mu)));
        }
        let first_blow = round.iter().position(|r| !decays(&r.observed)).unwrap_or(k);
        if first_blow > 0 {
            lo = mus[first_blow - 1];
        }
        if first_blow < k {
            hi = mus[first_blow];
        }
        probes.extend(round);
    }
    probes.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let flips = probes.windows(2).filter(|w| decays(&w[0].observed) != decays(&w[1].observed)).count();
    let sub: Vec<_> = probes.iter().filter(|pr| pr.regime == Regime::Subcritical).filter_map(|pr| pr.agrees).collect();
    let ray = Energies::of(domain, u_shape, p).ray();
    Ok(SweepReport {
        mu_star: 0.5 * (lo + hi),
        mu_lo: lo,
        mu_hi: hi,
        flips,
        mu_nehari: ray.lambda_star(p)?,
        mu_zero_energy: zero_energy_scale(&ray, p)?,
        mu_depth_ascending: scale_to_energy(domain, u_shape, geometry.d_est, p, FiberBranch::Ascending).ok(),
        subcritical_agreement: (sub.iter().filter(|a| **a).count(), sub.len()),
        probes,
    })
}
