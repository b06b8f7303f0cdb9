//! Time integration of `u_t − (a + b‖∇u‖₂²)Δu = |u|^{q−1}u` in the sine
//! basis, with energy-identity bookkeeping and concavity diagnostics.
//!
//! The scheme is first-order exponential time differencing with the
//! Kirchhoff coefficient frozen at the start of each step:
//!
//! `c_k ← e^{−mλ_k h} c_k + h·φ(mλ_k h)·N_k(c)`, `φ(z) = (1 − e^{−z})/z`.
//!
//! The semi-discrete system is the exact gradient flow `ċ = −∇J_h(c)`, so
//! the dissipation integrand `‖u_t‖₂²` is `‖∇J_h(c)‖²` in coefficients.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, SpectralField};
use crate::error::{Error, Result};
use crate::functionals::{energy_gradient, Energies, ModelParams};
use crate::wellgeometry::WellGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub norm_cap: f64,
    pub decay_floor: f64,
    pub snapshot_stride: usize,
    pub max_steps: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 0.5,
            t_max: 50.0,
            rel_tol: 1e-6,
            norm_cap: 1e8,
            decay_floor: 1e-12,
            snapshot_stride: 10,
            max_steps: 2_000_000,
        }
    }
}

impl SolverControls {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.dt_min) && self.dt_min < self.dt_init && self.dt_init <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < dt_min < dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !pos(self.t_max) {
            return Err(Error::Config(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !pos(self.rel_tol) {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !pos(self.norm_cap) {
            return Err(Error::Config(format!("norm_cap must be positive, got {}", self.norm_cap)));
        }
        if !pos(self.decay_floor) {
            return Err(Error::Config(format!("decay_floor must be positive, got {}", self.decay_floor)));
        }
        if self.snapshot_stride == 0 || self.max_steps == 0 {
            return Err(Error::Config("snapshot_stride and max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the trajectory export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    pub t: f64,
    /// Size of the step that produced this state (0 at t = 0).
    pub dt: f64,
    pub l2_sq: f64,
    pub h1_sq: f64,
    pub lqp1: f64,
    pub j: f64,
    pub i: f64,
    /// `∫₀ᵗ ‖u_τ‖₂² dτ`.
    pub dissipation: f64,
    /// `dissipation + J(u(t)) − J(u0)`.
    pub residual: f64,
    /// `∫₀ᵗ ‖u‖₂² dτ`.
    pub m: f64,
    /// `M''M − ((q+1)/2)M'²` with `M' = ‖u‖₂²`, `M'' = −2I(u)`.
    pub f: f64,
}

impl EnergySnapshot {
    pub fn energies(&self) -> Energies {
        Energies { l2_sq: self.l2_sq, h1_sq: self.h1_sq, lqp1: self.lqp1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Outcome {
    /// `rate` is the fitted exponential decay rate of `‖u‖₂²`.
    GlobalDecay { rate: f64 },
    /// `t_est` extrapolates the zero of `‖∇u‖₂^{−(q−1)}`; `fit_r2` is the
    /// quality of the linear fit.
    BlowUp { t_est: f64, fit_r2: f64, trigger: String },
    Undetermined { reason: String },
}

impl Outcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Outcome::GlobalDecay { .. } => "GlobalDecay",
            Outcome::BlowUp { .. } => "BlowUp",
            Outcome::Undetermined { .. } => "Undetermined",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub j0: f64,
    pub snapshots: Vec<EnergySnapshot>,
    pub m_series: Vec<(f64, f64)>,
    pub dissipation: f64,
    pub outcome: Outcome,
    pub steps: usize,
    pub rejected: usize,
    pub final_state: SpectralField,
}

/// `(1 − e^{−z})/z`, accurate near 0.
fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// One first-order exponential step. With `reaction = false` only the
/// frozen-coefficient linear part is applied.
pub fn etd_step(domain: &Domain, c: &[f64], dt: f64, p: &ModelParams, reaction: bool) -> Vec<f64> {
    let m = p.kirchhoff(domain.h1_sq_raw(c));
    let eig = domain.eigenvalues();
    if !reaction {
        return c.iter().zip(eig).map(|(c, l)| (-m * l * dt).exp() * c).collect();
    }
    let (_, n) = domain.power_terms(c, p.q);
    c.iter()
        .zip(eig)
        .zip(&n)
        .map(|((c, l), n)| {
            let z = m * l * dt;
            (-z).exp() * c + dt * phi1(z) * n
        })
        .collect()
}

struct Composite {
    next: Vec<f64>,
    mid: Vec<f64>,
    err: f64,
}

fn composite(domain: &Domain, c: &[f64], dt: f64, p: &ModelParams) -> Option<Composite> {
    let full = etd_step(domain, c, dt, p, true);
    let mid = etd_step(domain, c, 0.5 * dt, p, true);
    let next = etd_step(domain, &mid, 0.5 * dt, p, true);
    if !(next.iter().all(|x| x.is_finite()) && full.iter().all(|x| x.is_finite())) {
        return None;
    }
    let diff: f64 = next.iter().zip(&full).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
    let err = if diff == 0.0 { 0.0 } else { diff / norm.max(f64::MIN_POSITIVE) };
    Some(Composite { next, mid, err })
}

/// Two half steps, with the relative distance to one full step as the error
/// estimate. A non-finite result is an [`Error::Overflow`].
pub fn step(domain: &Domain, u: &SpectralField, dt: f64, p: &ModelParams) -> Result<(SpectralField, f64)> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let s = composite(domain, u.coeffs(), dt, p).ok_or(Error::Overflow)?;
    Ok((SpectralField::from_vec_unchecked(s.next), s.err))
}

/// Plain fixed-step integration to `t_end` (used for convergence studies).
pub fn integrate_fixed(domain: &Domain, u0: &SpectralField, p: &ModelParams, dt: f64, t_end: f64) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let n = (t_end / dt).round() as usize;
    let mut c = u0.coeffs().to_vec();
    for _ in 0..n {
        c = etd_step(domain, &c, dt, p, true);
        if !c.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow);
        }
    }
    Ok(SpectralField::from_vec_unchecked(c))
}

/// Least squares `y = b0 + b1 x`, returning `(b0, b1, R²)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0, 0.0);
    }
    let b1 = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (my - b1 * mx, b1, r2)
}

struct Tracker<'a> {
    p: &'a ModelParams,
    j0: f64,
    dissipation: f64,
    m: f64,
    snapshots: Vec<EnergySnapshot>,
    m_series: Vec<(f64, f64)>,
    /// `(t, ‖∇u‖₂², ‖u‖₂²)` of the most recent steps.
    tail: VecDeque<(f64, f64, f64)>,
}

impl Tracker<'_> {
    fn snapshot(&self, t: f64, dt: f64, e: &Energies) -> EnergySnapshot {
        let j = e.j(self.p);
        let i = e.i(self.p);
        let f = -2.0 * i * self.m - 0.5 * (self.p.q + 1.0) * e.l2_sq * e.l2_sq;
        EnergySnapshot {
            t,
            dt,
            l2_sq: e.l2_sq,
            h1_sq: e.h1_sq,
            lqp1: e.lqp1,
            j,
            i,
            dissipation: self.dissipation,
            residual: self.dissipation + j - self.j0,
            m: self.m,
            f,
        }
    }

    fn record(&mut self, s: EnergySnapshot) {
        if self.snapshots.last().is_some_and(|l| l.t == s.t) {
            return;
        }
        self.m_series.push((s.t, s.m));
        self.snapshots.push(s);
    }

    fn blow_up_fit(&self) -> (f64, f64) {
        let expo = 0.5 * (self.p.q - 1.0);
        let pts: Vec<_> = self.tail.iter().filter(|(_, a, _)| *a > 0.0).collect();
        if pts.len() < 3 {
            return (pts.last().map_or(f64::NAN, |p| p.0), 0.0);
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.powf(-expo)).collect();
        let (b0, b1, r2) = linear_fit(&xs, &ys);
        let last = *xs.last().unwrap();
        let t = if b1 < 0.0 { (-b0 / b1).max(last) } else { last };
        (t, r2)
    }

    fn decay_rate(&self) -> f64 {
        let pts: Vec<_> = self.tail.iter().filter(|(_, _, l)| *l > 0.0).collect();
        if pts.len() < 2 {
            return f64::NAN;
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.2.ln()).collect();
        -linear_fit(&xs, &ys).1
    }
}

/// Adaptive integration until decay, blow-up, or the horizon.
pub fn integrate(domain: &Domain, u0: &SpectralField, p: &ModelParams, controls: &SolverControls) -> Result<TrajectoryRecord> {
    controls.validate()?;
    if u0.len() != domain.n_modes() {
        return Err(Error::Config(format!("datum has {} coefficients, domain has {} modes", u0.len(), domain.n_modes())));
    }
    let mut c = u0.coeffs().to_vec();
    let (mut grad, mut e) = energy_gradient(domain, &c, p);
    let j0 = e.j(p);
    let mut tr = Tracker {
        p,
        j0,
        dissipation: 0.0,
        m: 0.0,
        snapshots: Vec::new(),
        m_series: Vec::new(),
        tail: VecDeque::with_capacity(64),
    };
    let first = tr.snapshot(0.0, 0.0, &e);
    tr.record(first);
    tr.tail.push_back((0.0, e.h1_sq, e.l2_sq));

    let (mut t, mut dt) = (0.0, controls.dt_init);
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut last_dt = 0.0;
    let outcome = loop {
        if e.l2_sq < controls.decay_floor && e.i(p) >= 0.0 {
            break Outcome::GlobalDecay { rate: tr.decay_rate() };
        }
        if e.h1_sq.sqrt() > controls.norm_cap {
            let (t_est, fit_r2) = tr.blow_up_fit();
            break Outcome::BlowUp { t_est, fit_r2, trigger: format!("gradient norm exceeded {:e}", controls.norm_cap) };
        }
        if t >= controls.t_max {
            break Outcome::Undetermined { reason: format!("horizon t_max = {} reached", controls.t_max) };
        }
        if steps >= controls.max_steps {
            break Outcome::Undetermined { reason: format!("step budget {} exhausted at t = {t}", controls.max_steps) };
        }
        let h = dt.min(controls.t_max - t).max(controls.dt_min);
        let at_floor = h <= controls.dt_min * (1.0 + 1e-12);
        let trial = composite(domain, &c, h, p);
        let ok = trial.as_ref().is_some_and(|s| s.err <= controls.rel_tol);
        if !ok {
            rejected += 1;
            if at_floor {
                let overflow = trial.is_none();
                if overflow || e.i(p) < 0.0 {
                    let (t_est, fit_r2) = tr.blow_up_fit();
                    let trigger = if overflow { "non-finite state at minimum step" } else { "step size collapsed with I < 0" };
                    break Outcome::BlowUp { t_est, fit_r2, trigger: trigger.into() };
                }
                break Outcome::Undetermined { reason: format!("step size collapsed to dt_min at t = {t}") };
            }
            dt = (0.5 * h).max(controls.dt_min);
            continue;
        }
        let s = trial.unwrap();
        let (g_mid, e_mid) = energy_gradient(domain, &s.mid, p);
        let (g_next, e_next) = energy_gradient(domain, &s.next, p);
        let sq = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>();
        tr.dissipation += h / 6.0 * (sq(&grad) + 4.0 * sq(&g_mid) + sq(&g_next));
        tr.m += h / 6.0 * (e.l2_sq + 4.0 * e_mid.l2_sq + e_next.l2_sq);
        t += h;
        steps += 1;
        last_dt = h;
        c = s.next;
        grad = g_next;
        e = e_next;
        if tr.tail.len() == 64 {
            tr.tail.pop_front();
        }
        tr.tail.push_back((t, e.h1_sq, e.l2_sq));
        if steps % controls.snapshot_stride == 0 {
            let snap = tr.snapshot(t, h, &e);
            tr.record(snap);
        }
        if s.err < 0.25 * controls.rel_tol {
            dt = (1.5 * h).min(controls.dt_max);
        } else {
            dt = h;
        }
    };
    let last = tr.snapshot(t, last_dt, &e);
    tr.record(last);
    Ok(TrajectoryRecord {
        j0,
        dissipation: tr.dissipation,
        snapshots: tr.snapshots,
        m_series: tr.m_series,
        outcome,
        steps,
        rejected,
        final_state: SpectralField::from_vec_unchecked(c),
    })
}

/// Largest `|dissipation + J(u(t)) − J(u0)|` over the snapshots.
pub fn energy_residual(traj: &TrajectoryRecord) -> f64 {
    traj.snapshots.iter().map(|s| s.residual.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    /// `(t, F(t))` at every snapshot.
    pub series: Vec<(f64, f64)>,
    /// Earliest snapshot time after which `F > 0` holds to the end.
    pub onset: Option<f64>,
}

pub fn concavity_diagnostics(traj: &TrajectoryRecord, p: &ModelParams) -> ConcavityReport {
    let series: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.t, -2.0 * s.i * s.m - 0.5 * (p.q + 1.0) * s.l2_sq * s.l2_sq))
        .collect();
    let onset = match series.iter().rposition(|(_, f)| *f <= 0.0) {
        None => series.first().map(|s| s.0),
        Some(k) if k + 1 < series.len() => Some(series[k + 1].0),
        Some(_) => None,
    };
    ConcavityReport { series, onset }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub pass: bool,
    /// Largest `‖u(t)‖₂² / (‖u0‖₂² e^{−2aλ₁(1−δ₁)t}) − 1`.
    pub worst_margin: f64,
    pub rate: f64,
}

/// Checks `‖u(t)‖₂² ≤ ‖u0‖₂² e^{−2aλ₁(1−δ₁)t}` with slack `1 + tol`.
pub fn decay_bound_check(traj: &TrajectoryRecord, delta1: Option<f64>, p: &ModelParams, lambda1: f64, tol: f64) -> Result<DecayCheck> {
    if !matches!(traj.outcome, Outcome::GlobalDecay { .. }) {
        return Err(Error::NotApplicable("decay bound needs a decaying trajectory".into()));
    }
    let d1 = delta1.ok_or_else(|| Error::NotApplicable("no lower δ-root: J(u0) is outside (0, d)".into()))?;
    if !(d1 > 0.0 && d1 < 1.0) {
        return Err(Error::NotApplicable(format!("δ₁ = {d1} is outside (0, 1)")));
    }
    let rate = 2.0 * p.a * lambda1 * (1.0 - d1);
    let l0 = traj.snapshots[0].l2_sq;
    let worst = traj
        .snapshots
        .iter()
        .map(|s| if l0 == 0.0 { 0.0 } else { s.l2_sq / (l0 * (-rate * s.t).exp()) - 1.0 })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayCheck { pass: worst <= tol, worst_margin: worst, rate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub deltas: Vec<f64>,
    /// `true` for the stable set (`I(u0) > 0`), `false` for the unstable one.
    pub stable_branch: bool,
    pub violations: usize,
    /// Largest excursion past the asserted inequality (negative is good).
    pub worst_excess: f64,
    pub checked_snapshots: usize,
}

/// Samples `n` values of `δ` strictly inside `(δ₁, δ₂)` and checks that the
/// trajectory stays in the corresponding well (stable or unstable set).
pub fn well_invariance_check(
    traj: &TrajectoryRecord,
    delta_range: (f64, f64),
    n: usize,
    domain: &Domain,
    p: &ModelParams,
    geometry: &WellGeometry,
) -> Result<InvarianceReport> {
    if !(traj.j0 > 0.0 && traj.j0 < geometry.d_est) {
        return Err(Error::NotApplicable(format!("J(u0) = {} is outside (0, d = {})", traj.j0, geometry.d_est)));
    }
    let i0 = traj.snapshots[0].i;
    if i0 == 0.0 {
        return Err(Error::NotApplicable("I(u0) = 0: neither well applies".into()));
    }
    let stable = i0 > 0.0;
    let (lo, hi) = delta_range;
    let deltas: Vec<f64> = (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for &delta in &deltas {
        let d_delta = if stable { geometry.d_at(domain, p, delta)? } else { f64::NAN };
        for s in &traj.snapshots {
            let e = s.energies();
            let id = e.i_delta(delta, p);
            let tol = 1e-8 * (1.0 + delta * (p.a * e.h1_sq + p.b * e.h1_sq * e.h1_sq) + e.lqp1);
            let excess = if stable {
                let jt = 1e-8 * (1.0 + s.j.abs());
                (-id - tol).max(s.j - d_delta - jt)
            } else {
                id - tol
            };
            if excess > 0.0 {
                violations += 1;
            }
            worst = worst.max(excess);
        }
    }
    Ok(InvarianceReport { deltas, stable_branch: stable, violations, worst_excess: worst, checked_snapshots: traj.snapshots.len() })
}

pub const TRAJECTORY_HEADER: &str = "t,dt,l2_sq,h1_sq,lqp1,J,I,dissipation,residual,M,F";

/// One row per snapshot, values in shortest round-trip form.
pub fn write_trajectory_csv<W: Write>(traj: &TrajectoryRecord, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &traj.snapshots {
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.t, s.dt, s.l2_sq, s.h1_sq, s.lqp1, s.j, s.i, s.dissipation, s.residual, s.m, s.f
        )?;
    }
    Ok(())
}
