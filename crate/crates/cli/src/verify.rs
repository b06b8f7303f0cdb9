//! Property suites behind `kwell verify`.

use serde::Serialize;

use kwell::classify::{scale_to_energy, FiberBranch};
use kwell::domain::SpectralField;
use kwell::dynamics::{concavity_diagnostics, decay_bound_check, energy_residual, integrate, well_invariance_check, Outcome, SolverControls, TrajectoryRecord};
use kwell::exec::{map_indexed, Execution};
use kwell::functionals::{fiber_lambda_star, monotonicity_floor, monotonicity_gap, Energies, ModelParams};
use kwell::sampling::{random_field, rng_for};
use kwell::wellgeometry::verify_norm_thresholds;

use crate::commands::{Context, REPORT_VERSION};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemmas,
    Dynamics,
    All,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub pass: bool,
    /// Distance to the failure threshold; negative when failing.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub version: u32,
    pub command: &'static str,
    pub suite: Suite,
    pub sign_of_i_flipped: bool,
    pub passed: usize,
    pub failed: usize,
    pub results: Vec<PropertyResult>,
}

/// Every use of `I` in the suites goes through here so a sign mutation
/// reaches all of them.
struct Checker {
    flip_i: bool,
}

impl Checker {
    fn i(&self, e: &Energies, p: &ModelParams) -> f64 {
        if self.flip_i {
            -e.i(p)
        } else {
            e.i(p)
        }
    }
}

fn result(name: &str, margin: f64, detail: String) -> PropertyResult {
    PropertyResult { name: name.into(), pass: margin >= 0.0, margin, detail }
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

/// `∫₀^L |sin(πx/L)|^{q+1}` by composite Simpson.
fn sine_power_integral(length: f64, q: f64) -> f64 {
    let n = 200_000;
    let h = length / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * (std::f64::consts::PI * i as f64 * h / length).sin().abs().powf(q + 1.0)
        })
        .sum::<f64>()
        * h
        / 3.0
}

fn lemmas(ctx: &Context, cfg: &RunConfig, ck: &Checker) -> Vec<PropertyResult> {
    let (d, p, g) = (&ctx.domain, &ctx.params, &ctx.geometry);
    let length = d.measure();
    let mut out = Vec::new();

    // sin(πx/L) in the orthonormal basis
    let u = SpectralField::unit(d.n_modes(), 0).scaled((0.5 * length).sqrt());
    let k1 = std::f64::consts::PI / length;
    let a_ = 0.5 * length * k1 * k1;
    let pw = sine_power_integral(length, p.q);
    let j_oracle = 0.5 * p.a * a_ + 0.25 * p.b * a_ * a_ - pw / (p.q + 1.0);
    let i_oracle = p.a * a_ + p.b * a_ * a_ - pw;
    let i_half_oracle = 0.5 * (p.a * a_ + p.b * a_ * a_) - pw;
    let f = |l: f64| p.a * l * l * a_ + p.b * l.powi(4) * a_ * a_ - l.powf(p.q + 1.0) * pw;
    let (mut lo, mut hi) = (1e-6, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let e = Energies::of(d, &u, p);
    let errs = [
        rel(e.j(p), j_oracle),
        rel(ck.i(&e, p), i_oracle),
        rel(e.i_delta(0.5, p), i_half_oracle),
        fiber_lambda_star(d, &u, p).map_or(f64::INFINITY, |l| rel(l, 0.5 * (lo + hi))),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    out.push(result(
        "functional_exactness",
        1e-8 - worst,
        format!("J = {:.9}, I = {:.9}, I_0.5 = {:.9}, worst relative error {worst:.2e}", e.j(p), ck.i(&e, p), e.i_delta(0.5, p)),
    ));

    out.push(result("depth_lower_bound", g.d_est - g.d_lower + 1e-8, format!("d = {:.9}, lower bound {:.9}", g.d_est, g.d_lower)));

    let mut shape = 0.0f64;
    for w in g.d_curve.windows(2) {
        let step = w[1].1 - w[0].1;
        let bad = if w[1].0 <= 1.0 { -step } else { step };
        shape = shape.max(bad);
    }
    let at1 = g.d_curve.iter().find(|(x, _)| *x == 1.0).map_or(f64::INFINITY, |(_, v)| rel(*v, g.d_est));
    out.push(result(
        "depth_curve_shape",
        (1e-6 - shape).min(1e-8 - at1),
        format!("largest wrong-way step {shape:.2e}, d(1) relative gap {at1:.2e}"),
    ));
    if let Some(r) = g.refinement {
        out.push(result("depth_refinement", 1e-4 - r.rel_gap, format!("d at {} modes = {:.9}, gap {:.2e}", r.n_modes_fine, r.d_fine, r.rel_gap)));
    }

    for delta in [0.5, 1.0, 2.0] {
        let rep = verify_norm_thresholds(d, p, delta, g.s_est, cfg.verify_samples, cfg.seed, Execution::Parallel);
        out.push(result(
            &format!("norm_threshold_delta_{delta}"),
            0.0 - rep.violations as f64,
            format!("r = {:.6}, {} negative / {} inside, {} violations", rep.r_delta, rep.n_negative, rep.n_inside, rep.violations),
        ));
    }

    let slack = map_indexed(Execution::Parallel, cfg.verify_samples, |i| {
        let mut rng = rng_for(cfg.seed ^ 0x6d6f6e6f, i as u64);
        let u = random_field(d, &mut rng, 0.05, 10.0);
        let v = random_field(d, &mut rng, 0.05, 10.0);
        let gap = monotonicity_gap(d, &u, &v, p);
        let floor = monotonicity_floor(d, &u, &v, p);
        gap - floor + 1e-9 * (1.0 + gap.abs() + floor.abs())
    });
    let min_slack = slack.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(result("strong_monotonicity", min_slack, format!("{} pairs, smallest slack {min_slack:.3e}", slack.len())));

    let fib = map_indexed(Execution::Parallel, 200, |i| {
        let mut rng = rng_for(cfg.seed ^ 0x66696265, i as u64);
        let u = random_field(d, &mut rng, 0.1, 10.0);
        let Ok(lam) = fiber_lambda_star(d, &u, p) else { return -1.0 };
        let at = |s: f64| {
            let e = Energies::of(d, &u.scaled(s * lam), p);
            (ck.i(&e, p), 1.0 + e.lqp1)
        };
        let (i0, sc) = at(1.0);
        let (below, _) = at(0.5);
        let (above, _) = at(2.0);
        let zero = 1e-8 - i0.abs() / sc;
        zero.min(below.signum()).min(-above.signum())
    });
    let min_fib = fib.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(result("nehari_fibering", min_fib, "I(λ*u) = 0, I > 0 below λ*, I < 0 above, 200 fields".into()));

    let ratio = map_indexed(Execution::Parallel, cfg.verify_samples, |i| {
        let mut rng = rng_for(cfg.seed ^ 0x736f626f, i as u64);
        let u = random_field(d, &mut rng, 0.1, 10.0);
        let e = Energies::of(d, &u, p);
        e.lqp1.powf(1.0 / (p.q + 1.0)) / e.h1_sq.sqrt()
    });
    let max_ratio = ratio.iter().cloned().fold(0.0, f64::max);
    out.push(result("embedding_constant", g.s_est * (1.0 + 1e-9) - max_ratio, format!("S = {:.9}, largest sampled ratio {max_ratio:.9}", g.s_est)));
    out
}

fn run(ctx: &Context, u0: &SpectralField, controls: &SolverControls) -> Option<TrajectoryRecord> {
    integrate(&ctx.domain, u0, &ctx.params, controls).ok()
}

fn invariance(ctx: &Context, traj: &TrajectoryRecord) -> Option<usize> {
    let (d, p, g) = (&ctx.domain, &ctx.params, &ctx.geometry);
    let roots = g.delta_roots(d, p, traj.j0).ok()?;
    well_invariance_check(traj, (roots.delta1, roots.delta2), 11, d, p, g).ok().map(|r| r.violations)
}

fn dynamics(ctx: &Context, cfg: &RunConfig, ck: &Checker) -> Vec<PropertyResult> {
    let (d, p, g) = (&ctx.domain, &ctx.params, &ctx.geometry);
    let mut out = Vec::new();
    let phi1 = SpectralField::unit(d.n_modes(), 0);
    let tight = SolverControls { rel_tol: 1e-8, snapshot_stride: 1, ..cfg.controls };
    let decay = run(ctx, &phi1.scaled(0.1), &tight);
    let looser = run(ctx, &phi1.scaled(0.1), &SolverControls { rel_tol: 1e-7, ..tight });
    match (&decay, &looser) {
        (Some(t), Some(l)) => {
            let (rt, rl) = (energy_residual(t), energy_residual(l));
            let bound = 1e-6 * (1.0 + t.j0.abs());
            out.push(result("energy_identity", (bound - rt).min(rl - rt), format!("residual {rt:.3e} at 1e-8, {rl:.3e} at 1e-7, bound {bound:.3e}")));
        }
        _ => out.push(result("energy_identity", -1.0, "decay run failed".into())),
    }

    let decay_margin = decay
        .as_ref()
        .and_then(|t| {
            let r = g.delta_roots(d, p, t.j0).ok()?;
            decay_bound_check(t, Some(r.delta1), p, d.lambda1(), 1e-3).ok()
        })
        .map_or((-1.0, "not applicable".to_string()), |c| (1e-3 - c.worst_margin, format!("rate {:.6}, worst margin {:.3e}", c.rate, c.worst_margin)));
    out.push(result("decay_bound", decay_margin.0, decay_margin.1));

    let stable = decay.as_ref().map_or((-1.0, "no run".into()), |t| {
        let viol = invariance(ctx, t).map_or(-1.0, |v| 0.0 - v as f64);
        let min_i = t.snapshots.iter().map(|s| ck.i(&s.energies(), p)).fold(f64::INFINITY, f64::min);
        (viol.min(min_i.signum()), format!("invariance violations {}, min I {min_i:.3e}", -viol))
    });
    out.push(result("stable_set_invariance", stable.0, stable.1));

    let mu0 = scale_to_energy(d, &phi1, 1e-9 * g.d_est, p, FiberBranch::Descending).unwrap_or(f64::NAN);
    let neg = run(ctx, &phi1.scaled(1.1 * mu0), &cfg.controls);
    let neg_m = neg.as_ref().map_or((-1.0, "no run".into()), |t| {
        let conc = concavity_diagnostics(t, p);
        let blow = matches!(t.outcome, Outcome::BlowUp { .. });
        let ok = blow && conc.onset.is_some() && t.j0 < 0.0;
        (if ok { 0.0 } else { -1.0 }, format!("J0 = {:.4}, {}, concavity onset {:?}", t.j0, t.outcome.kind(), conc.onset))
    });
    out.push(result("blowup_negative_energy", neg_m.0, neg_m.1));

    let sub = scale_to_energy(d, &phi1, 0.5 * g.d_est, p, FiberBranch::Descending).ok().and_then(|mu| run(ctx, &phi1.scaled(mu), &cfg.controls));
    let sub_m = sub.as_ref().map_or((-1.0, "no run".into()), |t| {
        let blow = matches!(t.outcome, Outcome::BlowUp { .. });
        let viol = invariance(ctx, t).map_or(-1.0, |v| 0.0 - v as f64);
        let max_i = t.snapshots.iter().map(|s| ck.i(&s.energies(), p)).fold(f64::NEG_INFINITY, f64::max);
        let m = if blow { viol.min(-max_i.signum()) } else { -1.0 };
        (m, format!("{}, invariance violations {}, max I {max_i:.3e}", t.outcome.kind(), -viol))
    });
    out.push(result("blowup_unstable_set", sub_m.0, sub_m.1));

    for (name, branch, want_blow) in [("critical_ascending", FiberBranch::Ascending, false), ("critical_descending", FiberBranch::Descending, true)] {
        let t = scale_to_energy(d, &phi1, g.d_est, p, branch).ok().and_then(|mu| run(ctx, &phi1.scaled(mu), &cfg.controls));
        let m = t.as_ref().map_or((-1.0, "no run".into()), |t| {
            let e0 = t.snapshots[0].energies();
            let sign_ok = if want_blow { ck.i(&e0, p) < 0.0 } else { ck.i(&e0, p) > 0.0 };
            let ok = match t.outcome {
                Outcome::BlowUp { .. } => want_blow,
                Outcome::GlobalDecay { rate } => !want_blow && rate > 0.0,
                Outcome::Undetermined { .. } => false,
            };
            (if ok && sign_ok { 0.0 } else { -1.0 }, format!("{:?}", t.outcome))
        });
        out.push(result(name, m.0, m.1));
    }
    out
}

pub fn cmd_verify(cfg: &RunConfig, suite: Suite, flip_i: bool) -> Result<VerifyReport, CliError> {
    let ctx = Context::new(cfg)?;
    let ck = Checker { flip_i };
    let mut results = Vec::new();
    if matches!(suite, Suite::Lemmas | Suite::All) {
        results.extend(lemmas(&ctx, cfg, &ck));
    }
    if matches!(suite, Suite::Dynamics | Suite::All) {
        results.extend(dynamics(&ctx, cfg, &ck));
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let report = VerifyReport {
        version: REPORT_VERSION,
        command: "verify",
        suite,
        sign_of_i_flipped: flip_i,
        passed: results.len() - failed,
        failed,
        results,
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(cfg.out_dir.join("verify.json"), text)?;
    Ok(report)
}
