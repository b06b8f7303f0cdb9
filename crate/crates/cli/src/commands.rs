//! Subcommand drivers. Each writes its files under the run's output
//! directory and returns the report it wrote.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use kwell::classify::{classify_initial, construct_high_energy, threshold_sweep, Classification, HighEnergyConstruction, SweepReport, SweepSettings};
use kwell::domain::{Domain, SpectralField};
use kwell::dynamics::{
    concavity_diagnostics, decay_bound_check, energy_residual, integrate, well_invariance_check, write_trajectory_csv, DecayCheck,
    InvarianceReport, Outcome, TrajectoryRecord,
};
use kwell::error::Error;
use kwell::exec::Execution;
use kwell::functionals::{Energies, ModelParams};
use kwell::wellgeometry::{compute_geometry, estimate_high_energy_bounds, GeometrySettings, HighEnergyBounds, Refinement, WellGeometry};

use crate::config::RunConfig;
use crate::datum::{build_datum, write_datum};
use crate::error::CliError;

pub const REPORT_VERSION: u32 = 1;

pub struct Context {
    pub domain: Domain,
    pub params: ModelParams,
    pub geometry: WellGeometry,
}

impl Context {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let domain = Domain::new(cfg.domain)?;
        let settings = GeometrySettings {
            restarts: cfg.geometry_restarts,
            seed: cfg.seed,
            refine: cfg.geometry_refine,
            exec: Execution::Parallel,
            ..Default::default()
        };
        let geometry = compute_geometry(&domain, &cfg.params, &settings)?;
        Ok(Self { domain, params: cfg.params, geometry })
    }
}

fn out_file(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut w = out_file(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(dir.join(name))
}

fn write_trajectory(dir: &Path, traj: &TrajectoryRecord) -> Result<(), CliError> {
    let mut w = out_file(dir, "trajectory.csv")?;
    write_trajectory_csv(traj, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_datum_file(dir: &Path, name: &str, domain: &Domain, u: &SpectralField) -> Result<(), CliError> {
    let mut w = out_file(dir, name)?;
    write_datum(&mut w, domain.spec(), u)?;
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub version: u32,
    pub command: &'static str,
    pub n_modes: usize,
    pub params: ModelParams,
    pub s_est: f64,
    pub d_est: f64,
    pub d_lower: f64,
    pub critical_tol: f64,
    pub delta_tilde: Option<f64>,
    pub refinement: Option<Refinement>,
    /// `(δ, d(δ))`.
    pub d_curve: Vec<(f64, f64)>,
    /// `(δ, r(δ))` on the same grid.
    pub r_table: Vec<(f64, f64)>,
}

impl GeometryReport {
    fn new(ctx: &Context) -> Self {
        let g = &ctx.geometry;
        Self {
            version: REPORT_VERSION,
            command: "analyze",
            n_modes: g.n_modes,
            params: ctx.params,
            s_est: g.s_est,
            d_est: g.d_est,
            d_lower: g.d_lower,
            critical_tol: g.critical_tol(),
            delta_tilde: g.delta_tilde,
            refinement: g.refinement,
            d_curve: g.d_curve.clone(),
            r_table: g.d_curve.iter().map(|&(d, _)| (d, g.r(d, &ctx.params))).collect(),
        }
    }
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<GeometryReport, CliError> {
    let ctx = Context::new(cfg)?;
    let report = GeometryReport::new(&ctx);
    write_json(&cfg.out_dir, "geometry.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub steps: usize,
    pub rejected: usize,
    pub final_time: f64,
    pub energy_residual: f64,
    pub dissipation: f64,
    pub concavity_onset: Option<f64>,
    pub decay_check: Option<DecayCheck>,
    pub invariance: Option<InvarianceReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub version: u32,
    pub command: &'static str,
    pub n_modes: usize,
    pub params: ModelParams,
    pub seed: u64,
    pub d_est: f64,
    pub classification: Classification,
    pub bounds: Option<HighEnergyBounds>,
    pub run: RunSummary,
    /// Prediction confirmed (`true`), contradicted (`false`) or undecided.
    pub agreement: Option<bool>,
}

fn summarize(ctx: &Context, traj: &TrajectoryRecord) -> RunSummary {
    let (d, p, g) = (&ctx.domain, &ctx.params, &ctx.geometry);
    let roots = if traj.j0 > 0.0 && traj.j0 < g.d_est { g.delta_roots(d, p, traj.j0).ok() } else { None };
    let decay_check = match (&traj.outcome, roots) {
        (Outcome::GlobalDecay { .. }, Some(r)) => decay_bound_check(traj, Some(r.delta1), p, d.lambda1(), 1e-3).ok(),
        _ => None,
    };
    let invariance = roots.and_then(|r| well_invariance_check(traj, (r.delta1, r.delta2), 11, d, p, g).ok());
    RunSummary {
        outcome: traj.outcome.clone(),
        steps: traj.steps,
        rejected: traj.rejected,
        final_time: traj.snapshots.last().map_or(0.0, |s| s.t),
        energy_residual: energy_residual(traj),
        dissipation: traj.dissipation,
        concavity_onset: concavity_diagnostics(traj, p).onset,
        decay_check,
        invariance,
    }
}

/// Sampled norm bounds at a level just above `J(u0)`, when that is
/// supercritical.
fn bounds_for(ctx: &Context, cfg: &RunConfig, u0: &SpectralField) -> Option<HighEnergyBounds> {
    let j0 = Energies::of(&ctx.domain, u0, &ctx.params).j(&ctx.params);
    if j0.is_nan() || j0 <= ctx.geometry.d_est + ctx.geometry.critical_tol() {
        return None;
    }
    let settings = GeometrySettings { seed: cfg.seed, refine: false, ..Default::default() };
    estimate_high_energy_bounds(&ctx.domain, &ctx.params, &ctx.geometry, j0 * 1.001, cfg.bounds_samples, cfg.seed, &settings).ok()
}

fn simulate_datum(ctx: &Context, cfg: &RunConfig, u0: &SpectralField, command: &'static str) -> Result<SimulationReport, CliError> {
    let bounds = bounds_for(ctx, cfg, u0);
    let mut classification = classify_initial(&ctx.domain, u0, &ctx.params, &ctx.geometry, bounds.as_ref(), cfg.norm_margin);
    let traj = integrate(&ctx.domain, u0, &ctx.params, &cfg.controls)?;
    classification.attach(traj.outcome.clone());
    write_trajectory(&cfg.out_dir, &traj)?;
    Ok(SimulationReport {
        version: REPORT_VERSION,
        command,
        n_modes: ctx.domain.n_modes(),
        params: ctx.params,
        seed: cfg.seed,
        d_est: ctx.geometry.d_est,
        agreement: classification.agreement(),
        classification,
        bounds,
        run: summarize(ctx, &traj),
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulationReport, CliError> {
    let ctx = Context::new(cfg)?;
    let u0 = build_datum(&cfg.datum, &ctx.domain, &ctx.params, &ctx.geometry)?;
    write_datum_file(&cfg.out_dir, "datum.txt", &ctx.domain, &u0)?;
    let report = simulate_datum(&ctx, cfg, &u0, "simulate")?;
    write_json(&cfg.out_dir, "report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepFile {
    pub version: u32,
    pub command: &'static str,
    pub n_modes: usize,
    pub params: ModelParams,
    pub shape: Vec<f64>,
    pub d_est: f64,
    pub sweep: SweepReport,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepFile, CliError> {
    let ctx = Context::new(cfg)?;
    let mut shape = vec![0.0; ctx.domain.n_modes()];
    shape[..cfg.sweep_shape.len()].copy_from_slice(&cfg.sweep_shape);
    let shape_field = SpectralField::new(shape.clone())?;
    let sweep = threshold_sweep(&ctx.domain, &shape_field, &ctx.params, &ctx.geometry, &cfg.controls, cfg.mu_lo, cfg.mu_hi, &SweepSettings::default())
        .map_err(|e| match e {
            Error::Bracket { lo, hi } => CliError::Bracket { lo, hi },
            other => CliError::Core(other),
        })?;
    let report = SweepFile { version: REPORT_VERSION, command: "sweep", n_modes: ctx.domain.n_modes(), params: ctx.params, shape, d_est: ctx.geometry.d_est, sweep };
    write_json(&cfg.out_dir, "sweep.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConstructionReport {
    pub version: u32,
    pub command: &'static str,
    pub n_modes: usize,
    pub params: ModelParams,
    pub d_est: f64,
    pub m_target: f64,
    pub alpha: f64,
    pub beta: f64,
    pub shape_frequency: u32,
    pub j_total: f64,
    pub i_total: f64,
    pub j_v: f64,
    pub j_w: f64,
    pub additivity_defect: f64,
    pub cross_term: f64,
    pub support_leakage: f64,
    pub truncation_leakage: f64,
    pub predicate_holds: bool,
    pub predicate_lhs: f64,
    pub predicate_rhs: f64,
    pub classification: Classification,
    pub simulation: Option<RunSummary>,
}

pub fn cmd_construct_blowup(cfg: &RunConfig, simulate: bool) -> Result<ConstructionReport, CliError> {
    let ctx = Context::new(cfg)?;
    let m_target = cfg.m_target.resolve(ctx.geometry.d_est);
    let c: HighEnergyConstruction =
        construct_high_energy(&ctx.domain, &ctx.params, &ctx.geometry, m_target).map_err(|e| CliError::Construct(e.to_string()))?;
    write_datum_file(&cfg.out_dir, "datum.txt", &ctx.domain, &c.datum)?;
    let (classification, simulation) = if simulate {
        let sim = simulate_datum(&ctx, cfg, &c.datum, "construct-blowup")?;
        (sim.classification, Some(sim.run))
    } else {
        (classify_initial(&ctx.domain, &c.datum, &ctx.params, &ctx.geometry, None, cfg.norm_margin), None)
    };
    let report = ConstructionReport {
        version: REPORT_VERSION,
        command: "construct-blowup",
        n_modes: ctx.domain.n_modes(),
        params: ctx.params,
        d_est: ctx.geometry.d_est,
        m_target,
        alpha: c.alpha,
        beta: c.beta,
        shape_frequency: c.shape_frequency,
        j_total: c.j_total,
        i_total: c.i_total,
        j_v: c.j_v,
        j_w: c.j_w,
        additivity_defect: c.additivity_defect,
        cross_term: c.cross_term,
        support_leakage: c.support_leakage,
        truncation_leakage: c.truncation_leakage,
        predicate_holds: c.predicate.holds,
        predicate_lhs: c.predicate.lhs,
        predicate_rhs: c.predicate.rhs,
        classification,
        simulation,
    };
    write_json(&cfg.out_dir, "construction.json", &report)?;
    Ok(report)
}
