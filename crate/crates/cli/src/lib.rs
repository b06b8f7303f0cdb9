//! Command-line driver: configuration, experiment execution and report
//! emission for the `kwell` laboratory.

pub mod commands;
pub mod config;
pub mod datum;
pub mod error;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{Level, RunConfig};
use error::CliError;
use verify::Suite;

#[derive(Debug, Parser)]
#[command(name = "kwell", version, about = "Potential-well analysis and blow-up/decay experiments for a Kirchhoff-type parabolic equation")]
pub struct Cli {
    /// Key-value run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sobolev constant, depth, depth curve and radii.
    Analyze,
    /// Classify the configured datum and integrate it.
    Simulate,
    /// Locate the decay/blow-up threshold along a ray.
    Sweep {
        /// Lower end of the bracket; must decay
        #[arg(long)]
        mu_lo: Option<f64>,
        /// Upper end of the bracket; must blow up
        #[arg(long)]
        mu_hi: Option<f64>,
    },
    /// Run a property suite; exits 5 if any property fails.
    Verify {
        #[arg(long, value_enum, default_value = "lemmas")]
        suite: Suite,
        /// Negate every use of I inside the suite (the suite must then fail).
        #[arg(long, hide = true)]
        mutate_flip_nehari: bool,
    },
    /// Build a datum with energy M (number, or `<k>d` for k times the depth)
    /// that provably blows up.
    ConstructBlowup {
        /// Target energy, e.g. `40` or `10d`
        #[arg(long)]
        m_target: Option<Level>,
        /// Integrate the constructed datum as well
        #[arg(long)]
        simulate_after_construct: bool,
    },
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

/// Runs one command, printing a short summary. Returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Analyze => {
            let r = commands::cmd_analyze(&cfg)?;
            println!("S_est = {:.9}  d_est = {:.9}  d_lower = {:.9}  delta_tilde = {:?}", r.s_est, r.d_est, r.d_lower, r.delta_tilde);
        }
        Command::Simulate => {
            let r = commands::cmd_simulate(&cfg)?;
            let c = &r.classification;
            println!("J0 = {:.9}  I0 = {:.9}  regime {:?}  prediction {:?}", c.j0, c.i0, c.regime, c.prediction);
            println!("observed {:?} after {} steps, agreement {:?}", r.run.outcome, r.run.steps, r.agreement);
        }
        Command::Sweep { mu_lo, mu_hi } => {
            if let Some(x) = mu_lo {
                cfg.mu_lo = *x;
            }
            if let Some(x) = mu_hi {
                cfg.mu_hi = *x;
            }
            let r = commands::cmd_sweep(&cfg)?;
            let s = &r.sweep;
            println!("mu* = {:.6} in [{:.6}, {:.6}], {} probes, {} flips", s.mu_star, s.mu_lo, s.mu_hi, s.probes.len(), s.flips);
        }
        Command::Verify { suite, mutate_flip_nehari } => {
            let r = verify::cmd_verify(&cfg, *suite, *mutate_flip_nehari)?;
            for p in &r.results {
                println!("{} {:<28} margin {:+.3e}  {}", if p.pass { "PASS" } else { "FAIL" }, p.name, p.margin, p.detail);
            }
            println!("{} passed, {} failed", r.passed, r.failed);
            if r.failed > 0 {
                return Err(CliError::SuiteFailed { failed: r.failed, total: r.results.len() });
            }
        }
        Command::ConstructBlowup { m_target, simulate_after_construct } => {
            if let Some(m) = m_target {
                cfg.m_target = *m;
            }
            let r = commands::cmd_construct_blowup(&cfg, *simulate_after_construct)?;
            println!(
                "M = {:.6}  J(u_M) = {:.12}  I(u_M) = {:.6e}  predicate {}  prediction {:?}",
                r.m_target, r.j_total, r.i_total, r.predicate_holds, r.classification.prediction
            );
            if let Some(s) = &r.simulation {
                println!("observed {:?}", s.outcome);
            }
        }
    }
    Ok(0)
}
