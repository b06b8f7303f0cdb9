//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! domain.n_modes = 64
//! model.q = 5
//! solver.rel_tol = 1e-8
//! datum.kind = preset
//! datum.preset = small-groundstate
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kwell::classify::FiberBranch;
use kwell::domain::DomainSpec;
use kwell::dynamics::SolverControls;
use kwell::functionals::ModelParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SmallGroundstate,
    NegativeEnergy,
    CriticalAscending,
    CriticalDescending,
    SubcriticalDescending,
    HighEnergy,
    SupercriticalSmall,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::SmallGroundstate,
        Preset::NegativeEnergy,
        Preset::CriticalAscending,
        Preset::CriticalDescending,
        Preset::SubcriticalDescending,
        Preset::HighEnergy,
        Preset::SupercriticalSmall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SmallGroundstate => "small-groundstate",
            Preset::NegativeEnergy => "negative-energy",
            Preset::CriticalAscending => "critical-ascending",
            Preset::CriticalDescending => "critical-descending",
            Preset::SubcriticalDescending => "subcritical-descending",
            Preset::HighEnergy => "high-energy",
            Preset::SupercriticalSmall => "supercritical-small",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// An energy level, absolute or as a multiple of the computed depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Absolute(f64),
    DepthMultiple(f64),
}

impl Level {
    pub fn resolve(self, d_est: f64) -> f64 {
        match self {
            Level::Absolute(x) => x,
            Level::DepthMultiple(k) => k * d_est,
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    /// `12.5` or `10d` (ten times the depth).
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, mult) = match s.strip_suffix('d') {
            Some(head) => (if head.is_empty() { "1" } else { head }, true),
            None => (s, false),
        };
        let x: f64 = num.trim().parse().map_err(|_| format!("expected a number or '<k>d', got '{s}'"))?;
        if !x.is_finite() {
            return Err(format!("level must be finite, got '{s}'"));
        }
        Ok(if mult { Level::DepthMultiple(x) } else { Level::Absolute(x) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Preset(Preset),
    /// Coefficients in the sine basis, zero-padded to the mode count.
    Coeffs(Vec<f64>),
    /// Weights normalized to unit `L²` norm, then scaled by `amplitude`.
    ModeMix { weights: Vec<f64>, amplitude: f64 },
    /// Shape coefficients scaled along their ray to a target energy.
    ScaledShape { shape: Vec<f64>, energy: Level, branch: FiberBranch },
    /// A datum file written by an earlier run.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub params: ModelParams,
    pub controls: SolverControls,
    pub datum: DatumSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub geometry_restarts: usize,
    pub geometry_refine: bool,
    pub bounds_samples: usize,
    pub norm_margin: f64,
    pub sweep_shape: Vec<f64>,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub m_target: Level,
    pub verify_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::interval(std::f64::consts::PI, 64),
            params: ModelParams::reference(),
            controls: SolverControls::default(),
            datum: DatumSpec::Preset(Preset::SmallGroundstate),
            seed: 1,
            out_dir: PathBuf::from("out"),
            geometry_restarts: 6,
            geometry_refine: false,
            bounds_samples: 400,
            norm_margin: 0.1,
            sweep_shape: vec![1.0],
            mu_lo: 0.5,
            mu_hi: 3.0,
            m_target: Level::DepthMultiple(10.0),
            verify_samples: 1000,
        }
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid number '{v}'"))
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().map_err(|_| format!("invalid number '{x}' in list")))
        .collect()
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_branch(v: &str) -> Result<FiberBranch, String> {
    match v {
        "ascending" => Ok(FiberBranch::Ascending),
        "descending" => Ok(FiberBranch::Descending),
        _ => Err(format!("expected ascending or descending, got '{v}'")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config { line: 0, msg: format!("{}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(CliError::Config { line, msg: format!("expected 'key = value', got '{body}'") });
            };
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (line, v.trim().to_string())).is_some() {
                return Err(CliError::Config { line, msg: format!("duplicate key '{key}'") });
            }
        }

        let mut cfg = RunConfig::default();
        let (mut length, mut n_modes, mut n_quad) = (std::f64::consts::PI, 64usize, None::<usize>);
        let (mut a, mut b, mut q) = (cfg.params.a, cfg.params.b, cfg.params.q);
        let mut kind: Option<(usize, String)> = None;
        let mut datum: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        let mut last_line = 0;

        for (key, (line, v)) in &entries {
            let line = *line;
            last_line = last_line.max(line);
            let wrap = |r: Result<(), String>| r.map_err(|msg| CliError::Config { line, msg: format!("{key}: {msg}") });
            let c = &mut cfg.controls;
            wrap(match key.as_str() {
                "seed" => parse_num(v).map(|x| cfg.seed = x),
                "output.dir" => {
                    cfg.out_dir = PathBuf::from(v);
                    Ok(())
                }
                "domain.length" => parse_num(v).map(|x| length = x),
                "domain.n_modes" => parse_num(v).map(|x| n_modes = x),
                "domain.n_quad" => parse_num(v).map(|x| n_quad = Some(x)),
                "model.a" => parse_num(v).map(|x| a = x),
                "model.b" => parse_num(v).map(|x| b = x),
                "model.q" => parse_num(v).map(|x| q = x),
                "solver.dt_init" => parse_num(v).map(|x| c.dt_init = x),
                "solver.dt_min" => parse_num(v).map(|x| c.dt_min = x),
                "solver.dt_max" => parse_num(v).map(|x| c.dt_max = x),
                "solver.t_max" => parse_num(v).map(|x| c.t_max = x),
                "solver.rel_tol" => parse_num(v).map(|x| c.rel_tol = x),
                "solver.norm_cap" => parse_num(v).map(|x| c.norm_cap = x),
                "solver.decay_floor" => parse_num(v).map(|x| c.decay_floor = x),
                "solver.snapshot_stride" => parse_num(v).map(|x| c.snapshot_stride = x),
                "solver.max_steps" => parse_num(v).map(|x| c.max_steps = x),
                "geometry.restarts" => parse_num(v).map(|x| cfg.geometry_restarts = x),
                "geometry.refine" => parse_bool(v).map(|x| cfg.geometry_refine = x),
                "bounds.samples" => parse_num(v).map(|x| cfg.bounds_samples = x),
                "classify.norm_margin" => parse_num(v).map(|x| cfg.norm_margin = x),
                "sweep.shape" => parse_list(v).map(|x| cfg.sweep_shape = x),
                "sweep.mu_lo" => parse_num(v).map(|x| cfg.mu_lo = x),
                "sweep.mu_hi" => parse_num(v).map(|x| cfg.mu_hi = x),
                "construct.m_target" => v.parse().map(|x| cfg.m_target = x),
                "verify.samples" => parse_num(v).map(|x| cfg.verify_samples = x),
                "datum.kind" => {
                    kind = Some((line, v.clone()));
                    Ok(())
                }
                k @ ("datum.preset" | "datum.coeffs" | "datum.weights" | "datum.amplitude" | "datum.shape" | "datum.energy"
                | "datum.branch" | "datum.path") => {
                    datum.insert(&k[6..], (line, v.clone()));
                    Ok(())
                }
                _ => Err("unknown key".into()),
            })?;
        }

        let mut spec = DomainSpec::interval(length, n_modes);
        if let Some(nq) = n_quad {
            spec = spec.with_quad(nq);
        }
        // validate eagerly so failures point at the config
        let at = |k: &str| entries.get(k).map_or(last_line, |e| e.0);
        let n = kwell::domain::Domain::new(spec).map_err(|e| CliError::Config { line: at("domain.n_modes"), msg: e.to_string() })?.n_modes();
        cfg.domain = spec;
        cfg.params = ModelParams::new(a, b, q).map_err(|e| CliError::Config { line: at("model.q"), msg: e.to_string() })?;
        cfg.controls.validate().map_err(|e| CliError::Config { line: last_line, msg: e.to_string() })?;
        cfg.datum = parse_datum(kind, &datum, last_line)?;
        let list_len = match &cfg.datum {
            DatumSpec::Coeffs(c) => Some(("datum.coeffs", c.len())),
            DatumSpec::ModeMix { weights, .. } => Some(("datum.weights", weights.len())),
            DatumSpec::ScaledShape { shape, .. } => Some(("datum.shape", shape.len())),
            _ => None,
        };
        if let Some((k, len)) = list_len.filter(|(_, len)| *len == 0 || *len > n) {
            return Err(CliError::Config { line: at(k), msg: format!("{k} has {len} entries, need 1..={n}") });
        }
        if cfg.sweep_shape.is_empty() || cfg.sweep_shape.len() > n {
            return Err(CliError::Config { line: at("sweep.shape"), msg: format!("sweep.shape needs 1..={n} entries") });
        }
        if let Some(extra) = datum.keys().find(|k| !datum_keys(&cfg.datum).contains(k)) {
            return Err(CliError::Config { line: datum[extra].0, msg: format!("datum.{extra} does not apply to this datum kind") });
        }
        Ok(cfg)
    }
}

fn datum_keys(d: &DatumSpec) -> &'static [&'static str] {
    match d {
        DatumSpec::Preset(_) => &["preset"],
        DatumSpec::Coeffs(_) => &["coeffs"],
        DatumSpec::ModeMix { .. } => &["weights", "amplitude"],
        DatumSpec::ScaledShape { .. } => &["shape", "energy", "branch"],
        DatumSpec::File(_) => &["path"],
    }
}

fn parse_datum(kind: Option<(usize, String)>, f: &BTreeMap<&str, (usize, String)>, last_line: usize) -> Result<DatumSpec, CliError> {
    let (kline, kind) = kind.unwrap_or((0, if f.contains_key("coeffs") { "coeffs" } else { "preset" }.into()));
    let need = |k: &str| -> Result<&(usize, String), CliError> {
        f.get(k).ok_or_else(|| CliError::Config { line: kline.max(last_line), msg: format!("datum.{k} is required for datum.kind = {kind}") })
    };
    let conv = |(line, v): &(usize, String), r: Result<DatumSpec, String>| r.map_err(|msg| CliError::Config { line: *line, msg: format!("{msg} ('{v}')") });
    match kind.as_str() {
        "preset" => match f.get("preset") {
            None => Ok(DatumSpec::Preset(Preset::SmallGroundstate)),
            Some(e) => conv(e, Preset::parse(&e.1).map(DatumSpec::Preset).ok_or_else(|| "unknown preset".to_string())),
        },
        "coeffs" => {
            let e = need("coeffs")?;
            conv(e, parse_list(&e.1).map(DatumSpec::Coeffs))
        }
        "mode-mix" => {
            let w = need("weights")?;
            let weights = parse_list(&w.1).map_err(|msg| CliError::Config { line: w.0, msg })?;
            let amp = need("amplitude")?;
            let amplitude = parse_num(&amp.1).map_err(|msg| CliError::Config { line: amp.0, msg })?;
            Ok(DatumSpec::ModeMix { weights, amplitude })
        }
        "scaled-shape" => {
            let s = need("shape")?;
            let shape = parse_list(&s.1).map_err(|msg| CliError::Config { line: s.0, msg })?;
            let e = need("energy")?;
            let energy = e.1.parse().map_err(|msg| CliError::Config { line: e.0, msg })?;
            let b = need("branch")?;
            let branch = parse_branch(&b.1).map_err(|msg| CliError::Config { line: b.0, msg })?;
            Ok(DatumSpec::ScaledShape { shape, energy, branch })
        }
        "file" => Ok(DatumSpec::File(PathBuf::from(&need("path")?.1))),
        other => Err(CliError::Config { line: kline, msg: format!("unknown datum.kind '{other}'") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn reads_dotted_keys() {
        let cfg = RunConfig::parse(
            "seed = 9\nsolver.rel_tol = 1e-8 # tight\ndatum.kind = scaled-shape\ndatum.shape = 1, 0, 0.5\ndatum.energy = 0.5d\ndatum.branch = descending\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.controls.rel_tol, 1e-8);
        assert_eq!(
            cfg.datum,
            DatumSpec::ScaledShape { shape: vec![1.0, 0.0, 0.5], energy: Level::DepthMultiple(0.5), branch: FiberBranch::Descending }
        );
    }

    #[test]
    fn errors_carry_the_line() {
        let err = RunConfig::parse("seed = 1\n\nmodel.q = five\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 3, .. }), "{err}");
        let err = RunConfig::parse("foo.bar = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 1, .. }));
        let err = RunConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }));
        let err = RunConfig::parse("model.q = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 1, .. }), "{err}");
        let err = RunConfig::parse("datum.kind = preset\ndatum.weights = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }));
    }

    #[test]
    fn levels() {
        assert_eq!("10d".parse::<Level>().unwrap(), Level::DepthMultiple(10.0));
        assert_eq!("d".parse::<Level>().unwrap(), Level::DepthMultiple(1.0));
        assert_eq!("12.5".parse::<Level>().unwrap(), Level::Absolute(12.5));
        assert!("x".parse::<Level>().is_err());
    }
}
