//! Initial data: construction from a config descriptor and the datum file
//! format (a small domain header followed by the coefficient list).

use std::io::Write;
use std::path::Path;

use kwell::classify::{construct_high_energy, scale_to_energy, FiberBranch};
use kwell::domain::{Domain, DomainKind, DomainSpec, SpectralField};
use kwell::functionals::ModelParams;
use kwell::wellgeometry::WellGeometry;

use crate::config::{DatumSpec, Preset};
use crate::error::CliError;

const HEADER: &str = "# kwell datum v1";

fn padded(domain: &Domain, c: &[f64]) -> Result<SpectralField, CliError> {
    let mut v = vec![0.0; domain.n_modes()];
    v[..c.len()].copy_from_slice(c);
    Ok(SpectralField::new(v)?)
}

/// Materializes the configured initial datum.
pub fn build_datum(spec: &DatumSpec, domain: &Domain, p: &ModelParams, g: &WellGeometry) -> Result<SpectralField, CliError> {
    let unit = |k: usize| SpectralField::unit(domain.n_modes(), k.min(domain.n_modes() - 1));
    let on_ray = |u: &SpectralField, e: f64, b: FiberBranch| -> Result<SpectralField, CliError> {
        Ok(u.scaled(scale_to_energy(domain, u, e, p, b)?))
    };
    match spec {
        DatumSpec::Preset(preset) => match preset {
            Preset::SmallGroundstate => Ok(unit(0).scaled(0.1)),
            Preset::NegativeEnergy => {
                // just past the zero of J along the ground mode, then further out
                let mu = scale_to_energy(domain, &unit(0), 1e-9 * g.d_est, p, FiberBranch::Descending)?;
                Ok(unit(0).scaled(1.1 * mu))
            }
            Preset::CriticalAscending => on_ray(&unit(0), g.d_est, FiberBranch::Ascending),
            Preset::CriticalDescending => on_ray(&unit(0), g.d_est, FiberBranch::Descending),
            Preset::SubcriticalDescending => on_ray(&unit(0), 0.5 * g.d_est, FiberBranch::Descending),
            Preset::HighEnergy => construct_high_energy(domain, p, g, 10.0 * g.d_est)
                .map(|c| c.datum)
                .map_err(|e| CliError::Construct(e.to_string())),
            Preset::SupercriticalSmall => on_ray(&unit(4), 1.3 * g.d_est, FiberBranch::Ascending),
        },
        DatumSpec::Coeffs(c) => padded(domain, c),
        DatumSpec::ModeMix { weights, amplitude } => {
            let w = padded(domain, weights)?;
            let n = domain.l2_sq(&w).sqrt();
            if n == 0.0 {
                return Err(CliError::Config { line: 0, msg: "datum.weights are all zero".into() });
            }
            Ok(w.scaled(amplitude / n))
        }
        DatumSpec::ScaledShape { shape, energy, branch } => on_ray(&padded(domain, shape)?, energy.resolve(g.d_est), *branch),
        DatumSpec::File(path) => {
            let (spec, u) = read_datum(path)?;
            if spec != *domain.spec() {
                return Err(CliError::Config { line: 0, msg: format!("{}: datum domain differs from the configured domain", path.display()) });
            }
            Ok(u)
        }
    }
}

pub fn write_datum<W: Write>(mut w: W, spec: &DomainSpec, u: &SpectralField) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    match spec.kind {
        DomainKind::Interval { length } => writeln!(w, "kind = interval\nlength = {length:?}")?,
        DomainKind::Rectangle { lx, ly } => writeln!(w, "kind = rectangle\nlx = {lx:?}\nly = {ly:?}")?,
    }
    writeln!(w, "n_modes = {}\nn_quad = {}", spec.n_modes, spec.n_quad)?;
    let coeffs: Vec<String> = u.coeffs().iter().map(|c| format!("{c:?}")).collect();
    writeln!(w, "coeffs = {}", coeffs.join(", "))
}

pub fn read_datum(path: &Path) -> Result<(DomainSpec, SpectralField), CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_datum(&text)
}

pub fn parse_datum(text: &str) -> Result<(DomainSpec, SpectralField), CliError> {
    let bad = |line: usize, msg: String| CliError::Config { line, msg: format!("datum file: {msg}") };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some(HEADER) {
        return Err(bad(1, format!("missing '{HEADER}' header")));
    }
    let mut fields = std::collections::HashMap::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| bad(i + 1, format!("expected 'key = value', got '{l}'")))?;
        fields.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| bad(0, format!("missing '{k}'")));
    let num = |k: &str| -> Result<f64, CliError> {
        let (line, v) = get(k)?;
        v.parse().map_err(|_| bad(*line, format!("invalid number '{v}' for {k}")))
    };
    let count = |k: &str| -> Result<usize, CliError> {
        let (line, v) = get(k)?;
        v.parse().map_err(|_| bad(*line, format!("invalid count '{v}' for {k}")))
    };
    let kind = match get("kind")?.1.as_str() {
        "interval" => DomainKind::Interval { length: num("length")? },
        "rectangle" => DomainKind::Rectangle { lx: num("lx")?, ly: num("ly")? },
        other => return Err(bad(get("kind")?.0, format!("unknown kind '{other}'"))),
    };
    let spec = DomainSpec { kind, n_modes: count("n_modes")?, n_quad: count("n_quad")? };
    let (line, list) = get("coeffs")?;
    let coeffs = list
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad(*line, format!("invalid coefficient '{}'", x.trim()))))
        .collect::<Result<Vec<_>, _>>()?;
    let domain = Domain::new(spec)?;
    if coeffs.len() != domain.n_modes() {
        return Err(bad(*line, format!("{} coefficients for {} modes", coeffs.len(), domain.n_modes())));
    }
    Ok((spec, SpectralField::new(coeffs)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datum_round_trips_bitwise() {
        let spec = DomainSpec::interval(std::f64::consts::PI, 5);
        let u = SpectralField::new(vec![0.1, -1.0 / 3.0, 1e-300, 0.0, std::f64::consts::E]).unwrap();
        let mut buf = Vec::new();
        write_datum(&mut buf, &spec, &u).unwrap();
        let (s2, u2) = parse_datum(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(s2, spec);
        let bits = |f: &SpectralField| f.coeffs().iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&u), bits(&u2));
    }

    #[test]
    fn rejects_wrong_count() {
        let text = "# kwell datum v1\nkind = interval\nlength = 3.0\nn_modes = 3\nn_quad = 11\ncoeffs = 1, 2\n";
        assert!(matches!(parse_datum(text), Err(CliError::Config { line: 6, .. })));
    }
}
