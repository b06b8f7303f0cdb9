//! Preconditioned gradient descent on the H₀¹ unit sphere for
//! scale-invariant objectives.
//!
//! Every landscape quantity here (Sobolev ratio, fibering maxima, the
//! Gagliardo–Nirenberg quotient) is 0-homogeneous in the coefficients, so its
//! Euclidean gradient is orthogonal to `c`. Preconditioning by `1/λ_k` (the
//! Riesz map of the H₀¹ inner product) makes the descent direction tangent to
//! the H₀¹ sphere and keeps the effective condition number bounded as
//! `n_modes` grows.

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Objective `f(c)` with Euclidean gradient; `None` when undefined at `c`.
pub(crate) trait SphereObjective: Sync {
    fn value_grad(&self, c: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DescentSettings {
    pub max_iters: usize,
    /// Stop when the preconditioned gradient's H₀¹ norm falls below this
    /// multiple of `1 + |f|`.
    pub grad_tol: f64,
}

impl Default for DescentSettings {
    fn default() -> Self {
        Self { max_iters: 4000, grad_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DescentResult {
    pub value: f64,
    pub point: Vec<f64>,
}

fn h1_normalize(domain: &Domain, c: &mut [f64]) -> bool {
    let n = domain.h1_sq_raw(c).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return false;
    }
    c.iter_mut().for_each(|x| *x /= n);
    true
}

/// Minimizes `obj` from `start`. Round-off stagnation with a small gradient
/// counts as convergence; budget exhaustion is an error carrying the best point.
pub(crate) fn minimize_on_sphere<O: SphereObjective>(
    domain: &Domain,
    obj: &O,
    start: &[f64],
    settings: DescentSettings,
    what: &str,
) -> Result<DescentResult> {
    let eig = domain.eigenvalues();
    let mut c = start.to_vec();
    if !h1_normalize(domain, &mut c) {
        return Err(Error::Domain(format!("{what}: zero start direction")));
    }
    let (mut f, mut g) = obj
        .value_grad(&c)
        .ok_or_else(|| Error::Domain(format!("{what}: objective undefined at start")))?;
    let mut step = 0.1;
    let mut stalls = 0;
    for it in 0..settings.max_iters {
        let d: Vec<f64> = g.iter().zip(eig).map(|(g, l)| g / l).collect();
        // ‖d‖²_{H¹} = Σ λ d² = Σ g·d
        let gn2: f64 = g.iter().zip(&d).map(|(g, d)| g * d).sum();
        let gn = gn2.max(0.0).sqrt();
        if gn <= settings.grad_tol * (1.0 + f.abs()) {
            return Ok(DescentResult { value: f, point: c });
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial: Vec<f64> = c.iter().zip(&d).map(|(c, d)| c - step * d).collect();
            if h1_normalize(domain, &mut trial) {
                if let Some((ft, gt)) = obj.value_grad(&trial) {
                    if ft <= f - 1e-4 * step * gn2 {
                        c = trial;
                        f = ft;
                        g = gt;
                        accepted = true;
                        step *= 1.5;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        if !accepted {
            stalls += 1;
            // Armijo cannot resolve decreases below round-off of f.
            if gn <= 1e-6 * (1.0 + f.abs()) || stalls > 3 {
                if gn <= 1e-6 * (1.0 + f.abs()) {
                    return Ok(DescentResult { value: f, point: c });
                }
                return Err(Error::NonConvergence {
                    what: what.to_string(),
                    iterations: it,
                    best_value: f,
                    grad_norm: gn,
                    best: c,
                });
            }
            step = 0.1;
        } else {
            stalls = 0;
        }
    }
    let d: Vec<f64> = g.iter().zip(eig).map(|(g, l)| g / l).collect();
    let gn = g.iter().zip(&d).map(|(g, d)| g * d).sum::<f64>().max(0.0).sqrt();
    if gn <= 1e-6 * (1.0 + f.abs()) {
        return Ok(DescentResult { value: f, point: c });
    }
    Err(Error::NonConvergence {
        what: what.to_string(),
        iterations: settings.max_iters,
        best_value: f,
        grad_norm: gn,
        best: c,
    })
}
