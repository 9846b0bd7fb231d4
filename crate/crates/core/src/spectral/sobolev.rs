//! Best Sobolev constants `Λ(Ω, t) = inf ∫|∇w|² / (∫|w|^t)^{2/t}` and the
//! spectral lower bound they provide.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::DomainMesh;
use crate::solver::{Branch, ProblemParams};

const RANDOM_RESTARTS: usize = 3;
const MAX_ITER: usize = 5000;
const ARMIJO: f64 = 1e-4;
const SEED: u64 = 0x50b0_1e55;

fn lt_norm(mesh: &DomainMesh, u: &[f64], t: f64) -> f64 {
    mesh.integrate_slice(&u.iter().map(|v| v.abs().powf(t)).collect::<Vec<_>>())
}

/// Gradient flow from `u`, preconditioned by the inverse stiffness matrix,
/// with the iterate renormalized to `∫|u|^t = 1`. Returns the final quotient
/// or `None` without convergence.
fn descend(mesh: &DomainMesh, mut u: Vec<f64>, t: f64) -> Result<Option<f64>> {
    let normalize = |u: &mut Vec<f64>| {
        let b = lt_norm(mesh, u, t).powf(1.0 / t);
        u.iter_mut().for_each(|v| *v /= b);
    };
    normalize(&mut u);
    let mut r = mesh.gradient_dot_slice(&u, &u);
    let mut small = 0;
    for _ in 0..MAX_ITER {
        // g = K⁻¹∇R = 2(u − R·G[|u|^{t−2}u]) at ∫|u|^t = 1
        let src: Vec<f64> = u.iter().map(|&v| v.abs().powf(t - 2.0) * v).collect();
        let gsrc = mesh.green_slice(&src)?;
        let g: Vec<f64> = u.iter().zip(&gsrc).map(|(a, b)| 2.0 * (a - r * b)).collect();
        let slope = mesh.gradient_dot_slice(&g, &g);
        if slope <= 1e-24 * r {
            return Ok(Some(r));
        }
        let mut tau = 0.5;
        let mut next = None;
        while tau > 1e-8 {
            let mut trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - tau * b).collect();
            let b = lt_norm(mesh, &trial, t);
            if b > 0.0 {
                let rt = mesh.gradient_dot_slice(&trial, &trial) / b.powf(2.0 / t);
                if rt <= r - ARMIJO * tau * slope {
                    normalize(&mut trial);
                    next = Some((trial, rt));
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some((un, rn)) = next else {
            // no admissible decrease left: stationary to rounding
            return Ok(Some(r));
        };
        if r - rn <= 1e-14 * r {
            small += 1;
            if small >= 3 {
                return Ok(Some(rn));
            }
        } else {
            small = 0;
        }
        u = un;
        r = rn;
    }
    Ok(None)
}

/// `Λ(Ω, t)` for `2 ≤ t < ∞`: smallest quotient over several starts
/// (the torsion function and smoothed random fields).
pub fn sobolev_constant(mesh: &DomainMesh, t: f64) -> Result<f64> {
    if !(t >= 2.0 && t.is_finite()) {
        return Err(Error::InvalidParams { constraint: "sobolev_exponent", detail: format!("t = {t}") });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut starts = vec![mesh.torsion()?.into_vec()];
    for _ in 0..RANDOM_RESTARTS {
        let noise: Vec<f64> = (0..mesh.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        starts.push(mesh.green_slice(&noise)?);
    }
    let mut best: Option<f64> = None;
    for s in starts {
        if let Some(r) = descend(mesh, s, t)? {
            best = Some(best.map_or(r, |b: f64| b.min(r)));
        }
    }
    best.ok_or(Error::NoConvergence { solver: "sobolev gradient flow", iterations: MAX_ITER, residual: f64::NAN })
}

/// `Λ(Ω, t)` for each requested `t`, plus whether the values are
/// nonincreasing in `t` (as Hölder's inequality requires when `|Ω| = 1`).
pub fn sobolev_profile(mesh: &DomainMesh, ts: &[f64]) -> Result<(Vec<f64>, bool)> {
    let values: Vec<f64> = ts.iter().map(|&t| sobolev_constant(mesh, t)).collect::<Result<_>>()?;
    let mut idx: Vec<usize> = (0..ts.len()).collect();
    idx.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let monotone = idx.windows(2).all(|w| values[w[1]] <= values[w[0]] * (1.0 + 1e-9));
    Ok((values, monotone))
}

/// One branch state checked against the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBoundEntry {
    pub lambda: f64,
    pub sigma1: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBoundReport {
    /// `Λ(Ω, 2p₂)` with `p₂ = max(p₁, p₂)`.
    pub sobolev: f64,
    /// `Λ(Ω, 2p₂)/p₂`.
    pub threshold: f64,
    pub entries: Vec<SpectralBoundEntry>,
}

impl SpectralBoundReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.pass).count()
    }
}

/// Checks `σ₁ > 0` at every record with `λ ≤ Λ(Ω, 2p₂)/p₂`.
pub fn check_spectral_bound(branch: &Branch, mesh: &DomainMesh, params: &ProblemParams) -> Result<SpectralBoundReport> {
    let p2 = params.p1.max(params.p2);
    if branch.records.is_empty() {
        return Ok(SpectralBoundReport { sobolev: f64::NAN, threshold: f64::NAN, entries: Vec::new() });
    }
    let sobolev = sobolev_constant(mesh, 2.0 * p2)?;
    let threshold = sobolev / p2;
    let entries = branch
        .records
        .iter()
        .filter(|r| r.lambda <= threshold)
        .map(|r| SpectralBoundEntry { lambda: r.lambda, sigma1: r.sigma1, pass: r.sigma1 > 0.0 })
        .collect();
    Ok(SpectralBoundReport { sobolev, threshold, entries })
}
