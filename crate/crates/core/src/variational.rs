//! Free-energy minimization over pairs of probability densities
//!
//! ```text
//! J_λ(ρ₁, ρ₂) = (1/r₁)∫ρ₁^{r₁} + (1/r₂)∫ρ₂^{r₂} − λ∫ρ₁G[ρ₂],   r_i = 1 + 1/p_i,
//! ```
//!
//! by exact alternating minimization: for fixed `ρ₁` the minimizer in `ρ₂` is
//! `(α₂ + λG[ρ₁])₊^{p₂}` with `α₂` fixed by unit mass, and symmetrically.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mesh::{DomainMesh, GridField};
use crate::solver::{pos_pow, ProblemParams, SolutionState};

/// `(ρ₁, ρ₂)`, nonnegative with unit integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPair {
    pub rho: [GridField; 2],
}

impl DensityPair {
    /// Validates nonnegativity and unit mass within `tol`.
    pub fn new(mesh: &DomainMesh, rho1: GridField, rho2: GridField, tol: f64) -> Result<Self> {
        for (i, r) in [&rho1, &rho2].into_iter().enumerate() {
            mesh.check(r)?;
            if r.min() < 0.0 {
                return Err(Error::InvalidParams {
                    constraint: "density_nonnegative",
                    detail: format!("rho{} has minimum {}", i + 1, r.min()),
                });
            }
            let m = mesh.integrate(r)?;
            if (m - 1.0).abs() > tol {
                return Err(Error::InvalidParams {
                    constraint: "density_unit_mass",
                    detail: format!("rho{} has mass {m}", i + 1),
                });
            }
        }
        Ok(DensityPair { rho: [rho1, rho2] })
    }

    /// `ρ_i ≡ 1/Σw`, the λ = 0 minimizer.
    pub fn uniform(mesh: &DomainMesh) -> Self {
        let c = 1.0 / mesh.quad_weights().iter().sum::<f64>();
        DensityPair { rho: [GridField::constant(mesh.len(), c), GridField::constant(mesh.len(), c)] }
    }

    /// Densities of a solution state.
    pub fn from_state(state: &SolutionState, params: &ProblemParams) -> Self {
        DensityPair { rho: [state.density(params, 0), state.density(params, 1)] }
    }
}

/// Both sides of `1/r₁ + 1/r₂ < N/(N−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityCertificate {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn coercivity_gate(params: &ProblemParams) -> CoercivityCertificate {
    let n = params.dim as f64;
    let lhs = 1.0 / params.r(0) + 1.0 / params.r(1);
    let rhs = n / (n - 1.0);
    CoercivityCertificate { lhs, rhs, holds: lhs < rhs }
}

/// `∫ρ₁G[ρ₂]`.
pub fn interaction(mesh: &DomainMesh, d: &DensityPair) -> Result<f64> {
    let g = mesh.green_apply(&d.rho[1])?;
    Ok(mesh.inner(d.rho[0].as_slice(), g.as_slice()))
}

fn entropy(mesh: &DomainMesh, params: &ProblemParams, d: &DensityPair) -> f64 {
    (0..2)
        .map(|i| {
            let r = params.r(i);
            let s: Vec<f64> = d.rho[i].as_slice().iter().map(|&x| pos_pow(x, r)).collect();
            mesh.integrate_slice(&s) / r
        })
        .sum()
}

/// `J_λ(ρ₁, ρ₂)`.
pub fn free_energy(mesh: &DomainMesh, params: &ProblemParams, lambda: f64, d: &DensityPair) -> Result<f64> {
    mesh.check(&d.rho[0])?;
    mesh.check(&d.rho[1])?;
    Ok(entropy(mesh, params, d) - lambda * interaction(mesh, d)?)
}

fn mass(mesh: &DomainMesh, alpha: f64, lambda: f64, psi: &[f64], p: f64) -> f64 {
    let w = mesh.quad_weights();
    psi.iter().zip(w).map(|(&s, &wk)| wk * pos_pow(alpha + lambda * s, p)).sum()
}

/// The `α` with `∫(α + λψ)₊^{p_i} = 1`, by bisection on a certified bracket.
/// `i ∈ {1, 2}` selects the exponent.
pub fn alpha_from_mass(mesh: &DomainMesh, params: &ProblemParams, lambda: f64, psi: &GridField, i: usize) -> Result<f64> {
    if !(1..=2).contains(&i) {
        return Err(Error::Undefined(format!("component index must be 1 or 2, got {i}")));
    }
    mesh.check(psi)?;
    let p = params.p(i - 1);
    let s = psi.as_slice();
    let total: f64 = mesh.quad_weights().iter().sum();
    let mut lo = -lambda * psi.max() - 1.0;
    let mut hi = (1.0 / total).powf(1.0 / p) - lambda * psi.min();
    let (mlo, mhi) = (mass(mesh, lo, lambda, s, p), mass(mesh, hi, lambda, s, p));
    if !(mlo < 1.0 && mhi >= 1.0) {
        return Err(Error::Bracket { what: "alpha_from_mass", detail: format!("mass {mlo} at {lo}, {mhi} at {hi}") });
    }
    while hi - lo > 1e-13 * (1.0 + hi.abs().max(lo.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mesh, mid, lambda, s, p) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stopping rule and budget of [`coordinate_minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub j_tol: f64,
    pub d_tol: f64,
    pub max_sweeps: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { j_tol: 1e-11, d_tol: 1e-9, max_sweeps: 10_000 }
    }
}

/// One line of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub j: f64,
    pub mass_defect: [f64; 2],
    pub alpha: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub sweeps: usize,
    pub converged: bool,
    /// `J` after every half-step, starting with the initial value.
    pub half_step_energies: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl ConvergenceReport {
    /// Writes `sweep, J, mass_defect_1, mass_defect_2, alpha1, alpha2`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("sweep,J,mass_defect_1,mass_defect_2,alpha1,alpha2\n");
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.sweep,
                fmt_f64(r.j),
                fmt_f64(r.mass_defect[0]),
                fmt_f64(r.mass_defect[1]),
                fmt_f64(r.alpha[0]),
                fmt_f64(r.alpha[1])
            );
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Best response of component `i` to the other density: returns `(α_i, ρ_i)`.
fn best_response(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    other: &GridField,
    i: usize,
) -> Result<(f64, GridField)> {
    let psi = mesh.green_apply(other)?;
    let a = alpha_from_mass(mesh, params, lambda, &psi, i + 1)?;
    let p = params.p(i);
    Ok((a, psi.map(|s| pos_pow(a + lambda * s, p))))
}

/// Alternating exact minimization of `J_λ` from `initial`.
pub fn coordinate_minimize(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    initial: &DensityPair,
    opts: &MinimizeOptions,
) -> Result<(SolutionState, DensityPair, ConvergenceReport)> {
    let gate = coercivity_gate(params);
    if !gate.holds {
        return Err(Error::InvalidParams {
            constraint: "coercivity",
            detail: format!("1/r1 + 1/r2 = {} is not below {}", gate.lhs, gate.rhs),
        });
    }
    let mut d = initial.clone();
    let mut j = free_energy(mesh, params, lambda, &d)?;
    let mut energies = vec![j];
    let mut trace = Vec::new();
    let mut alpha = [f64::NAN; 2];
    let mut converged = false;
    let mut sweeps = 0;
    let bug_trap = |prev: f64, next: f64, sweep: usize| -> Result<()> {
        if next > prev + 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::EnergyIncrease { sweep, increase: next - prev });
        }
        Ok(())
    };
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let j_start = j;
        let mut change = 0.0;
        for i in [1usize, 0] {
            let (a, rho) = best_response(mesh, params, lambda, &d.rho[1 - i], i)?;
            change += mesh.integrate_slice(
                &rho.as_slice().iter().zip(d.rho[i].as_slice()).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>(),
            );
            alpha[i] = a;
            d.rho[i] = rho;
            let jn = free_energy(mesh, params, lambda, &d)?;
            bug_trap(j, jn, sweeps)?;
            j = jn;
            energies.push(j);
        }
        trace.push(TraceRow {
            sweep: sweeps,
            j,
            mass_defect: [0, 1].map(|i| mesh.integrate_slice(d.rho[i].as_slice()) - 1.0),
            alpha,
        });
        if j_start - j < opts.j_tol && change < opts.d_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { solver: "coordinate minimization", iterations: sweeps, residual: f64::NAN });
    }
    // ψ₁ = G[ρ₂], ψ₂ = G[ρ₁] with α from the final densities
    let psi1 = mesh.green_apply(&d.rho[1])?;
    let psi2 = mesh.green_apply(&d.rho[0])?;
    let a1 = alpha_from_mass(mesh, params, lambda, &psi1, 1)?;
    let a2 = alpha_from_mass(mesh, params, lambda, &psi2, 2)?;
    let state = SolutionState { lambda, alpha: [a1, a2], psi: [psi1, psi2] };
    Ok((state, d, ConvergenceReport { sweeps, converged, half_step_energies: energies, trace }))
}

/// Nodewise check of the vanishing-set condition: where `ρ_i = 0` the field
/// `α_i + λψ_i` must be `≤ tol`. Returns the largest violation.
pub fn vanishing_set_violation(state: &SolutionState, d: &DensityPair, tol: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        for (v, r) in state.v(i).iter().zip(d.rho[i].as_slice()) {
            if *r == 0.0 && *v > tol {
                worst = worst.max(*v);
            }
        }
    }
    worst
}

/// Envelope inequalities between two minimizers `(λ_a, d_a)`, `(λ_b, d_b)`:
/// `F(λ_b) ≤ J_{λ_b}(d_a)` and `F(λ_a) ≤ J_{λ_a}(d_b)`. Returns both margins
/// `J − F` (nonnegative when the inequalities hold).
pub fn envelope_margins(
    mesh: &DomainMesh,
    params: &ProblemParams,
    a: (f64, &DensityPair),
    b: (f64, &DensityPair),
) -> Result<(f64, f64)> {
    let fa = free_energy(mesh, params, a.0, a.1)?;
    let fb = free_energy(mesh, params, b.0, b.1)?;
    Ok((free_energy(mesh, params, b.0, a.1)? - fb, free_energy(mesh, params, a.0, b.1)? - fa))
}
