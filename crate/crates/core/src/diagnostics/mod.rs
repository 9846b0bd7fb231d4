//! Branch observables and the identity/monotonicity audits run on them.
//!
//! Energies of a state with densities `ρ_i = (α_i + λψ_i)₊^{p_i}`:
//! - `E = ∫ρ₁G[ρ₂]`,
//! - `F = (1/r₁)∫ρ₁^{r₁} + (1/r₂)∫ρ₂^{r₂} − λE`,
//! - `γ = p₁α₁/(p₁+1) + p₂α₂/(p₂+1)`,
//! - `Ẽ = ½∫ρ₂G[ρ₂] + ½∫ρ₁G[ρ₁]`.

mod fourier;
mod free_boundary;
mod hamiltonian;

pub use fourier::{fourier_audit, FourierDiagnostics};
pub use free_boundary::{free_boundary_extract, write_contour_csv, Contour};
pub use hamiltonian::{map_to_h, HImage};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::io::fmt_f64;
use crate::mesh::DomainMesh;
use crate::solver::{pos_pow, ProblemParams, SolutionState};
use crate::spectral::SpectralSet;

/// Column order of the branch CSV.
pub const BRANCH_CSV_HEADER: [&str; 13] = [
    "lambda", "alpha1", "alpha2", "E", "F", "gamma", "E_self", "sigma1", "mu1_H", "mu2_H", "min_v1", "min_v2",
    "fb_flag",
];

/// Diagnostics of one branch state.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub lambda: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub e: f64,
    pub f: f64,
    pub gamma: f64,
    pub e_self: f64,
    /// `NaN` when not computed (non-positive state).
    pub sigma1: f64,
    pub mu1_h: f64,
    pub mu2_h: f64,
    pub min_v1: f64,
    pub min_v2: f64,
    pub fb_flag: bool,
    /// `E` as `∫ρ₁G[ρ₂]`, `∫ρ₁ψ₁`, `∫ρ₂ψ₂`, `∫(∇ψ₁, ∇ψ₂)`.
    pub e_ways: [f64; 4],
}

impl BranchRecord {
    /// Largest pairwise difference of the four energy evaluations.
    pub fn e_spread(&self) -> f64 {
        let mx = self.e_ways.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = self.e_ways.iter().copied().fold(f64::INFINITY, f64::min);
        mx - mn
    }

    /// `F − γ − λ((p₁p₂−1)/((p₁+1)(p₂+1)))E`, zero at every solution since
    /// `∫ρ_i^{r_i} = α_i + λE`.
    pub fn f_identity_defect(&self, params: &ProblemParams) -> f64 {
        self.f - self.gamma - self.lambda * energy_coefficient(params) * self.e
    }

    fn csv_row(&self) -> String {
        let vals = [
            self.lambda,
            self.alpha1,
            self.alpha2,
            self.e,
            self.f,
            self.gamma,
            self.e_self,
            self.sigma1,
            self.mu1_h,
            self.mu2_h,
            self.min_v1,
            self.min_v2,
        ];
        let mut s: Vec<String> = vals.iter().map(|&v| fmt_f64(v)).collect();
        s.push(if self.fb_flag { "1" } else { "0" }.to_string());
        s.join(",")
    }
}

/// `(p₁p₂−1)/((p₁+1)(p₂+1))`.
pub fn energy_coefficient(params: &ProblemParams) -> f64 {
    (params.p1 * params.p2 - 1.0) / ((params.p1 + 1.0) * (params.p2 + 1.0))
}

/// `γ = p₁α₁/(p₁+1) + p₂α₂/(p₂+1)`.
pub fn gamma(params: &ProblemParams, alpha: [f64; 2]) -> f64 {
    params.p1 * alpha[0] / (params.p1 + 1.0) + params.p2 * alpha[1] / (params.p2 + 1.0)
}

/// Populates every observable of `state`; `sigma1` is passed through.
pub fn record(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState, sigma1: f64) -> Result<BranchRecord> {
    let rho = [state.density(params, 0), state.density(params, 1)];
    let g = [mesh.green_apply(&rho[0])?, mesh.green_apply(&rho[1])?];
    let psi = &state.psi;
    let e_ways = [
        mesh.inner(rho[0].as_slice(), g[1].as_slice()),
        mesh.inner(rho[0].as_slice(), psi[0].as_slice()),
        mesh.inner(rho[1].as_slice(), psi[1].as_slice()),
        mesh.gradient_dot(&psi[0], &psi[1])?,
    ];
    let e = e_ways[0];
    let entropy: f64 = (0..2)
        .map(|i| {
            let r = params.r(i);
            mesh.integrate_slice(&rho[i].as_slice().iter().map(|&x| pos_pow(x, r)).collect::<Vec<_>>()) / r
        })
        .sum();
    let lambda = state.lambda;
    let (a1, a2) = (state.alpha[0], state.alpha[1]);
    let (mu1_h, mu2_h) = if a1 > 0.0 && a2 > 0.0 {
        (lambda * a1.powf(params.p1) / a2, lambda * a2.powf(params.p2) / a1)
    } else {
        (f64::NAN, f64::NAN)
    };
    let min_v = [state.min_v(0), state.min_v(1)];
    Ok(BranchRecord {
        lambda,
        alpha1: a1,
        alpha2: a2,
        e,
        f: entropy - lambda * e,
        gamma: gamma(params, state.alpha),
        e_self: 0.5 * mesh.inner(rho[1].as_slice(), g[1].as_slice())
            + 0.5 * mesh.inner(rho[0].as_slice(), g[0].as_slice()),
        sigma1,
        mu1_h,
        mu2_h,
        min_v1: min_v[0],
        min_v2: min_v[1],
        fb_flag: min_v[0] < 0.0 || min_v[1] < 0.0,
        e_ways,
    })
}

/// [`record`] with `σ₁` taken from a computed spectrum.
pub fn record_with_spectrum(
    mesh: &DomainMesh,
    params: &ProblemParams,
    state: &SolutionState,
    spectral: &SpectralSet,
) -> Result<BranchRecord> {
    record(mesh, params, state, spectral.sigmas.first().copied().unwrap_or(f64::NAN))
}

/// Writes records in the branch CSV schema.
pub fn write_branch_csv(records: &[BranchRecord], path: &Path) -> Result<()> {
    std::fs::write(path, branch_csv_string(records))?;
    Ok(())
}

pub fn branch_csv_string(records: &[BranchRecord]) -> String {
    let mut out = BRANCH_CSV_HEADER.join(",");
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Thresholds of [`monotonicity_audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Required strict decrease of `F`, `γ` and allowed decrease of `E`
    /// between consecutive records.
    pub margin: f64,
    /// Relative tolerance of `dF/dλ = −E`.
    pub derivative_rtol: f64,
    /// Slack of the three-point concavity test.
    pub concavity_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { margin: 1e-9, derivative_rtol: 1e-3, concavity_tol: 1e-10 }
    }
}

/// A failed inequality with its signed margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub lambda: f64,
    pub margin: f64,
}

/// Finite-difference `dF/dλ` against `−E` at an interior record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub lambda: f64,
    pub df_dlambda: f64,
    pub minus_e: f64,
    pub rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotonicityReport {
    pub violations: Vec<Violation>,
    pub derivatives: Vec<DerivativeCheck>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.derivatives.iter().all(|d| d.pass)
    }
}

/// Second-order derivative weights on a nonuniform three-point stencil.
pub(crate) fn three_point_weights(l0: f64, l1: f64, l2: f64) -> [f64; 3] {
    let (h1, h2) = (l1 - l0, l2 - l1);
    [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))]
}

/// Monotonicity of `F`, `γ`, `E`, the envelope identity `F′ = −E`, and
/// three-point concavity of `F` across consecutive records.
pub fn monotonicity_audit(records: &[BranchRecord], opts: &AuditOptions) -> MonotonicityReport {
    let mut rep = MonotonicityReport::default();
    if records.len() < 3 {
        return rep;
    }
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let checks = [("F_decreasing", a.f - b.f), ("gamma_decreasing", a.gamma - b.gamma)];
        for (name, drop) in checks {
            if !(drop > opts.margin) {
                rep.violations.push(Violation { check: name, lambda: b.lambda, margin: drop });
            }
        }
        let rise = b.e - a.e;
        if !(rise >= -opts.margin) {
            rep.violations.push(Violation { check: "E_nondecreasing", lambda: b.lambda, margin: rise });
        }
    }
    for w in records.windows(3) {
        let c = three_point_weights(w[0].lambda, w[1].lambda, w[2].lambda);
        let df = c[0] * w[0].f + c[1] * w[1].f + c[2] * w[2].f;
        let rel = (df + w[1].e).abs() / w[1].e.abs();
        rep.derivatives.push(DerivativeCheck {
            lambda: w[1].lambda,
            df_dlambda: df,
            minus_e: -w[1].e,
            rel_err: rel,
            pass: rel <= opts.derivative_rtol,
        });
        let (h1, h2) = (w[1].lambda - w[0].lambda, w[2].lambda - w[1].lambda);
        let chord = (h2 * w[0].f + h1 * w[2].f) / (h1 + h2);
        let gap = w[1].f - chord;
        if gap < -opts.concavity_tol {
            rep.violations.push(Violation { check: "F_concave", lambda: w[1].lambda, margin: gap });
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainShape};

    #[test]
    fn zero_state_record_on_disk() {
        let mesh = build_mesh(DomainShape::Disk, 48).unwrap();
        let params = ProblemParams::new(1.0, 2.0).unwrap();
        let s = SolutionState::at_zero(&mesh).unwrap();
        let r = record(&mesh, &params, &s, f64::NAN).unwrap();
        let e0 = 1.0 / (8.0 * std::f64::consts::PI);
        assert!((r.e - e0).abs() / e0 < 5e-3);
        assert!((r.gamma - (0.5 + 2.0 / 3.0)).abs() < 1e-15);
        assert!(r.e_spread() < 1e-12);
        assert!(r.f_identity_defect(&params).abs() < 1e-12);
        assert!(!r.fb_flag);
    }

    #[test]
    fn audit_needs_three_records() {
        assert!(monotonicity_audit(&[], &AuditOptions::default()).is_clean());
    }

    #[test]
    fn three_point_weights_are_exact_for_quadratics() {
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let (a, b, c) = (0.3, 0.5, 1.1);
        let w = three_point_weights(a, b, c);
        let d = w[0] * f(a) + w[1] * f(b) + w[2] * f(c);
        assert!((d - (6.0 * b - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn csv_has_schema_columns() {
        let mesh = build_mesh(DomainShape::unit_square(), 8).unwrap();
        let params = ProblemParams::new(1.0, 1.0).unwrap();
        let s = SolutionState::at_zero(&mesh).unwrap();
        let r = record(&mesh, &params, &s, 1.0).unwrap();
        let csv = branch_csv_string(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), BRANCH_CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap().split(',').count(), 13);
    }
}
