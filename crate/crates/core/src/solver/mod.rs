//! Solution states of the constrained system and the three ways of computing
//! them along a branch: the small-λ contraction scheme, bordered Newton
//! iteration, and natural-parameter continuation.

mod branch;
mod contraction;
mod newton;

pub use branch::{continue_branch, Branch, Bracket, StepControl, StopReason};
pub use contraction::{
    alpha_root_find, contraction_inner_solve, contraction_threshold, ContractionConstants,
};
pub use newton::{
    bordered_jacobian, bordered_jacobian_dense, newton_solve, newton_solve_with_report,
    BorderedJacobian, NewtonReport,
};

use crate::error::{Error, Result};
use crate::mesh::{DomainMesh, GridField};

/// Exponents `(p₁, p₂)` and the space dimension used by the subcriticality
/// check. Meshes are always planar; `dim` only enters arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub p1: f64,
    pub p2: f64,
    pub dim: usize,
}

/// Strict subcriticality `1/(p₁+1) + 1/(p₂+1) > (N−2)/(N−1)`.
pub fn souto_condition(p1: f64, p2: f64, dim: usize) -> bool {
    let n = dim as f64;
    1.0 / (p1 + 1.0) + 1.0 / (p2 + 1.0) > (n - 2.0) / (n - 1.0)
}

impl ProblemParams {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        Self::with_dim(p1, p2, 2)
    }

    pub fn with_dim(p1: f64, p2: f64, dim: usize) -> Result<Self> {
        for p in [p1, p2] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParams {
                    constraint: "positive_exponent",
                    detail: format!("exponents must be positive and finite, got ({p1}, {p2})"),
                });
            }
        }
        if dim < 2 {
            return Err(Error::InvalidParams {
                constraint: "dimension",
                detail: format!("dimension must be at least 2, got {dim}"),
            });
        }
        if !souto_condition(p1, p2, dim) {
            return Err(Error::InvalidParams {
                constraint: "souto_condition",
                detail: format!(
                    "1/(p1+1) + 1/(p2+1) = {} is not above (N-2)/(N-1) = {}",
                    1.0 / (p1 + 1.0) + 1.0 / (p2 + 1.0),
                    (dim as f64 - 2.0) / (dim as f64 - 1.0)
                ),
            });
        }
        Ok(ProblemParams { p1, p2, dim })
    }

    /// Exponent of component `i ∈ {0, 1}`.
    pub fn p(&self, i: usize) -> f64 {
        if i == 0 {
            self.p1
        } else {
            self.p2
        }
    }

    /// `r_i = 1 + 1/p_i`.
    pub fn r(&self, i: usize) -> f64 {
        1.0 + 1.0 / self.p(i)
    }

    /// Conjugate exponent `q_i`, defined only for `p_i > 1`.
    pub fn q(&self, i: usize) -> Option<f64> {
        let p = self.p(i);
        (p > 1.0).then(|| p / (p - 1.0))
    }

    pub fn min_p(&self) -> f64 {
        self.p1.min(self.p2)
    }

    pub fn swapped(&self) -> Self {
        ProblemParams { p1: self.p2, p2: self.p1, dim: self.dim }
    }
}

/// Solver tolerances and iteration budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub sigma_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            fp_tol: 1e-12,
            fp_max_iter: 2000,
            sigma_floor: 1e-6,
        }
    }
}

/// `(x)₊^p`.
#[inline]
pub(crate) fn pos_pow(x: f64, p: f64) -> f64 {
    if x > 0.0 {
        if p == 1.0 {
            x
        } else {
            x.powf(p)
        }
    } else {
        0.0
    }
}

/// `(x)₊^{p−1}`, set to zero where `x ≤ 0`.
#[inline]
pub(crate) fn pos_weight(x: f64, p: f64) -> f64 {
    if x > 0.0 {
        if p == 1.0 {
            1.0
        } else {
            x.powf(p - 1.0)
        }
    } else {
        0.0
    }
}

/// `(λ, α₁, α₂, ψ₁, ψ₂)`. Index 0 holds component 1.
///
/// Component equations: `-Δψ₁ = ρ₂`, `-Δψ₂ = ρ₁` with densities
/// `ρ_i = (α_i + λψ_i)₊^{p_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub lambda: f64,
    pub alpha: [f64; 2],
    pub psi: [GridField; 2],
}

impl SolutionState {
    /// The λ = 0 solution: `α = (1, 1)`, `ψ_i = G[1]`.
    pub fn at_zero(mesh: &DomainMesh) -> Result<Self> {
        let g1 = mesh.torsion()?;
        Ok(SolutionState { lambda: 0.0, alpha: [1.0, 1.0], psi: [g1.clone(), g1] })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha[0]
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha[1]
    }

    /// `v_i = α_i + λψ_i` on the interior nodes.
    pub fn v(&self, i: usize) -> Vec<f64> {
        let (a, l) = (self.alpha[i], self.lambda);
        self.psi[i].as_slice().iter().map(|&p| a + l * p).collect()
    }

    /// Minimum of `v_i` over the closed domain (boundary value `α_i`).
    pub fn min_v(&self, i: usize) -> f64 {
        self.v(i).into_iter().fold(self.alpha[i], f64::min)
    }

    /// `ρ_i = (α_i + λψ_i)₊^{p_i}`.
    pub fn density(&self, params: &ProblemParams, i: usize) -> GridField {
        let p = params.p(i);
        GridField::from_vec_unchecked(self.v(i).into_iter().map(|v| pos_pow(v, p)).collect())
    }

    /// `(α_i + λψ_i)₊^{p_i−1}`.
    pub fn weight(&self, params: &ProblemParams, i: usize) -> Vec<f64> {
        let p = params.p(i);
        self.v(i).into_iter().map(|v| pos_weight(v, p)).collect()
    }

    /// Positive solution: `α_i + λψ_i > 0` on the closed domain.
    pub fn is_positive(&self) -> bool {
        self.min_v(0) > 0.0 && self.min_v(1) > 0.0
    }

    /// `‖Δψ₁ + ρ₂‖∞`, `‖Δψ₂ + ρ₁‖∞`.
    pub fn pde_residuals(&self, mesh: &DomainMesh, params: &ProblemParams) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            mesh.check(&self.psi[i])?;
            let lap = mesh.neg_laplacian_slice(self.psi[i].as_slice());
            let rho = self.density(params, 1 - i);
            *o = lap.iter().zip(rho.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        }
        Ok(out)
    }

    /// `∫ρ_i − 1` for both components.
    pub fn mass_defects(&self, mesh: &DomainMesh, params: &ProblemParams) -> [f64; 2] {
        [0, 1].map(|i| mesh.integrate_slice(self.density(params, i).as_slice()) - 1.0)
    }

    /// Largest PDE residual or mass defect.
    pub fn residual(&self, mesh: &DomainMesh, params: &ProblemParams) -> Result<f64> {
        let r = self.pde_residuals(mesh, params)?;
        let m = self.mass_defects(mesh, params);
        Ok(r[0].max(r[1]).max(m[0].abs()).max(m[1].abs()))
    }

    /// Largest difference in `α` and in `ψ` (∞-norm) against another state.
    pub fn distance(&self, other: &SolutionState) -> (f64, f64) {
        let da = (self.alpha[0] - other.alpha[0]).abs().max((self.alpha[1] - other.alpha[1]).abs());
        let dp = self.psi[0].max_abs_diff(&other.psi[0]).max(self.psi[1].max_abs_diff(&other.psi[1]));
        (da, dp)
    }

    /// Linear combination `a·self + b·other` of all state entries.
    pub(crate) fn combine(&self, a: f64, other: &SolutionState, b: f64) -> SolutionState {
        SolutionState {
            lambda: a * self.lambda + b * other.lambda,
            alpha: [0, 1].map(|i| a * self.alpha[i] + b * other.alpha[i]),
            psi: [0, 1].map(|i| self.psi[i].zip_map(&other.psi[i], |x, y| a * x + b * y)),
        }
    }
}
