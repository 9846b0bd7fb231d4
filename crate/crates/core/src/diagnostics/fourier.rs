//! Modal expansion of `[ψ_i]` and `[dψ_i/dλ]` in the eigenbasis of the
//! linearization, and the resulting expression for `dE/dλ`.
//!
//! The eigen-pairs of [`SpectralSet`] are normalized as pairs
//! (`p₁‖φ₁‖² + p₂‖φ₂‖² = 1`, and each half carries `½`). The modal relation
//! `(t₁+p₁σ)β₁ = t₂β₂ + p₂ξ₂` holds for coefficients against these pair
//! modes, while `dE/dλ = Σ_i t_i⟨[ψ_i′],[ψ_i]⟩_i + p_i‖[ψ_i]‖²_i` expands
//! in componentwise-normalized modes. Both coefficient sets are kept.

use super::three_point_weights;
use crate::error::{Error, Result};
use crate::mesh::DomainMesh;
use crate::solver::{ProblemParams, SolutionState};
use crate::spectral::{SpectralSet, WeightedSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct FourierDiagnostics {
    pub lambda: f64,
    /// `ξ_{i,k} = ⟨φ_{i,k}, [ψ_i]⟩_i` against the pair modes.
    pub xi: Vec<[f64; 2]>,
    /// `β` solving the 2×2 modal relation.
    pub beta_closed: Vec<[f64; 2]>,
    /// `β_{i,k} = ⟨φ_{i,k}, [dψ_i/dλ]⟩_i` with `dψ/dλ` from neighbors.
    pub beta_fd: Vec<[f64; 2]>,
    /// Per mode `max_i |β_closed − β_fd| / max(max_i |β_fd|, 1e−6·B)` with
    /// `B` the largest `|β_fd|` over all modes; modes that vanish by symmetry
    /// are compared at that floor.
    pub beta_rel_err: Vec<f64>,
    /// Truncated expansion in componentwise-normalized modes.
    pub de_dlambda_spectral: f64,
    /// The closed-form series evaluated with componentwise-normalized `ξ`.
    pub de_dlambda_literal: f64,
    /// Three-point derivative of `E` across the neighbors.
    pub de_dlambda_fd: f64,
    /// `p₁‖[ψ₁]‖²₁ + p₂‖[ψ₂]‖²₂`.
    pub lower_bound: f64,
    /// `de_dlambda_fd − de_dlambda_spectral`.
    pub tail_gap: f64,
    pub min_xi: f64,
}

fn energy(mesh: &DomainMesh, params: &ProblemParams, s: &SolutionState) -> f64 {
    mesh.inner(s.density(params, 0).as_slice(), s.psi[0].as_slice())
}

/// Expands `[ψ_i]` and `[dψ_i/dλ]` at `state`; `neighbors` are solved states
/// at `λ₋ < λ < λ₊` on the same branch.
pub fn fourier_audit(
    mesh: &DomainMesh,
    params: &ProblemParams,
    state: &SolutionState,
    spectral: &SpectralSet,
    neighbors: (&SolutionState, &SolutionState),
) -> Result<FourierDiagnostics> {
    let lambda = state.lambda;
    let (lo, hi) = neighbors;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams { constraint: "positive_lambda", detail: format!("λ = {lambda}") });
    }
    if !(lo.lambda < lambda && lambda < hi.lambda) {
        return Err(Error::InvalidParams {
            constraint: "neighbor_states",
            detail: format!("need λ₋ < {lambda} < λ₊, got {} and {}", lo.lambda, hi.lambda),
        });
    }
    if spectral.is_empty() || (spectral.lambda - lambda).abs() > 1e-14 * lambda.max(1.0) {
        return Err(Error::InvalidParams {
            constraint: "spectral_set",
            detail: format!("spectrum at λ = {} for state at λ = {lambda}", spectral.lambda),
        });
    }
    let space = WeightedSpace::new(mesh, params, state)?;
    let c = three_point_weights(lo.lambda, lambda, hi.lambda);
    let mut psi = [Vec::new(), Vec::new()];
    let mut dpsi = [Vec::new(), Vec::new()];
    for i in 0..2 {
        psi[i] = state.psi[i].as_slice().to_vec();
        space.project_in_place(i, &mut psi[i]);
        let (a, b, m) = (lo.psi[i].as_slice(), hi.psi[i].as_slice(), state.psi[i].as_slice());
        dpsi[i] = (0..a.len()).map(|k| c[0] * a[k] + c[1] * m[k] + c[2] * b[k]).collect();
        space.project_in_place(i, &mut dpsi[i]);
    }

    let p = space.p;
    let t = space.t;
    let mut out = FourierDiagnostics {
        lambda,
        xi: Vec::new(),
        beta_closed: Vec::new(),
        beta_fd: Vec::new(),
        beta_rel_err: Vec::new(),
        de_dlambda_spectral: 0.0,
        de_dlambda_literal: 0.0,
        de_dlambda_fd: c[0] * energy(mesh, params, lo)
            + c[1] * energy(mesh, params, state)
            + c[2] * energy(mesh, params, hi),
        lower_bound: (0..2).map(|i| p[i] * space.inner(i, &psi[i], &psi[i])).sum(),
        tail_gap: 0.0,
        min_xi: f64::INFINITY,
    };
    for (k, (a, b)) in spectral.pairs.iter().enumerate() {
        let sigma = spectral.sigmas[k];
        let phi = [a.as_slice(), b.as_slice()];
        let xi = [0, 1].map(|i| space.inner(i, phi[i], &psi[i]));
        let beta_fd = [0, 1].map(|i| space.inner(i, phi[i], &dpsi[i]));
        let den = sigma * (2.0 * lambda + sigma);
        let s = p[0] * xi[0] + p[1] * xi[1];
        let beta = [
            (lambda * s + sigma * p[1] * xi[1]) / (p[0] * den),
            (lambda * s + sigma * p[0] * xi[0]) / (p[1] * den),
        ];
        let err = (beta[0] - beta_fd[0]).abs().max((beta[1] - beta_fd[1]).abs());
        out.beta_rel_err.push(err);

        let nrm = [0, 1].map(|i| space.norm(i, phi[i]));
        let xh = [0, 1].map(|i| xi[i] / nrm[i]);
        let bh = [0, 1].map(|i| beta[i] / nrm[i]);
        out.de_dlambda_spectral += (0..2).map(|i| t[i] * bh[i] * xh[i] + p[i] * xh[i] * xh[i]).sum::<f64>();
        let sh = p[0] * xh[0] + p[1] * xh[1];
        out.de_dlambda_literal += lambda * (lambda * sh * (xh[0] + xh[1]) + 2.0 * sigma * xh[0] * xh[1]) / den
            + p[0] * xh[0] * xh[0]
            + p[1] * xh[1] * xh[1];

        out.min_xi = out.min_xi.min(xi[0]).min(xi[1]);
        out.xi.push(xi);
        out.beta_closed.push(beta);
        out.beta_fd.push(beta_fd);
    }
    let top = out.beta_fd.iter().flatten().fold(0.0f64, |m, b| m.max(b.abs()));
    for (err, b) in out.beta_rel_err.iter_mut().zip(&out.beta_fd) {
        let scale = b[0].abs().max(b[1].abs()).max(1e-6 * top);
        if scale > 0.0 {
            *err /= scale;
        }
    }
    out.tail_gap = out.de_dlambda_fd - out.de_dlambda_spectral;
    Ok(out)
}
