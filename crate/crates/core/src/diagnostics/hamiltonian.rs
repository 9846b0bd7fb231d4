//! Image of a positive state in the system
//! `−Δu₁ = μ₂(1+u₂)^{p₂}`, `−Δu₂ = μ₁(1+u₁)^{p₁}`, `u_i = 0` on the boundary.

use super::energy_coefficient;
use crate::error::{Error, Result};
use crate::mesh::{DomainMesh, GridField};
use crate::solver::{pos_pow, ProblemParams, SolutionState};

#[derive(Debug, Clone, PartialEq)]
pub struct HImage {
    /// `μ₁ = λα₁^{p₁}/α₂`, `μ₂ = λα₂^{p₂}/α₁`.
    pub mu: [f64; 2],
    /// `u_i = λψ_i/α_i`.
    pub u: [GridField; 2],
    /// `Σ p_i/(p_i+1) · 1/‖1+u_i‖_{p_i}`.
    pub gamma_h: f64,
    pub e_h: f64,
    /// `γ_H + λ_H c E_H` with `λ_H = μ₁α₂/α₁^{p₁}` recovered from `(μ, u)`
    /// through `α_i = 1/‖1+u_i‖_{p_i}`, and `c = (p₁p₂−1)/((p₁+1)(p₂+1))`.
    pub f_h: f64,
    /// `γ_H + c E_H`, which omits the factor `λ_H`.
    pub f_h_unscaled: f64,
    /// `‖−Δu₁ − μ₂(1+u₂)^{p₂}‖∞`, `‖−Δu₂ − μ₁(1+u₁)^{p₁}‖∞`.
    pub residuals: [f64; 2],
    /// `α_i‖1+u_i‖_{p_i} − 1`.
    pub norm_identity: [f64; 2],
}

/// Maps a positive state to `(μ, u)` and evaluates the energies there.
pub fn map_to_h(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState) -> Result<HImage> {
    let alpha = state.alpha;
    if !(alpha[0] > 0.0 && alpha[1] > 0.0) {
        return Err(Error::Undefined(format!("map needs α_i > 0, got ({}, {})", alpha[0], alpha[1])));
    }
    mesh.check(&state.psi[0])?;
    mesh.check(&state.psi[1])?;
    let lambda = state.lambda;
    let p = [params.p1, params.p2];
    let mu = [lambda * alpha[0].powf(p[0]) / alpha[1], lambda * alpha[1].powf(p[1]) / alpha[0]];
    let u = [0, 1].map(|i| state.psi[i].map(|x| lambda * x / alpha[i]));

    // (1+u_i)^{p_i} and ∫(1+u_i)^{p_i} = ‖1+u_i‖^{p_i}
    let src = [0, 1].map(|i| u[i].as_slice().iter().map(|&x| pos_pow(1.0 + x, p[i])).collect::<Vec<f64>>());
    let pow_norm = [0, 1].map(|i| mesh.integrate_slice(&src[i]));
    let norm = [0, 1].map(|i| pow_norm[i].powf(1.0 / p[i]));

    let mut residuals = [0.0; 2];
    for i in 0..2 {
        let o = 1 - i;
        let lap = mesh.neg_laplacian_slice(u[i].as_slice());
        residuals[i] = lap.iter().zip(&src[o]).fold(0.0f64, |m, (a, b)| m.max((a - mu[o] * b).abs()));
    }

    let gamma_h: f64 = (0..2).map(|i| p[i] / (p[i] + 1.0) / norm[i]).sum();
    let e_h = if lambda == 0.0 {
        // μ → 0 limit: ½Σ∫ρ_iψ_i
        (0..2)
            .map(|i| 0.5 * mesh.inner(state.density(params, i).as_slice(), state.psi[i].as_slice()))
            .sum()
    } else {
        let num: f64 = (0..2).map(|i| mu[i] * mesh.inner(&src[i], u[i].as_slice())).sum();
        num / (2.0 * mu[0] * mu[1] * pow_norm[0] * pow_norm[1])
    };
    let c = energy_coefficient(params);
    let lambda_h = mu[0] / (norm[1] * norm[0].powf(-p[0]));
    Ok(HImage {
        mu,
        u,
        gamma_h,
        e_h,
        f_h: gamma_h + lambda_h * c * e_h,
        f_h_unscaled: gamma_h + c * e_h,
        residuals,
        norm_identity: [0, 1].map(|i| alpha[i] * norm[i] - 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::record;
    use crate::mesh::{build_mesh, DomainShape};

    #[test]
    fn zero_lambda_limit() {
        let mesh = build_mesh(DomainShape::unit_square(), 16).unwrap();
        let params = ProblemParams::new(1.5, 2.0).unwrap();
        let s = SolutionState::at_zero(&mesh).unwrap();
        let h = map_to_h(&mesh, &params, &s).unwrap();
        assert_eq!(h.mu, [0.0, 0.0]);
        assert_eq!(h.u[0].inf_norm(), 0.0);
        assert_eq!(h.residuals, [0.0, 0.0]);
        let r = record(&mesh, &params, &s, f64::NAN).unwrap();
        assert!((h.e_h - r.e).abs() < 1e-14);
        assert!((h.f_h - r.f).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let mesh = build_mesh(DomainShape::unit_square(), 8).unwrap();
        let params = ProblemParams::new(1.0, 1.0).unwrap();
        let s = SolutionState { alpha: [-0.1, 1.0], ..SolutionState::at_zero(&mesh).unwrap() };
        assert!(matches!(map_to_h(&mesh, &params, &s), Err(Error::Undefined(_))));
    }
}
