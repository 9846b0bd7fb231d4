//! Weighted spectral structure of the linearized problem.
//!
//! With `W_i = (α_i + λψ_i)₊^{p_i−1}`, `⟨a, b⟩_i = ∫W_i a b`, mean-free
//! projections `[η]_i = η − ⟨η⟩_i` and `⟨φ, η⟩_λ = p₁⟨φ₁, η₁⟩₁ + p₂⟨φ₂, η₂⟩₂`,
//! the operator `C(φ) = ([G[p₂W₂φ₂]]₁, [G[p₁W₁φ₁]]₂)` is self-adjoint on
//! mean-free pairs. An eigenvalue `ν > 0` of `C` gives `σ = 1/ν − λ` and
//! `μ = λν`.

mod dense;
mod eigen;
mod sobolev;

pub use dense::{dense_sigmas, smallest_singular_value};
pub use eigen::{eigen_solve, first_sigma, SpectralSet};
pub use sobolev::{check_spectral_bound, sobolev_constant, sobolev_profile, SpectralBoundEntry, SpectralBoundReport};

use crate::error::{Error, Result};
use crate::mesh::{DomainMesh, GridField};
use crate::solver::{ProblemParams, SolutionState};

/// Weights of the linearization at a solution state.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    pub lambda: f64,
    pub p: [f64; 2],
    /// `W_i` at the interior nodes.
    pub weights: [GridField; 2],
    /// `m_i = ∫W_i`.
    pub masses: [f64; 2],
    /// `t_i = λ p_i`.
    pub t: [f64; 2],
    quad: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState) -> Result<Self> {
        for i in 0..2 {
            if params.p(i) < 1.0 && state.min_v(i) <= 0.0 {
                return Err(Error::DegenerateWeight { component: i + 1, mass: f64::INFINITY });
            }
        }
        let weights = [0, 1].map(|i| GridField::from_vec_unchecked(state.weight(params, i)));
        Self::from_weights(mesh, state.lambda, [params.p1, params.p2], weights)
    }

    /// Space with prescribed nonnegative weights.
    pub fn from_weights(mesh: &DomainMesh, lambda: f64, p: [f64; 2], weights: [GridField; 2]) -> Result<Self> {
        let mut masses = [0.0; 2];
        for i in 0..2 {
            mesh.check(&weights[i])?;
            if weights[i].min() < 0.0 {
                return Err(Error::DegenerateWeight { component: i + 1, mass: weights[i].min() });
            }
            masses[i] = mesh.integrate_slice(weights[i].as_slice());
            if !(masses[i] > 0.0) {
                return Err(Error::DegenerateWeight { component: i + 1, mass: masses[i] });
            }
        }
        Ok(WeightedSpace {
            lambda,
            p,
            weights,
            masses,
            t: [lambda * p[0], lambda * p[1]],
            quad: mesh.quad_weights().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    /// `⟨a, b⟩_i = Σ w W_i a b`.
    pub fn inner(&self, i: usize, a: &[f64], b: &[f64]) -> f64 {
        let wi = self.weights[i].as_slice();
        (0..a.len()).map(|k| self.quad[k] * wi[k] * a[k] * b[k]).sum()
    }

    pub fn norm(&self, i: usize, a: &[f64]) -> f64 {
        self.inner(i, a, a).sqrt()
    }

    /// `⟨φ, η⟩_λ`.
    pub fn inner_pair(&self, a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]) -> f64 {
        self.p[0] * self.inner(0, &a[0], &b[0]) + self.p[1] * self.inner(1, &a[1], &b[1])
    }

    pub(crate) fn mean_slice(&self, i: usize, eta: &[f64]) -> f64 {
        let wi = self.weights[i].as_slice();
        (0..eta.len()).map(|k| self.quad[k] * wi[k] * eta[k]).sum::<f64>() / self.masses[i]
    }

    pub(crate) fn project_in_place(&self, i: usize, eta: &mut [f64]) {
        let m = self.mean_slice(i, eta);
        eta.iter_mut().for_each(|v| *v -= m);
    }

    /// `⟨η⟩_i = ∫W_i η / m_i`.
    pub fn weighted_mean(&self, i: usize, eta: &GridField) -> Result<f64> {
        if eta.len() != self.len() {
            return Err(Error::SizeMismatch { expected: self.len(), got: eta.len() });
        }
        Ok(self.mean_slice(i, eta.as_slice()))
    }

    /// `[η]_i = η − ⟨η⟩_i`.
    pub fn project(&self, i: usize, eta: &GridField) -> Result<GridField> {
        let m = self.weighted_mean(i, eta)?;
        Ok(eta.map(|v| v - m))
    }

    /// `[G[p_j W_j φ]]_i` with `j = 1 − i`: the block of `C` mapping
    /// component `j` into component `i`.
    pub(crate) fn apply_block(&self, mesh: &DomainMesh, i: usize, phi: &[f64]) -> Result<Vec<f64>> {
        let j = 1 - i;
        let wj = self.weights[j].as_slice();
        let rho: Vec<f64> = phi.iter().zip(wj).map(|(f, w)| self.p[j] * w * f).collect();
        let mut g = mesh.green_slice(&rho)?;
        self.project_in_place(i, &mut g);
        Ok(g)
    }

    pub(crate) fn apply_c_slices(&self, mesh: &DomainMesh, phi: &[Vec<f64>; 2]) -> Result<[Vec<f64>; 2]> {
        Ok([self.apply_block(mesh, 0, &phi[1])?, self.apply_block(mesh, 1, &phi[0])?])
    }
}

/// `C(φ₁, φ₂) = ([G[p₂W₂φ₂]]₁, [G[p₁W₁φ₁]]₂)` on a mean-free pair.
pub fn apply_c(space: &WeightedSpace, mesh: &DomainMesh, phi: &(GridField, GridField)) -> Result<(GridField, GridField)> {
    let parts = [phi.0.as_slice(), phi.1.as_slice()];
    for (i, f) in parts.iter().enumerate() {
        if f.len() != space.len() {
            return Err(Error::SizeMismatch { expected: space.len(), got: f.len() });
        }
        let scale = crate::linalg::inf_norm(f).max(f64::MIN_POSITIVE);
        let mean = space.mean_slice(i, f);
        if mean.abs() > 1e-8 * scale {
            return Err(Error::Undefined(format!(
                "component {} has weighted mean {mean:e}; C acts on mean-free pairs",
                i + 1
            )));
        }
    }
    let out = space.apply_c_slices(mesh, &[parts[0].to_vec(), parts[1].to_vec()])?;
    let [a, b] = out;
    Ok((GridField::from_vec_unchecked(a), GridField::from_vec_unchecked(b)))
}

/// Weighted mean of component `i ∈ {1, 2}`.
pub fn weighted_mean(space: &WeightedSpace, i: usize, eta: &GridField) -> Result<f64> {
    if !(1..=2).contains(&i) {
        return Err(Error::Undefined(format!("component index must be 1 or 2, got {i}")));
    }
    space.weighted_mean(i - 1, eta)
}
