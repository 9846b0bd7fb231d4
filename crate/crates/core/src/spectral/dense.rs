//! Dense reference computations for small meshes.

use nalgebra::{DMatrix, SymmetricEigen};

use super::WeightedSpace;
use crate::error::{Error, Result};
use crate::mesh::DomainMesh;
use crate::solver::{bordered_jacobian_dense, ProblemParams, SolutionState};

/// All `σ = 1/ν − λ` for the positive eigenvalues `ν` of `C`, ascending,
/// from a dense symmetric eigensolve of `D^{1/2} P C P D^{−1/2}` where `P`
/// projects onto mean-free pairs and `D = diag(p₁wW₁, p₂wW₂)`.
pub fn dense_sigmas(space: &WeightedSpace, mesh: &DomainMesh) -> Result<Vec<f64>> {
    let n = space.len();
    let w = mesh.quad_weights();
    let d: Vec<f64> = (0..2)
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .map(|(i, k)| space.p[i] * w[k] * space.weights[i].as_slice()[k])
        .collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Eigen("dense oracle needs strictly positive weights".into()));
    }

    // Green matrix: column k is G[e_k]
    let mut g = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = mesh.green_slice(&e)?;
        g.set_column(k, &nalgebra::DVector::from_vec(col));
    }
    let proj = |i: usize| {
        let wi = space.weights[i].as_slice();
        DMatrix::from_fn(n, n, |r, c| (if r == c { 1.0 } else { 0.0 }) - w[c] * wi[c] / space.masses[i])
    };
    let (p1, p2) = (proj(0), proj(1));
    let scale_cols = |m: &DMatrix<f64>, i: usize| {
        let wi = space.weights[i].as_slice();
        DMatrix::from_fn(n, n, |r, c| m[(r, c)] * space.p[i] * wi[c])
    };
    let top = &p1 * scale_cols(&g, 1) * &p2;
    let bottom = &p2 * scale_cols(&g, 0) * &p1;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(&top);
    m.view_mut((n, 0), (n, n)).copy_from(&bottom);
    let sq: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let s = DMatrix::from_fn(2 * n, 2 * n, |r, c| sq[r] * m[(r, c)] / sq[c]);
    let sym = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top_nu = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut sigmas: Vec<f64> = eig
        .eigenvalues
        .iter()
        .filter(|&&nu| nu > 1e-10 * top_nu)
        .map(|&nu| 1.0 / nu - space.lambda)
        .collect();
    sigmas.sort_by(f64::total_cmp);
    Ok(sigmas)
}

/// Smallest singular value of the dense bordered Newton Jacobian.
pub fn smallest_singular_value(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState) -> f64 {
    let j = bordered_jacobian_dense(mesh, params, state);
    let sv = j.singular_values();
    sv.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainShape};

    #[test]
    fn dense_spectrum_is_shifted_by_lambda() {
        // for p = (1, 1) in the positivity region the weights are identically
        // one, so σ + λ does not depend on λ
        let mesh = build_mesh(DomainShape::unit_square(), 8).unwrap();
        let params = ProblemParams::new(1.0, 1.0).unwrap();
        let s0 = SolutionState::at_zero(&mesh).unwrap();
        let a = dense_sigmas(&WeightedSpace::new(&mesh, &params, &s0).unwrap(), &mesh).unwrap();
        let s = SolutionState { lambda: 2.0, ..s0 };
        let b = dense_sigmas(&WeightedSpace::new(&mesh, &params, &s).unwrap(), &mesh).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - (y + 2.0)).abs() < 1e-9 * x.abs());
        }
        assert!(a[0] > 2.0 * std::f64::consts::PI.powi(2) * 0.9);
    }
}
