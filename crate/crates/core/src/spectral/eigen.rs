//! Leading eigenpairs of `C` by block subspace iteration.
//!
//! `C` has the block form `[[0, A], [B, 0]]`, so its spectrum is symmetric
//! about zero and plain power iteration on `C` does not separate `±ν`. The
//! product `AB` is self-adjoint and nonnegative in `⟨·,·⟩₁` with eigenvalues
//! `ν²`; it is iterated on mean-free first components and the second
//! component is recovered as `φ₂ = Bφ₁/ν`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::WeightedSpace;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mesh::{DomainMesh, GridField};
use crate::solver::{ProblemParams, SolutionState};

const RITZ_TOL: f64 = 1e-11;
const MAX_SWEEPS: usize = 5000;
const CLUSTER_RTOL: f64 = 1e-8;
const EXTRA_VECTORS: usize = 4;
const SEED: u64 = 0x5eed_c0de;

/// Leading eigenvalues and eigenfields of the linearization at one state.
#[derive(Debug, Clone)]
pub struct SpectralSet {
    pub lambda: f64,
    /// `σ₁ ≤ σ₂ ≤ …`.
    pub sigmas: Vec<f64>,
    /// Eigenvalues `ν_k = 1/(λ + σ_k)` of `C`.
    pub nus: Vec<f64>,
    /// `μ_k = λν_k`; empty at `λ = 0`.
    pub mus: Vec<f64>,
    /// Mean-free representatives `([φ₁ₖ]₁, [φ₂ₖ]₂)` with `‖·‖_λ = 1`.
    pub pairs: Vec<(GridField, GridField)>,
    /// Dirichlet eigenfields `(φ₁ₖ, φ₂ₖ)` whose projections are `pairs`.
    pub fields: Vec<(GridField, GridField)>,
    /// `‖Cφ − νφ‖_λ / ν` per pair.
    pub residuals: Vec<f64>,
    /// Index groups of eigenvalues equal to relative `1e-8`.
    pub clusters: Vec<Vec<usize>>,
}

impl SpectralSet {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// Writes `k, sigma, mu, residual` (k from 1).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("k,sigma,mu,residual\n");
        for k in 0..self.len() {
            let mu = self.mus.get(k).copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                k + 1,
                fmt_f64(self.sigmas[k]),
                fmt_f64(mu),
                fmt_f64(self.residuals[k])
            );
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn orthonormalize(space: &WeightedSpace, vs: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for j in 0..vs.len() {
        for _attempt in 0..3 {
            let before = space.norm(0, &vs[j]);
            for _pass in 0..2 {
                for i in 0..j {
                    let c = space.inner(0, &vs[i], &vs[j]);
                    let (head, tail) = vs.split_at_mut(j);
                    tail[0].iter_mut().zip(&head[i]).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nrm = space.norm(0, &vs[j]);
            if nrm > 1e-10 * before && nrm > 0.0 {
                vs[j].iter_mut().for_each(|v| *v /= nrm);
                break;
            }
            // lost direction: restart it from noise
            vs[j] = (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            space.project_in_place(0, &mut vs[j]);
        }
    }
}

fn combine(vs: &[Vec<f64>], coef: &DMatrix<f64>, col: usize) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for (i, v) in vs.iter().enumerate() {
        let c = coef[(i, col)];
        out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
    }
    out
}

/// Top-`k` eigenpairs of `C`, returned as `σ_j = 1/ν_j − λ` ascending.
pub fn eigen_solve(space: &WeightedSpace, mesh: &DomainMesh, k: usize) -> Result<SpectralSet> {
    let n = space.len();
    if n != mesh.len() {
        return Err(Error::SizeMismatch { expected: mesh.len(), got: n });
    }
    let dim = n.saturating_sub(1);
    if k == 0 || k > dim {
        return Err(Error::Eigen(format!("requested {k} eigenpairs from a space of dimension {dim}")));
    }
    let block = (k + EXTRA_VECTORS).min(dim);
    let ratio = space.p[1] / space.p[0];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            space.project_in_place(0, &mut v);
            v
        })
        .collect();
    orthonormalize(space, &mut q, &mut rng);

    for _sweep in 0..MAX_SWEEPS {
        let bq: Vec<Vec<f64>> = q.iter().map(|v| space.apply_block(mesh, 1, v)).collect::<Result<_>>()?;
        let h = DMatrix::from_fn(block, block, |i, j| ratio * space.inner(1, &bq[i], &bq[j]));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        let u: Vec<Vec<f64>> = order.iter().map(|&c| combine(&q, &eig.eigenvectors, c)).collect();
        let bu: Vec<Vec<f64>> = order.iter().map(|&c| combine(&bq, &eig.eigenvectors, c)).collect();
        let abu: Vec<Vec<f64>> = bu.iter().map(|v| space.apply_block(mesh, 0, v)).collect::<Result<_>>()?;

        let mut worst = 0.0f64;
        for j in 0..k {
            if !(theta[j] > 0.0) {
                return Err(Error::Eigen(format!("non-positive eigenvalue {:e} of C^2 at index {j}", theta[j])));
            }
            let r: Vec<f64> = abu[j].iter().zip(&u[j]).map(|(a, b)| a - theta[j] * b).collect();
            worst = worst.max(space.norm(0, &r) / theta[j]);
        }
        if worst <= RITZ_TOL {
            return Ok(assemble(space, mesh, k, &theta, &u, &bu)?);
        }
        q = abu;
        orthonormalize(space, &mut q, &mut rng);
    }
    Err(Error::Eigen(format!("subspace iteration stagnated after {MAX_SWEEPS} sweeps")))
}

fn assemble(
    space: &WeightedSpace,
    mesh: &DomainMesh,
    k: usize,
    theta: &[f64],
    u: &[Vec<f64>],
    bu: &[Vec<f64>],
) -> Result<SpectralSet> {
    let lambda = space.lambda;
    let mut out = SpectralSet {
        lambda,
        sigmas: Vec::with_capacity(k),
        nus: Vec::with_capacity(k),
        mus: Vec::new(),
        pairs: Vec::with_capacity(k),
        fields: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        clusters: Vec::new(),
    };
    for j in 0..k {
        let nu = theta[j].sqrt();
        let mut phi = [u[j].clone(), bu[j].iter().map(|v| v / nu).collect::<Vec<f64>>()];
        let nrm = space.inner_pair(&phi, &phi).sqrt();
        phi.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v /= nrm));

        // Dirichlet fields: φ₁ = (p₂/ν) G[W₂φ̃₂], φ₂ = (p₁/ν) G[W₁φ̃₁]
        let mut dir = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let o = 1 - i;
            let wo = space.weights[o].as_slice();
            let rho: Vec<f64> = phi[o].iter().zip(wo).map(|(f, w)| space.p[o] / nu * w * f).collect();
            dir[i] = mesh.green_slice(&rho)?;
        }
        // sign: ⟨φ₁⟩₁ ≥ 0, falling back to ⟨φ₂⟩₂ when the first mean vanishes
        let m1 = space.mean_slice(0, &dir[0]);
        let m2 = space.mean_slice(1, &dir[1]);
        let scale = crate::linalg::inf_norm(&dir[0]).max(crate::linalg::inf_norm(&dir[1]));
        let flip = if m1.abs() > 1e-10 * scale { m1 < 0.0 } else { m2 < 0.0 };
        if flip {
            for c in phi.iter_mut().chain(dir.iter_mut()) {
                c.iter_mut().for_each(|v| *v = -*v);
            }
        }

        let c_phi = space.apply_c_slices(mesh, &phi)?;
        let r = [0, 1].map(|i| c_phi[i].iter().zip(&phi[i]).map(|(a, b)| a - nu * b).collect::<Vec<f64>>());
        out.residuals.push(space.inner_pair(&r, &r).sqrt() / nu);
        out.nus.push(nu);
        out.sigmas.push(1.0 / nu - lambda);
        if lambda > 0.0 {
            out.mus.push(lambda * nu);
        }
        let [a, b] = phi;
        out.pairs.push((GridField::from_vec_unchecked(a), GridField::from_vec_unchecked(b)));
        let [a, b] = dir;
        out.fields.push((GridField::from_vec_unchecked(a), GridField::from_vec_unchecked(b)));
    }
    let mut start = 0;
    for j in 1..=k {
        if j == k || (out.nus[j - 1] - out.nus[j]).abs() > CLUSTER_RTOL * out.nus[j - 1] {
            out.clusters.push((start..j).collect());
            start = j;
        }
    }
    Ok(out)
}

/// `σ₁` at a positive state.
pub fn first_sigma(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState) -> Result<f64> {
    let space = WeightedSpace::new(mesh, params, state)?;
    Ok(eigen_solve(&space, mesh, 1)?.sigmas[0])
}
