//! Bordered Newton iteration for `(α₁, α₂, ψ₁, ψ₂)`.
//!
//! Residuals in flux form: `R₁ = Kψ₁ − w ρ₂`, `R₂ = Kψ₂ − w ρ₁`,
//! `c_i = Σ w ρ_i − 1`. The field block is factored once per step and the
//! two bordering columns are eliminated through a 2×2 scalar system.

use nalgebra::DMatrix;

use super::{ProblemParams, SolutionState, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{dot, BandLu, Csr};
use crate::mesh::{DomainMesh, GridField};

/// Newton Jacobian of the constrained system at a state. Field unknowns are
/// interleaved: entry `2k + c` is `ψ_{c+1}` at node `k`.
#[derive(Debug, Clone)]
pub struct BorderedJacobian {
    /// Field block `[[K, −w t₂ V₂], [−w t₁ V₁, K]]`.
    pub fields: Csr,
    /// Column of `∂R/∂α_i` (interleaved).
    pub alpha_cols: [Vec<f64>; 2],
    /// Row of `∂c_i/∂ψ` (interleaved).
    pub constraint_rows: [Vec<f64>; 2],
    /// `∂c_i/∂α_i`.
    pub corner: [f64; 2],
}

pub fn bordered_jacobian(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState) -> BorderedJacobian {
    let n = mesh.len();
    let w = mesh.quad_weights();
    let lambda = state.lambda;
    let vw = [state.weight(params, 0), state.weight(params, 1)];
    let k = mesh.stiffness();
    let mut rows = Vec::with_capacity(2 * n);
    for node in 0..n {
        for c in 0..2 {
            let other = 1 - c;
            let mut row: Vec<(usize, f64)> = k.row(node).map(|(m, v)| (2 * m + c, v)).collect();
            let coupling = -w[node] * lambda * params.p(other) * vw[other][node];
            if coupling != 0.0 {
                row.push((2 * node + other, coupling));
            }
            rows.push(row);
        }
    }
    let mut alpha_cols = [vec![0.0; 2 * n], vec![0.0; 2 * n]];
    let mut constraint_rows = [vec![0.0; 2 * n], vec![0.0; 2 * n]];
    let mut corner = [0.0; 2];
    for i in 0..2 {
        let p = params.p(i);
        for node in 0..n {
            let d = w[node] * p * vw[i][node];
            // α_i enters the equation of the other field
            alpha_cols[i][2 * node + (1 - i)] = -d;
            constraint_rows[i][2 * node + i] = lambda * d;
            corner[i] += d;
        }
    }
    BorderedJacobian { fields: Csr::from_rows(rows), alpha_cols, constraint_rows, corner }
}

/// Dense `(2n+2)²` bordered Jacobian; unknown order `(ψ interleaved, α₁, α₂)`.
pub fn bordered_jacobian_dense(mesh: &DomainMesh, params: &ProblemParams, state: &SolutionState) -> DMatrix<f64> {
    let j = bordered_jacobian(mesh, params, state);
    let m = j.fields.nrows;
    let mut out = DMatrix::zeros(m + 2, m + 2);
    for r in 0..m {
        for (c, v) in j.fields.row(r) {
            out[(r, c)] += v;
        }
    }
    for i in 0..2 {
        for r in 0..m {
            out[(r, m + i)] = j.alpha_cols[i][r];
            out[(m + i, r)] = j.constraint_rows[i][r];
        }
        out[(m + i, m + i)] = j.corner[i];
    }
    out
}

/// Residual vector (interleaved flux form) and constraint defects.
fn residual(mesh: &DomainMesh, params: &ProblemParams, s: &SolutionState) -> (Vec<f64>, [f64; 2], f64) {
    let n = mesh.len();
    let w = mesh.quad_weights();
    let rho = [s.density(params, 0), s.density(params, 1)];
    let mut r = vec![0.0; 2 * n];
    let mut kpsi = vec![0.0; n];
    let mut norm = 0.0f64;
    for c in 0..2 {
        mesh.stiffness().matvec(s.psi[c].as_slice(), &mut kpsi);
        for node in 0..n {
            let v = kpsi[node] - w[node] * rho[1 - c].as_slice()[node];
            r[2 * node + c] = v;
            norm = norm.max((v / w[node]).abs());
        }
    }
    let defects = [0, 1].map(|i| mesh.integrate_slice(rho[i].as_slice()) - 1.0);
    norm = norm.max(defects[0].abs()).max(defects[1].abs());
    (r, defects, norm)
}

/// Convergence summary of a Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// One Newton direction `(δψ interleaved, δα)`.
fn newton_direction(
    mesh: &DomainMesh,
    params: &ProblemParams,
    s: &SolutionState,
    r: &[f64],
    defects: [f64; 2],
) -> Result<(Vec<f64>, [f64; 2])> {
    let jac = bordered_jacobian(mesh, params, s);
    let lu = BandLu::factor(&jac.fields).map_err(|_| Error::SingularJacobian { lambda: s.lambda })?;
    let mut z0: Vec<f64> = r.iter().map(|v| -v).collect();
    lu.solve_in_place(&mut z0);
    let mut z = jac.alpha_cols.clone();
    for zi in z.iter_mut() {
        lu.solve_in_place(zi);
    }
    // δψ = z0 − s₁ z₁ − s₂ z₂
    let b = &jac.constraint_rows;
    let m = [
        [jac.corner[0] - dot(&b[0], &z[0]), -dot(&b[0], &z[1])],
        [-dot(&b[1], &z[0]), jac.corner[1] - dot(&b[1], &z[1])],
    ];
    let rhs = [-defects[0] - dot(&b[0], &z0), -defects[1] - dot(&b[1], &z0)];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = (m[0][0].abs() + m[0][1].abs()) * (m[1][0].abs() + m[1][1].abs());
    if !(det.abs() > 1e-13 * scale) {
        return Err(Error::SingularJacobian { lambda: s.lambda });
    }
    let s1 = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
    let s2 = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    let dpsi: Vec<f64> = (0..z0.len()).map(|k| z0[k] - s1 * z[0][k] - s2 * z[1][k]).collect();
    if dpsi.iter().any(|v| !v.is_finite()) || !s1.is_finite() || !s2.is_finite() {
        return Err(Error::SingularJacobian { lambda: s.lambda });
    }
    Ok((dpsi, [s1, s2]))
}

fn apply_step(s: &SolutionState, dpsi: &[f64], dalpha: [f64; 2], t: f64) -> SolutionState {
    let psi = [0, 1].map(|c| {
        GridField::from_vec_unchecked(
            s.psi[c].as_slice().iter().enumerate().map(|(k, &v)| v + t * dpsi[2 * k + c]).collect(),
        )
    });
    SolutionState { lambda: s.lambda, alpha: [s.alpha[0] + t * dalpha[0], s.alpha[1] + t * dalpha[1]], psi }
}

/// Neighborhood condition `α_i + λψ_i ≥ α_i/2 > 0`, required when some
/// `p_i < 1` (the Newton weight is unbounded at the free boundary there).
fn check_neighborhood(params: &ProblemParams, s: &SolutionState) -> Result<()> {
    if params.min_p() >= 1.0 {
        return Ok(());
    }
    for i in 0..2 {
        let a = s.alpha[i];
        if !(a > 0.0) || s.min_v(i) < 0.5 * a {
            return Err(Error::InvalidParams {
                constraint: "newton_neighborhood",
                detail: format!("alpha{} = {a}, min v = {}", i + 1, s.min_v(i)),
            });
        }
    }
    Ok(())
}

/// Newton solve at `lambda` from `initial`.
pub fn newton_solve(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    initial: &SolutionState,
    tol: &Tolerances,
) -> Result<SolutionState> {
    newton_solve_with_report(mesh, params, lambda, initial, tol).map(|(s, _)| s)
}

pub fn newton_solve_with_report(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    initial: &SolutionState,
    tol: &Tolerances,
) -> Result<(SolutionState, NewtonReport)> {
    mesh.check(&initial.psi[0])?;
    mesh.check(&initial.psi[1])?;
    let mut s = SolutionState { lambda, ..initial.clone() };
    check_neighborhood(params, &s)?;
    let (mut r, mut defects, mut norm) = residual(mesh, params, &s);
    let mut polish = 0;
    for it in 0..tol.newton_max_iter {
        if norm <= tol.newton_tol {
            if norm == 0.0 || polish == 2 {
                return Ok((s, NewtonReport { iterations: it, residual: norm }));
            }
            polish += 1;
        }
        let (dpsi, dalpha) = newton_direction(mesh, params, &s, &r, defects)?;
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1.0 / 64.0 {
            let trial = apply_step(&s, &dpsi, dalpha, t);
            let (tr, td, tn) = residual(mesh, params, &trial);
            if tn < norm || t == 1.0 / 64.0 {
                accepted = Some((trial, tr, td, tn));
                break;
            }
            t *= 0.5;
        }
        let (trial, tr, td, tn) = accepted.expect("line search always accepts its last trial");
        if polish > 0 && tn >= norm {
            return Ok((s, NewtonReport { iterations: it, residual: norm }));
        }
        s = trial;
        r = tr;
        defects = td;
        norm = tn;
        check_neighborhood(params, &s)?;
    }
    if norm <= tol.newton_tol {
        return Ok((s, NewtonReport { iterations: tol.newton_max_iter, residual: norm }));
    }
    Err(Error::NoConvergence { solver: "newton", iterations: tol.newton_max_iter, residual: norm })
}
