//! Small-λ existence scheme: for fixed `α` the map
//! `T(u) = λ(G[(α₂+u₂)₊^{p₂}], G[(α₁+u₁)₊^{p₁}])` is a contraction on a ball
//! of the nonnegative cone, and the mass constraints are then met by nested
//! bracketed root finding in `α`.

use super::{pos_pow, ProblemParams, SolutionState, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::inf_norm;
use crate::mesh::{DomainMesh, GridField};

/// Radius of the invariant ball and smallest admissible `α` when some
/// `p_i < 1`.
const BALL_RADIUS: f64 = 1.0;
const ALPHA_FLOOR: f64 = 1.0 / 3.0;

/// Mesh-dependent constants of the contraction argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConstants {
    /// Radius `C₁` of the invariant ball in the sup norm.
    pub c1: f64,
    /// Bound `C₂ ≥ ‖G[(α+u)₊^p]‖∞` over the ball.
    pub c2: f64,
    /// Lipschitz bound `C₃` of `u ↦ G[(α+u)₊^p]` over the ball.
    pub c3: f64,
    /// `‖G[1]‖∞`.
    pub green_sup: f64,
    /// Contraction threshold `λ₀`.
    pub lambda0: f64,
}

/// Computes `λ₀ = min(1, C₁/C₂, 1/(2C₃), min_i (1/4)^{1/p_i}/(2C₂))`.
///
/// The last term keeps `λ‖u‖∞ ≤ 1/2` for `p ≥ 1` (so any root has
/// `α_i ≥ 1/2`) and makes `g_i(1/3, ·) < 1` certifiable when `p_i < 1`.
pub fn contraction_threshold(mesh: &DomainMesh, params: &ProblemParams) -> Result<ContractionConstants> {
    let green_sup = mesh.torsion()?.max();
    let c1 = BALL_RADIUS;
    let mut c2 = 0.0f64;
    let mut c3 = 0.0f64;
    for i in 0..2 {
        let p = params.p(i);
        c2 = c2.max((1.0 + c1).powf(p) * green_sup);
        let lip = if p >= 1.0 { p * (1.0 + c1).powf(p - 1.0) } else { p * ALPHA_FLOOR.powf(p - 1.0) };
        c3 = c3.max(lip * green_sup);
    }
    let mut lambda0 = 1.0f64.min(c1 / c2).min(0.5 / c3);
    for i in 0..2 {
        lambda0 = lambda0.min(0.25f64.powf(1.0 / params.p(i)) / (2.0 * c2));
    }
    Ok(ContractionConstants { c1, c2, c3, green_sup, lambda0 })
}

fn check_lambda(lambda: f64, consts: &ContractionConstants) -> Result<()> {
    if !(lambda >= 0.0) || lambda > consts.lambda0 * (1.0 + 1e-12) {
        return Err(Error::NotContraction { lambda, lambda0: consts.lambda0 });
    }
    Ok(())
}

/// Fixed point `u` of `T` starting from `start` (or zero).
fn fixed_point(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    alpha: [f64; 2],
    start: Option<&[Vec<f64>; 2]>,
    consts: &ContractionConstants,
    tol: &Tolerances,
) -> Result<[Vec<f64>; 2]> {
    let n = mesh.len();
    let mut u = start.cloned().unwrap_or_else(|| [vec![0.0; n], vec![0.0; n]]);
    if lambda == 0.0 {
        return Ok([vec![0.0; n], vec![0.0; n]]);
    }
    let mut prev_step = f64::INFINITY;
    let mut growth = 0;
    for _ in 0..tol.fp_max_iter {
        let mut next: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let j = 1 - i;
            let p = params.p(j);
            let rho: Vec<f64> = u[j].iter().map(|&x| pos_pow(alpha[j] + x, p)).collect();
            let mut g = mesh.green_slice(&rho)?;
            g.iter_mut().for_each(|x| *x *= lambda);
            next[i] = g;
        }
        let step = (0..2)
            .map(|i| next[i].iter().zip(&u[i]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        u = next;
        if inf_norm(&u[0]).max(inf_norm(&u[1])) > consts.c1 * (1.0 + 1e-9) {
            return Err(Error::NotContraction { lambda, lambda0: consts.lambda0 });
        }
        if step <= tol.fp_tol {
            return Ok(u);
        }
        if step > prev_step {
            growth += 1;
            if growth > 5 {
                return Err(Error::NotContraction { lambda, lambda0: consts.lambda0 });
            }
        }
        prev_step = step;
    }
    Err(Error::NotContraction { lambda, lambda0: consts.lambda0 })
}

/// Fixed point of `T_{λ,α}`, returned as `ψ_i = u_i/λ` (zero at `λ = 0`).
pub fn contraction_inner_solve(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    alpha: [f64; 2],
    tol: &Tolerances,
) -> Result<(GridField, GridField)> {
    let consts = contraction_threshold(mesh, params)?;
    check_lambda(lambda, &consts)?;
    let n = mesh.len();
    if lambda == 0.0 {
        return Ok((GridField::zeros(n), GridField::zeros(n)));
    }
    let [u1, u2] = fixed_point(mesh, params, lambda, alpha, None, &consts, tol)?;
    let scale = |u: Vec<f64>| GridField::from_vec_unchecked(u.into_iter().map(|x| x / lambda).collect());
    Ok((scale(u1), scale(u2)))
}

/// Illinois (modified regula falsi) root of an increasing function on
/// `[a, b]` with `f(a) < 0 ≤ f(b)`.
fn illinois(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
) -> Result<f64> {
    if fb == 0.0 {
        return Ok(b);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Solves the constrained problem at `λ ≤ λ₀` by nested bracketed root
/// finding: outer in `α₁`, inner in `α₂`, each bracket certified first.
pub fn alpha_root_find(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda: f64,
    tol: &Tolerances,
) -> Result<SolutionState> {
    let consts = contraction_threshold(mesh, params)?;
    check_lambda(lambda, &consts)?;
    if lambda == 0.0 {
        return SolutionState::at_zero(mesh);
    }
    let lo = [0, 1].map(|i| if params.p(i) < 1.0 { ALPHA_FLOOR } else { 0.0 });
    let xtol = 1e-14;

    let mass = |alpha: [f64; 2], i: usize, cache: &mut Option<[Vec<f64>; 2]>| -> Result<f64> {
        let u = fixed_point(mesh, params, lambda, alpha, cache.as_ref(), &consts, tol)?;
        let p = params.p(i);
        let m: f64 = mesh.integrate_slice(
            &u[i].iter().map(|&x| pos_pow(alpha[i] + x, p)).collect::<Vec<_>>(),
        );
        *cache = Some(u);
        Ok(m - 1.0)
    };

    // α₂(α₁) solving g₂ = 1
    let inner = |a1: f64, cache: &mut Option<[Vec<f64>; 2]>| -> Result<f64> {
        let f_lo = mass([a1, lo[1]], 1, cache)?;
        let f_hi = mass([a1, 1.0], 1, cache)?;
        if !(f_lo < 0.0 && f_hi >= 0.0) {
            return Err(Error::Bracket {
                what: "alpha2",
                detail: format!("g2({a1}, {}) - 1 = {f_lo:e}, g2({a1}, 1) - 1 = {f_hi:e}", lo[1]),
            });
        }
        illinois(|a2| mass([a1, a2], 1, cache), lo[1], 1.0, f_lo, f_hi, xtol)
    };

    let mut outer_cache: Option<[Vec<f64>; 2]> = None;
    let mut outer = |a1: f64| -> Result<f64> {
        let a2 = inner(a1, &mut outer_cache)?;
        mass([a1, a2], 0, &mut outer_cache)
    };
    let f_lo = outer(lo[0])?;
    let f_hi = outer(1.0)?;
    if !(f_lo < 0.0 && f_hi >= 0.0) {
        return Err(Error::Bracket {
            what: "alpha1",
            detail: format!("g1 - 1 = {f_lo:e} at alpha1 = {}, {f_hi:e} at alpha1 = 1", lo[0]),
        });
    }
    let a1 = illinois(&mut outer, lo[0], 1.0, f_lo, f_hi, xtol)?;

    let mut cache = None;
    let a2 = inner(a1, &mut cache)?;
    let u = fixed_point(mesh, params, lambda, [a1, a2], cache.as_ref(), &consts, tol)?;
    let [u1, u2] = u;
    let scale = |u: Vec<f64>| GridField::from_vec_unchecked(u.into_iter().map(|x| x / lambda).collect());
    Ok(SolutionState { lambda, alpha: [a1, a2], psi: [scale(u1), scale(u2)] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainShape};

    #[test]
    fn threshold_is_positive_and_bounded() {
        let mesh = build_mesh(DomainShape::unit_square(), 24).unwrap();
        for (p1, p2) in [(1.0, 1.0), (2.0, 3.0), (0.5, 0.8)] {
            let params = ProblemParams::new(p1, p2).unwrap();
            let c = contraction_threshold(&mesh, &params).unwrap();
            assert!(c.lambda0 > 0.0 && c.lambda0 <= 1.0);
            assert!(c.lambda0 * c.c3 <= 0.5 + 1e-15);
            assert!((c.green_sup - 0.0737).abs() < 2e-3);
        }
    }

    #[test]
    fn trivial_fixed_points() {
        let mesh = build_mesh(DomainShape::unit_square(), 16).unwrap();
        let params = ProblemParams::new(1.5, 2.0).unwrap();
        let tol = Tolerances::default();
        let (a, b) = contraction_inner_solve(&mesh, &params, 0.0, [0.7, 0.9], &tol).unwrap();
        assert_eq!(a.inf_norm() + b.inf_norm(), 0.0);
        let l0 = contraction_threshold(&mesh, &params).unwrap().lambda0;
        let (a, b) = contraction_inner_solve(&mesh, &params, l0, [-0.1, 0.0], &tol).unwrap();
        assert_eq!(a.inf_norm() + b.inf_norm(), 0.0);
        assert!(matches!(
            contraction_inner_solve(&mesh, &params, 2.0 * l0, [1.0, 1.0], &tol),
            Err(Error::NotContraction { .. })
        ));
    }

    #[test]
    fn root_find_meets_constraints() {
        let mesh = build_mesh(DomainShape::unit_square(), 16).unwrap();
        let tol = Tolerances::default();
        for (p1, p2) in [(1.0, 2.0), (0.6, 0.9)] {
            let params = ProblemParams::new(p1, p2).unwrap();
            let l0 = contraction_threshold(&mesh, &params).unwrap().lambda0;
            let s = alpha_root_find(&mesh, &params, 0.8 * l0, &tol).unwrap();
            assert!(s.residual(&mesh, &params).unwrap() < 1e-9, "{}", s.residual(&mesh, &params).unwrap());
            assert!(s.alpha.iter().all(|&a| a > 1.0 / 3.0 && a < 1.0));
        }
    }
}
