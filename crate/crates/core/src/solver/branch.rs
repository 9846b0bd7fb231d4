//! Natural-parameter continuation in λ with secant predictor and Newton
//! corrector.

use super::{newton_solve, ProblemParams, SolutionState, Tolerances};
use crate::diagnostics::{record, BranchRecord};
use crate::error::{Error, Result};
use crate::mesh::DomainMesh;
use crate::spectral::first_sigma;

/// Step-size control of the continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub grow: f64,
    /// Continue past the loss of positivity (requires `p_i ≥ 1`).
    pub allow_free_boundary: bool,
    /// Width to which the λ̄ and λ* brackets are refined.
    pub bracket_width: f64,
    /// Compute `σ₁` at every positive record.
    pub track_sigma: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial: 0.1,
            min: 1e-6,
            max: 1.0,
            grow: 1.5,
            allow_free_boundary: false,
            bracket_width: 1e-4,
            track_sigma: true,
        }
    }
}

/// `[lo, hi]` with the last λ satisfying a condition and the first one
/// violating it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Why the continuation ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    LambdaMax,
    /// `σ₁` dropped to the floor.
    SigmaFloor,
    /// `min(α₁, α₂)` reached zero with free-boundary continuation disabled.
    PositivityLost,
    StepCollapse { lambda: f64, step: f64 },
}

/// Solution branch from λ = 0.
#[derive(Debug, Clone)]
pub struct Branch {
    pub params: ProblemParams,
    pub records: Vec<BranchRecord>,
    pub states: Vec<SolutionState>,
    /// First loss of `min α ≥ 0`.
    pub lambda_bar: Option<Bracket>,
    /// First loss of `σ₁ > floor` or of positivity.
    pub lambda_star: Option<Bracket>,
    pub stop: StopReason,
}

impl Branch {
    /// Records of positive states, in order.
    pub fn positive_records(&self) -> impl Iterator<Item = (&BranchRecord, &SolutionState)> {
        self.records.iter().zip(&self.states).filter(|(_, s)| s.is_positive())
    }
}

fn min_alpha(s: &SolutionState) -> f64 {
    s.alpha[0].min(s.alpha[1])
}

/// Bisects between a state satisfying a condition and a λ violating it.
fn refine(
    mesh: &DomainMesh,
    params: &ProblemParams,
    good: &SolutionState,
    bad_lambda: f64,
    width: f64,
    tol: &Tolerances,
    is_bad: &dyn Fn(&SolutionState) -> Result<bool>,
) -> Bracket {
    let mut g = good.clone();
    let mut hi = bad_lambda;
    while hi - g.lambda > width {
        let mid = 0.5 * (g.lambda + hi);
        match newton_solve(mesh, params, mid, &g, tol).and_then(|s| Ok((is_bad(&s)?, s))) {
            Ok((false, s)) => g = s,
            _ => hi = mid,
        }
    }
    Bracket { lo: g.lambda, hi }
}

/// Continues the branch from the λ = 0 solution up to `lambda_max`.
pub fn continue_branch(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambda_max: f64,
    control: &StepControl,
    tol: &Tolerances,
) -> Result<Branch> {
    if control.allow_free_boundary && params.min_p() < 1.0 {
        return Err(Error::InvalidParams {
            constraint: "free_boundary_requires_p_ge_1",
            detail: format!("p = ({}, {})", params.p1, params.p2),
        });
    }
    if !(control.initial > 0.0 && control.min > 0.0 && control.max >= control.min && control.grow >= 1.0) {
        return Err(Error::InvalidParams {
            constraint: "step_control",
            detail: format!("{control:?}"),
        });
    }
    let sigma_of = |s: &SolutionState| -> Result<f64> {
        if control.track_sigma && s.is_positive() {
            first_sigma(mesh, params, s)
        } else {
            Ok(f64::NAN)
        }
    };

    let s0 = SolutionState::at_zero(mesh)?;
    let sigma0 = sigma_of(&s0)?;
    let mut records = vec![record(mesh, params, &s0, sigma0)?];
    let mut states = vec![s0];
    let mut lambda_bar = None;
    let mut lambda_star = None;
    let mut step = control.initial.min(control.max);
    let mut stop = StopReason::LambdaMax;

    while states.last().map_or(0.0, |s| s.lambda) < lambda_max - 1e-14 {
        let cur = states.last().expect("branch starts with the λ = 0 state");
        let lambda = (cur.lambda + step).min(lambda_max);
        let predictor = if states.len() >= 2 {
            let prev = &states[states.len() - 2];
            let t = (lambda - cur.lambda) / (cur.lambda - prev.lambda);
            cur.combine(1.0 + t, prev, -t)
        } else {
            cur.clone()
        };
        let predictor = SolutionState { lambda, ..predictor };
        let solved = newton_solve(mesh, params, lambda, &predictor, tol)
            .or_else(|_| newton_solve(mesh, params, lambda, cur, tol));
        let s = match solved {
            Ok(s) => s,
            Err(_) => {
                step *= 0.5;
                if step < control.min {
                    stop = StopReason::StepCollapse { lambda: cur.lambda, step };
                    break;
                }
                continue;
            }
        };

        if !control.allow_free_boundary && min_alpha(&s) <= 0.0 {
            let b = refine(mesh, params, cur, lambda, control.bracket_width, tol, &|s| Ok(min_alpha(s) <= 0.0));
            lambda_star = Some(b);
            stop = StopReason::PositivityLost;
            break;
        }
        let sigma = sigma_of(&s)?;
        if s.is_positive() && sigma <= tol.sigma_floor {
            let floor = tol.sigma_floor;
            let b = refine(mesh, params, cur, lambda, control.bracket_width, tol, &|s| {
                Ok(min_alpha(s) <= 0.0 || first_sigma(mesh, params, s)? <= floor)
            });
            lambda_star = Some(b);
            stop = StopReason::SigmaFloor;
            break;
        }
        if min_alpha(&s) < 0.0 && lambda_bar.is_none() {
            let b = refine(mesh, params, cur, lambda, control.bracket_width, tol, &|s| Ok(min_alpha(s) < 0.0));
            lambda_bar = Some(b);
            if lambda_star.is_none() {
                lambda_star = Some(b);
            }
        }
        records.push(record(mesh, params, &s, sigma)?);
        states.push(s);
        step = (step * control.grow).min(control.max);
    }

    Ok(Branch { params: *params, records, states, lambda_bar, lambda_star, stop })
}
