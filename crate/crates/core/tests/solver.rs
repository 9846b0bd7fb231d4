use fbsys::solver::{
    alpha_root_find, continue_branch, contraction_inner_solve, contraction_threshold, newton_solve,
    newton_solve_with_report, souto_condition, StepControl, StopReason,
};
use fbsys::{build_mesh, DomainMesh, DomainShape, Error, GridField, ProblemParams, SolutionState, Tolerances};

fn square(n: usize) -> DomainMesh {
    build_mesh(DomainShape::unit_square(), n).unwrap()
}

#[test]
fn souto_arithmetic() {
    assert!(souto_condition(1.0, 1.0, 2));
    assert!(souto_condition(2.0, 3.0, 3));
    // 1/4 + 1/4 = 1/2 = (N−2)/(N−1) at N = 3
    assert!(!souto_condition(3.0, 3.0, 3));
    match ProblemParams::with_dim(3.0, 3.0, 3) {
        Err(Error::InvalidParams { constraint, .. }) => assert_eq!(constraint, "souto_condition"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn inner_solve_vanishes_for_zero_lambda_or_nonpositive_alpha() {
    let mesh = square(24);
    let params = ProblemParams::new(1.0, 2.0).unwrap();
    let (a, b) = contraction_inner_solve(&mesh, &params, 0.0, [0.7, 1.3], &Tolerances::default()).unwrap();
    assert_eq!(a.inf_norm() + b.inf_norm(), 0.0);
    let l0 = contraction_threshold(&mesh, &params).unwrap().lambda0;
    let (a, b) = contraction_inner_solve(&mesh, &params, l0, [-0.2, 0.0], &Tolerances::default()).unwrap();
    assert_eq!(a.inf_norm() + b.inf_norm(), 0.0);
}

#[test]
fn inner_solve_rejects_lambda_above_threshold() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let l0 = contraction_threshold(&mesh, &params).unwrap().lambda0;
    let r = contraction_inner_solve(&mesh, &params, 2.0 * l0, [1.0, 1.0], &Tolerances::default());
    assert!(matches!(r, Err(Error::NotContraction { .. })));
}

#[test]
fn inner_solve_matches_newton_at_its_alpha() {
    let mesh = square(32);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let tol = Tolerances::default();
    let l = contraction_threshold(&mesh, &params).unwrap().lambda0 / 2.0;
    let s = newton_solve(&mesh, &params, l, &SolutionState::at_zero(&mesh).unwrap(), &tol).unwrap();
    let (a, b) = contraction_inner_solve(&mesh, &params, l, s.alpha, &tol).unwrap();
    assert!(a.max_abs_diff(&s.psi[0]) < 1e-8);
    assert!(b.max_abs_diff(&s.psi[1]) < 1e-8);
}

#[test]
fn root_find_at_zero_is_the_torsion_state() {
    let mesh = square(24);
    let params = ProblemParams::new(2.0, 3.0).unwrap();
    let s = alpha_root_find(&mesh, &params, 0.0, &Tolerances::default()).unwrap();
    assert_eq!(s.alpha, [1.0, 1.0]);
    let g = mesh.torsion().unwrap();
    assert!(s.psi[0].max_abs_diff(&g) < 1e-14 && s.psi[1].max_abs_diff(&g) < 1e-14);
}

#[test]
fn small_lambda_alpha_exceeds_one_third() {
    let mesh = square(24);
    for (p1, p2) in [(1.0, 1.0), (0.5, 3.0), (4.0, 2.0)] {
        let params = ProblemParams::new(p1, p2).unwrap();
        let l0 = contraction_threshold(&mesh, &params).unwrap().lambda0;
        let s = alpha_root_find(&mesh, &params, l0, &Tolerances::default()).unwrap();
        assert!(s.alpha.iter().all(|&a| a > 1.0 / 3.0 && a <= 1.0), "{:?}", s.alpha);
        assert!(s.residual(&mesh, &params).unwrap() < 1e-9);
    }
}

#[test]
fn scalar_case_is_symmetric() {
    let mesh = square(24);
    let params = ProblemParams::new(2.0, 2.0).unwrap();
    let l = contraction_threshold(&mesh, &params).unwrap().lambda0 / 2.0;
    let s = alpha_root_find(&mesh, &params, l, &Tolerances::default()).unwrap();
    assert!((s.alpha[0] - s.alpha[1]).abs() < 1e-8);
    assert!(s.psi[0].max_abs_diff(&s.psi[1]) < 1e-8);
}

#[test]
fn newton_keeps_an_exact_start() {
    let mesh = square(16);
    let params = ProblemParams::new(1.5, 2.5).unwrap();
    let z = SolutionState::at_zero(&mesh).unwrap();
    let (s, rep) = newton_solve_with_report(&mesh, &params, 0.0, &z, &Tolerances::default()).unwrap();
    // polishing steps only
    assert!(rep.iterations <= 2);
    let (da, dp) = s.distance(&z);
    assert!(da < 1e-13 && dp < 1e-13);
}

#[test]
fn newton_agrees_with_root_find_below_threshold() {
    let mesh = square(24);
    let tol = Tolerances::default();
    for (p1, p2) in [(1.0, 2.0), (3.0, 1.5)] {
        let params = ProblemParams::new(p1, p2).unwrap();
        let l = contraction_threshold(&mesh, &params).unwrap().lambda0;
        let a = alpha_root_find(&mesh, &params, l, &tol).unwrap();
        let b = newton_solve(&mesh, &params, l, &SolutionState::at_zero(&mesh).unwrap(), &tol).unwrap();
        let (da, dp) = a.distance(&b);
        assert!(da < 1e-8 && dp < 1e-8, "{da} {dp}");
    }
}

#[test]
fn linear_case_needs_one_newton_step() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let n = mesh.len();
    let start = SolutionState {
        lambda: 7.0,
        alpha: [0.3, 0.9],
        psi: [GridField::constant(n, 0.05), mesh.torsion().unwrap().map(|v| 2.0 * v)],
    };
    let (s, rep) = newton_solve_with_report(&mesh, &params, 7.0, &start, &Tolerances::default()).unwrap();
    // one step plus polishing
    assert!(rep.iterations <= 3, "{}", rep.iterations);
    assert!(s.residual(&mesh, &params).unwrap() < 1e-10);
}

#[test]
fn linear_branch_loses_positivity() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let control = StepControl { allow_free_boundary: true, max: 2.0, ..StepControl::default() };
    let b = continue_branch(&mesh, &params, 25.0, &control, &Tolerances::default()).unwrap();
    assert_eq!(b.stop, StopReason::LambdaMax);
    let bar = b.lambda_bar.expect("min α crosses zero");
    assert!(bar.width() <= 1e-4 && bar.lo > 15.0 && bar.hi < 20.0);
    assert!(b.records.windows(2).all(|w| w[1].lambda > w[0].lambda && w[1].e >= w[0].e));
    assert!(b.states.last().unwrap().alpha[0] < 0.0);
}

#[test]
fn branch_matches_root_find_on_small_lambda() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 3.0).unwrap();
    let tol = Tolerances::default();
    let l0 = contraction_threshold(&mesh, &params).unwrap().lambda0;
    let control = StepControl { initial: l0 / 4.0, max: l0 / 4.0, grow: 1.0, ..StepControl::default() };
    let b = continue_branch(&mesh, &params, l0, &control, &tol).unwrap();
    assert_eq!(b.states.len(), 5);
    for s in &b.states {
        let r = alpha_root_find(&mesh, &params, s.lambda, &tol).unwrap();
        let (da, dp) = r.distance(s);
        assert!(da < 1e-8 && dp < 1e-8);
    }
}

#[test]
fn sublinear_branch_stays_in_the_newton_neighborhood() {
    let mesh = square(16);
    let params = ProblemParams::new(0.5, 1.0).unwrap();
    let b = continue_branch(&mesh, &params, 60.0, &StepControl::default(), &Tolerances::default()).unwrap();
    assert!(matches!(b.stop, StopReason::StepCollapse { .. }), "{:?}", b.stop);
    let last = b.states.last().unwrap();
    assert!(last.lambda > 1.0);
    for s in &b.states {
        assert!(s.is_positive());
        assert!((0..2).all(|i| s.min_v(i) >= 0.5 * s.alpha[i]));
    }
}
