use std::f64::consts::PI;

use fbsys::diagnostics::{
    fourier_audit, free_boundary_extract, map_to_h, monotonicity_audit, record, record_with_spectrum,
    write_branch_csv, write_contour_csv, AuditOptions, BRANCH_CSV_HEADER,
};
use fbsys::solver::{continue_branch, newton_solve, StepControl};
use fbsys::spectral::{eigen_solve, WeightedSpace};
use fbsys::{build_mesh, DomainShape, Error, ProblemParams, SolutionState, Tolerances};

/// Torsional rigidity of the unit square from its double sine series.
fn square_torsion_series() -> f64 {
    let mut s = 0.0;
    for m in (1..2000).step_by(2) {
        for n in (1..2000).step_by(2) {
            let (m, n) = (m as f64, n as f64);
            s += 1.0 / (m * m * n * n * (m * m + n * n));
        }
    }
    64.0 / PI.powi(6) * s
}

#[test]
fn zero_state_energies() {
    let disk = build_mesh(DomainShape::Disk, 96).unwrap();
    let params = ProblemParams::new(2.0, 3.0).unwrap();
    let r = record(&disk, &params, &SolutionState::at_zero(&disk).unwrap(), f64::NAN).unwrap();
    let e0 = 1.0 / (8.0 * PI);
    assert!((r.e - e0).abs() / e0 < 1e-3);
    assert_eq!((r.alpha1, r.alpha2), (1.0, 1.0));
    assert!((r.gamma - (2.0 / 3.0 + 3.0 / 4.0)).abs() < 1e-15);

    let sq = build_mesh(DomainShape::unit_square(), 96).unwrap();
    let r = record(&sq, &params, &SolutionState::at_zero(&sq).unwrap(), f64::NAN).unwrap();
    let oracle = square_torsion_series();
    assert!((oracle - 0.035144).abs() < 1e-6);
    assert!(r.e < e0 && (r.e - oracle).abs() / oracle < 1e-2);
}

#[test]
fn records_along_a_branch() {
    let mesh = build_mesh(DomainShape::unit_square(), 24).unwrap();
    let params = ProblemParams::new(2.0, 2.0).unwrap();
    let b = continue_branch(&mesh, &params, 6.0, &StepControl::default(), &Tolerances::default()).unwrap();
    for r in &b.records {
        assert!(r.e_spread() <= 1e-9 * r.e);
        assert!(r.f_identity_defect(&params).abs() <= 1e-8);
        assert!((r.e_self - r.e).abs() <= 1e-8);
        assert!(!r.fb_flag);
    }
    let last = b.states.last().unwrap();
    let space = WeightedSpace::new(&mesh, &params, last).unwrap();
    let set = eigen_solve(&space, &mesh, 2).unwrap();
    let r = record_with_spectrum(&mesh, &params, last, &set).unwrap();
    assert_eq!(r.sigma1, set.sigmas[0]);
    assert!((r.sigma1 - b.records.last().unwrap().sigma1).abs() < 1e-9 * r.sigma1);
}

#[test]
fn audit_of_a_positive_branch_is_clean() {
    let mesh = build_mesh(DomainShape::unit_square(), 16).unwrap();
    let params = ProblemParams::new(1.0, 3.0).unwrap();
    let control = StepControl { max: 0.25, ..StepControl::default() };
    let b = continue_branch(&mesh, &params, 5.0, &control, &Tolerances::default()).unwrap();
    let rep = monotonicity_audit(&b.records, &AuditOptions::default());
    assert!(rep.is_clean(), "{:?}", rep.violations);
    assert_eq!(rep.derivatives.len(), b.records.len() - 2);
    assert!(monotonicity_audit(&b.records[..1], &AuditOptions::default()).violations.is_empty());
}

#[test]
fn audit_reports_a_rising_free_energy() {
    let mesh = build_mesh(DomainShape::unit_square(), 16).unwrap();
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let b = continue_branch(&mesh, &params, 2.0, &StepControl::default(), &Tolerances::default()).unwrap();
    let mut recs = b.records.clone();
    recs[2].f += 1.0;
    let rep = monotonicity_audit(&recs, &AuditOptions::default());
    assert!(rep.violations.iter().any(|v| v.check == "F_decreasing" && v.margin < 0.0));
}

#[test]
fn fourier_coefficients_on_a_branch() {
    let mesh = build_mesh(DomainShape::unit_square(), 24).unwrap();
    let params = ProblemParams::new(1.0, 2.0).unwrap();
    let tol = Tolerances::default();
    let s0 = newton_solve(&mesh, &params, 3.95, &SolutionState::at_zero(&mesh).unwrap(), &tol).unwrap();
    let s1 = newton_solve(&mesh, &params, 4.0, &s0, &tol).unwrap();
    let s2 = newton_solve(&mesh, &params, 4.05, &s1, &tol).unwrap();
    let space = WeightedSpace::new(&mesh, &params, &s1).unwrap();
    let set = eigen_solve(&space, &mesh, 8).unwrap();
    let f = fourier_audit(&mesh, &params, &s1, &set, (&s0, &s2)).unwrap();
    assert!(f.min_xi >= -1e-8);
    assert!(f.beta_rel_err.iter().all(|&e| e <= 1e-3), "{:?}", f.beta_rel_err);
    assert!(f.de_dlambda_fd >= f.lower_bound);
    assert!(f.de_dlambda_spectral <= f.de_dlambda_fd + 1e-9);
    assert!(f.de_dlambda_spectral >= f.lower_bound - 1e-9 || f.tail_gap > 0.0);

    let fewer = eigen_solve(&space, &mesh, 2).unwrap();
    let g = fourier_audit(&mesh, &params, &s1, &fewer, (&s0, &s2)).unwrap();
    assert!(g.tail_gap >= f.tail_gap - 1e-12);

    let bad = fourier_audit(&mesh, &params, &s1, &set, (&s2, &s0));
    assert!(matches!(bad, Err(Error::InvalidParams { constraint: "neighbor_states", .. })));
}

#[test]
fn h_image_reproduces_the_energies() {
    let mesh = build_mesh(DomainShape::Disk, 32).unwrap();
    let params = ProblemParams::new(1.5, 3.0).unwrap();
    let tol = Tolerances::default();
    let s = newton_solve(&mesh, &params, 5.0, &SolutionState::at_zero(&mesh).unwrap(), &tol).unwrap();
    let h = map_to_h(&mesh, &params, &s).unwrap();
    let r = record(&mesh, &params, &s, f64::NAN).unwrap();
    assert!(h.residuals.iter().all(|&x| x <= 10.0 * tol.newton_tol));
    assert!(h.norm_identity.iter().all(|x| x.abs() <= 1e-8));
    assert!((h.gamma_h - r.gamma).abs() <= 1e-8);
    assert!((h.e_h - r.e).abs() <= 1e-8);
    assert!((h.f_h - r.f).abs() <= 1e-8);
    assert_eq!(h.mu, [r.mu1_h, r.mu2_h]);
}

#[test]
fn free_boundary_past_positivity() {
    let mesh = build_mesh(DomainShape::unit_square(), 24).unwrap();
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let tol = Tolerances::default();
    let s0 = SolutionState::at_zero(&mesh).unwrap();
    assert!(free_boundary_extract(&mesh, &s0).is_empty());
    let s = newton_solve(&mesh, &params, 30.0, &s0, &tol).unwrap();
    assert!(s.alpha[0] < 0.0);
    let contours = free_boundary_extract(&mesh, &s);
    for c in [1, 2] {
        assert!(contours.iter().any(|x| x.component == c && x.closed && x.interior && x.area > 0.0));
    }
    // the negative set carries no mass, so the positive set carries all of it
    let rho = s.density(&params, 0);
    let pos: f64 = s.v(0).iter().zip(rho.as_slice()).zip(mesh.quad_weights()).filter(|((v, _), _)| **v > 0.0).map(|((_, r), w)| r * w).sum();
    assert!((pos - 1.0).abs() < 1e-10);

    let dir = std::env::temp_dir().join(format!("fbsys-fb-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    write_contour_csv(&contours[0], &dir.join("c.csv")).unwrap();
    let rec = record(&mesh, &params, &s, f64::NAN).unwrap();
    assert!(rec.fb_flag && rec.mu1_h.is_nan());
    write_branch_csv(&[rec], &dir.join("b.csv")).unwrap();
    let text = std::fs::read_to_string(dir.join("b.csv")).unwrap();
    assert!(text.starts_with(&BRANCH_CSV_HEADER.join(",")));
    std::fs::remove_dir_all(&dir).ok();
}
