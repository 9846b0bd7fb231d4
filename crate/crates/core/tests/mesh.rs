use std::f64::consts::PI;

use fbsys::{build_mesh, DomainShape, Error, GridField};

#[test]
fn square_mesh_has_unit_mass() {
    let m = build_mesh(DomainShape::unit_square(), 64).unwrap();
    assert_eq!(m.len(), 63 * 63);
    let mass = m.integrate(&GridField::constant(m.len(), 1.0)).unwrap();
    assert!((mass - 1.0).abs() <= 1e-2);
    assert!((mass - 1.0).abs() <= m.mesh_mass_defect() + 1e-15);
    assert_eq!(m.integrate(&GridField::zeros(m.len())).unwrap(), 0.0);
}

#[test]
fn disk_mesh_radius_and_mass() {
    let m = build_mesh(DomainShape::Disk, 64).unwrap();
    assert!((DomainShape::Disk.radius() - 0.564190).abs() < 1e-6);
    let mass: f64 = m.quad_weights().iter().sum();
    assert!((mass - 1.0).abs() <= 2e-2);
    let r = DomainShape::Disk.radius();
    assert!(m.nodes().iter().all(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() < r));
}

#[test]
fn rectangle_sides() {
    let s = DomainShape::Rectangle { aspect: 4.0 };
    assert_eq!(s.sides(), (2.0, 0.5));
    assert_eq!(s.measure(), 1.0);
    let m = build_mesh(s, 32).unwrap();
    let (lx, ly) = s.sides();
    let (x0, y0) = s.origin();
    assert!(m.nodes().iter().all(|p| p[0] > x0 && p[0] < x0 + lx && p[1] > y0 && p[1] < y0 + ly));
}

#[test]
fn rejects_bad_input() {
    assert!(matches!(build_mesh(DomainShape::unit_square(), 4), Err(Error::ResolutionTooSmall { .. })));
    assert!(matches!(build_mesh(DomainShape::Rectangle { aspect: -1.0 }, 16), Err(Error::InvalidDomain(_))));
    assert!(GridField::new(vec![0.0, f64::NAN]).is_err());
    let m = build_mesh(DomainShape::unit_square(), 8).unwrap();
    assert!(matches!(m.integrate(&GridField::zeros(3)), Err(Error::SizeMismatch { .. })));
}

#[test]
fn disk_torsion_function_matches_closed_form() {
    let m = build_mesh(DomainShape::Disk, 96).unwrap();
    let psi = m.torsion().unwrap();
    let exact = m.field_from_fn(|x, y| (1.0 / PI - x * x - y * y) / 4.0).unwrap();
    let top = 1.0 / (4.0 * PI);
    assert!((psi.max() - top).abs() / top < 1e-3);
    assert!(psi.max_abs_diff(&exact) / top < 1e-3);
    let e0 = 1.0 / (8.0 * PI);
    assert!((m.integrate(&psi).unwrap() - e0).abs() / e0 < 1e-3);
    assert!((m.gradient_dot(&psi, &psi).unwrap() - e0).abs() / e0 < 1e-3);
}

#[test]
fn green_of_zero_is_zero() {
    let m = build_mesh(DomainShape::Disk, 16).unwrap();
    assert_eq!(m.green_apply(&GridField::zeros(m.len())).unwrap().inf_norm(), 0.0);
}

#[test]
fn green_of_square_eigenfunction() {
    let m = build_mesh(DomainShape::unit_square(), 96).unwrap();
    let phi = m.field_from_fn(|x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
    let psi = m.green_apply(&phi).unwrap();
    let expected = phi.map(|v| v / (2.0 * PI * PI));
    assert!(psi.max_abs_diff(&expected) / expected.inf_norm() < 1e-3);
}

#[test]
fn discrete_green_identity() {
    let m = build_mesh(DomainShape::unit_square(), 32).unwrap();
    let g = m.torsion().unwrap();
    let lhs = m.gradient_dot(&g, &g).unwrap();
    let rhs = m.integrate(&g).unwrap();
    assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    assert_eq!(m.gradient_dot(&GridField::zeros(m.len()), &g).unwrap(), 0.0);
}

#[test]
fn laplacian_inverts_green() {
    let m = build_mesh(DomainShape::Disk, 24).unwrap();
    let rho = m.field_from_fn(|x, y| 1.0 + x - 2.0 * y * y).unwrap();
    let back = m.neg_laplacian(&m.green_apply(&rho).unwrap()).unwrap();
    assert!(back.max_abs_diff(&rho) < 1e-8);
}

#[test]
fn iterative_and_direct_solves_agree() {
    let direct = build_mesh(DomainShape::Disk, 128).unwrap();
    let iterative = build_mesh(DomainShape::Disk, 129).unwrap();
    let a = direct.integrate(&direct.torsion().unwrap()).unwrap();
    let b = iterative.integrate(&iterative.torsion().unwrap()).unwrap();
    assert!((a - b).abs() / a < 1e-3);
}

#[test]
fn field_csv_lists_every_node() {
    let m = build_mesh(DomainShape::unit_square(), 8).unwrap();
    let dir = tempdir();
    let path = dir.join("field.csv");
    m.write_field_csv(&m.torsion().unwrap(), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), m.len() + 1);
    std::fs::remove_dir_all(dir).ok();
}

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("fbsys-mesh-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
