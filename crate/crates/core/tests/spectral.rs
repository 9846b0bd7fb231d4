use std::f64::consts::PI;

use fbsys::solver::{continue_branch, StepControl};
use fbsys::spectral::{
    check_spectral_bound, dense_sigmas, eigen_solve, sobolev_constant, sobolev_profile, weighted_mean, WeightedSpace,
};
use fbsys::{build_mesh, DomainMesh, DomainShape, GridField, ProblemParams, SolutionState, Tolerances};

fn square(n: usize) -> DomainMesh {
    build_mesh(DomainShape::unit_square(), n).unwrap()
}

#[test]
fn weighted_mean_and_projection() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 2.0).unwrap();
    let s = SolutionState::at_zero(&mesh).unwrap();
    let space = WeightedSpace::new(&mesh, &params, &s).unwrap();
    let c = GridField::constant(mesh.len(), 2.5);
    assert!((weighted_mean(&space, 1, &c).unwrap() - 2.5).abs() < 1e-14);
    // λ = 0: unit weights, plain quadrature mean
    let g = mesh.torsion().unwrap();
    let plain = mesh.integrate(&g).unwrap() / mesh.quad_weights().iter().sum::<f64>();
    assert!((weighted_mean(&space, 2, &g).unwrap() - plain).abs() < 1e-14);
    let proj = space.project(0, &g).unwrap();
    assert!(space.weighted_mean(0, &proj).unwrap().abs() < 1e-12 * g.inf_norm());
    assert!(space.project(0, &proj).unwrap().max_abs_diff(&proj) < 1e-15);
}

#[test]
fn weights_positive_on_positive_states() {
    let mesh = square(16);
    let params = ProblemParams::new(2.0, 0.5).unwrap();
    let s = SolutionState { lambda: 4.0, ..SolutionState::at_zero(&mesh).unwrap() };
    let space = WeightedSpace::new(&mesh, &params, &s).unwrap();
    assert!(space.weights.iter().all(|w| w.min() > 0.0));
    assert!(space.masses.iter().all(|&m| m > 0.0));
}

#[test]
fn linear_zero_state_matches_dense_oracle() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let s = SolutionState::at_zero(&mesh).unwrap();
    let space = WeightedSpace::new(&mesh, &params, &s).unwrap();
    let set = eigen_solve(&space, &mesh, 6).unwrap();
    let dense = dense_sigmas(&space, &mesh).unwrap();
    for k in 0..6 {
        assert!((set.sigmas[k] - dense[k]).abs() / dense[k] < 1e-6);
    }
    assert!(set.mus.is_empty());
}

#[test]
fn eigen_structure_along_a_branch() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 2.0).unwrap();
    let control = StepControl { track_sigma: false, ..StepControl::default() };
    let b = continue_branch(&mesh, &params, 8.0, &control, &Tolerances::default()).unwrap();
    let s = b.states.last().unwrap();
    let space = WeightedSpace::new(&mesh, &params, s).unwrap();
    let set = eigen_solve(&space, &mesh, 8).unwrap();
    assert!(set.mus.windows(2).all(|w| w[0] >= w[1] && w[1] > 0.0));
    assert!(set.sigmas.iter().all(|&sg| s.lambda + sg > 0.0));
    assert!(set.residuals.iter().all(|&r| r < 1e-9));
    for k in 0..set.len() {
        for j in 0..k {
            for i in 0..2 {
                let (a, c) = if i == 0 { (&set.pairs[k].0, &set.pairs[j].0) } else { (&set.pairs[k].1, &set.pairs[j].1) };
                let (a, c) = (a.as_slice(), c.as_slice());
                assert!(space.inner(i, a, c).abs() <= 1e-8 * space.norm(i, a) * space.norm(i, c));
            }
        }
    }
    let total: usize = set.clusters.iter().map(|c| c.len()).sum();
    assert_eq!(total, set.len());
}

#[test]
fn sobolev_constants_of_square_and_disk() {
    let sq = square(48);
    let l = sobolev_constant(&sq, 2.0).unwrap();
    assert!((l - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 1e-2);
    let disk = build_mesh(DomainShape::Disk, 48).unwrap();
    let j01 = 2.404825557695773;
    let exact = PI * j01 * j01;
    let l = sobolev_constant(&disk, 2.0).unwrap();
    assert!((l - exact).abs() / exact < 1e-2, "{l}");
}

#[test]
fn sobolev_constant_decreases_in_t() {
    let mesh = square(24);
    let (vals, monotone) = sobolev_profile(&mesh, &[2.0, 3.0, 4.0, 6.0]).unwrap();
    assert!(monotone, "{vals:?}");
}

#[test]
fn spectral_bound_on_linear_branch() {
    let mesh = square(16);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let b = continue_branch(&mesh, &params, 30.0, &StepControl::default(), &Tolerances::default()).unwrap();
    let rep = check_spectral_bound(&b, &mesh, &params).unwrap();
    assert!(!rep.entries.is_empty());
    assert_eq!(rep.violations(), 0);
    assert!(rep.entries[0].lambda == 0.0 && rep.entries[0].sigma1 > 0.0);
}

#[test]
fn spectral_bound_of_empty_branch() {
    let mesh = square(8);
    let params = ProblemParams::new(1.0, 1.0).unwrap();
    let mut b = continue_branch(&mesh, &params, 0.1, &StepControl::default(), &Tolerances::default()).unwrap();
    b.records.clear();
    assert!(check_spectral_bound(&b, &mesh, &params).unwrap().entries.is_empty());
}
