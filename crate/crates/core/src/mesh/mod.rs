//! Unit-area planar domains, nodal quadrature, the Dirichlet Laplacian and
//! the Green operator.
//!
//! The discrete Laplacian is stored in flux form `-Δ_h u = K u / w`, where
//! `K` is a symmetric M-matrix (edge conductances) and `w` the nodal
//! quadrature weights. With this split the discrete Green identity
//! `uᵀ K v = Σ w (-Δ_h u) v` is exact and `G_h = K⁻¹ diag(w)` is
//! self-adjoint in the `w`-weighted inner product.

mod geometry;

pub use geometry::rect_disk_area;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{pcg, BandCholesky, Csr};

/// Smallest accepted resolution parameter.
pub const MIN_RESOLUTION: usize = 8;
/// Largest resolution solved with a direct band factorization.
pub const DIRECT_SOLVE_MAX_N: usize = 128;
/// Default relative residual target of the Poisson solves.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

/// Relative distance (in mesh spacings) below which a grid point is too close
/// to a curved boundary and is treated as lying on it.
const MIN_ARM: f64 = 1e-2;

/// Planar domain scaled to unit measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainShape {
    Rectangle { aspect: f64 },
    Disk,
}

impl DomainShape {
    pub fn unit_square() -> Self {
        DomainShape::Rectangle { aspect: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainShape::Rectangle { aspect } if !(aspect > 0.0 && aspect.is_finite()) => Err(
                Error::InvalidDomain(format!("rectangle aspect must be positive, got {aspect}")),
            ),
            _ => Ok(()),
        }
    }

    /// Side lengths of the rectangle, or the bounding square of the disk.
    pub fn sides(&self) -> (f64, f64) {
        match *self {
            DomainShape::Rectangle { aspect } => (aspect.sqrt(), 1.0 / aspect.sqrt()),
            DomainShape::Disk => {
                let d = 2.0 * self.radius();
                (d, d)
            }
        }
    }

    /// Radius of the unit-area disk, `1/√π`.
    pub fn radius(&self) -> f64 {
        (1.0 / PI).sqrt()
    }

    /// Analytic measure; always one.
    pub fn measure(&self) -> f64 {
        1.0
    }

    /// Lower-left corner of the bounding box.
    pub fn origin(&self) -> (f64, f64) {
        match self {
            DomainShape::Rectangle { .. } => (0.0, 0.0),
            DomainShape::Disk => (-self.radius(), -self.radius()),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            DomainShape::Rectangle { .. } => {
                let (a, b) = self.sides();
                x > 0.0 && x < a && y > 0.0 && y < b
            }
            DomainShape::Disk => x * x + y * y < self.radius().powi(2),
        }
    }

    fn clipped_area(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        match *self {
            DomainShape::Rectangle { .. } => {
                let (a, b) = self.sides();
                let w = (x1.min(a) - x0.max(0.0)).max(0.0);
                let h = (y1.min(b) - y0.max(0.0)).max(0.0);
                w * h
            }
            DomainShape::Disk => rect_disk_area(x0, x1, y0, y1, self.radius()),
        }
    }
}

/// Real values on the interior nodes of a mesh; Dirichlet fields vanish on
/// the boundary implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField(Vec<f64>);

impl GridField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(GridField(values))
    }

    pub fn zeros(len: usize) -> Self {
        GridField(vec![0.0; len])
    }

    pub fn constant(len: usize, c: f64) -> Self {
        GridField(vec![c; len])
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        GridField(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn inf_norm(&self) -> f64 {
        crate::linalg::inf_norm(&self.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> GridField {
        GridField(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

enum PoissonSolver {
    Direct(BandCholesky),
    Iterative,
}

/// Discretized unit-area domain. Immutable after construction.
pub struct DomainMesh {
    shape: DomainShape,
    n: usize,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    origin: (f64, f64),
    nodes: Vec<[f64; 2]>,
    grid_ij: Vec<(usize, usize)>,
    lookup: Vec<Option<usize>>,
    weights: Vec<f64>,
    stiffness: Csr,
    solver: PoissonSolver,
    solver_tol: f64,
    mass_defect: f64,
}

impl std::fmt::Debug for DomainMesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DomainMesh")
            .field("shape", &self.shape)
            .field("n", &self.n)
            .field("nodes", &self.nodes.len())
            .field("h", &self.h())
            .finish()
    }
}

/// Builds the mesh for `shape` with resolution `n` (intervals across the
/// shorter side of the bounding box).
pub fn build_mesh(shape: DomainShape, n: usize) -> Result<DomainMesh> {
    build_mesh_with_tol(shape, n, DEFAULT_SOLVER_TOL)
}

pub fn build_mesh_with_tol(shape: DomainShape, n: usize, solver_tol: f64) -> Result<DomainMesh> {
    shape.validate()?;
    if n < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall { n, min: MIN_RESOLUTION });
    }
    let (lx, ly) = shape.sides();
    let (nx, ny) = if lx >= ly {
        (((n as f64) * lx / ly).round() as usize, n)
    } else {
        (n, ((n as f64) * ly / lx).round() as usize)
    };
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let origin = shape.origin();
    let point = |i: usize, j: usize| (origin.0 + i as f64 * hx, origin.1 + j as f64 * hy);
    let h = hx.min(hy);

    // interior node selection
    let mut lookup = vec![None; (nx + 1) * (ny + 1)];
    let mut nodes = Vec::new();
    let mut grid_ij = Vec::new();
    for j in 1..ny {
        for i in 1..nx {
            let (x, y) = point(i, j);
            let inside = match shape {
                DomainShape::Rectangle { .. } => true,
                DomainShape::Disk => shape.radius() - (x * x + y * y).sqrt() >= MIN_ARM * h,
            };
            if inside {
                lookup[j * (nx + 1) + i] = Some(nodes.len());
                nodes.push([x, y]);
                grid_ij.push((i, j));
            }
        }
    }
    let nn = nodes.len();
    if nn == 0 {
        return Err(Error::InvalidDomain("mesh has no interior nodes".into()));
    }

    // stiffness: conductance = face length / arm length
    let mut rows = Vec::with_capacity(nn);
    for (k, &(i, j)) in grid_ij.iter().enumerate() {
        let (x, y) = point(i, j);
        let mut row = Vec::with_capacity(5);
        let mut diag = 0.0;
        let dirs: [(isize, isize, f64, f64); 4] =
            [(1, 0, hy, hx), (-1, 0, hy, hx), (0, 1, hx, hy), (0, -1, hx, hy)];
        for (di, dj, face, dist) in dirs {
            let (ni, nj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
            match lookup[nj * (nx + 1) + ni] {
                Some(m) => {
                    let c = face / dist;
                    row.push((m, -c));
                    diag += c;
                }
                None => {
                    let arm = boundary_arm(&shape, x, y, di, dj, dist);
                    diag += face / arm;
                }
            }
        }
        row.push((k, diag));
        rows.push(row);
    }
    let stiffness = Csr::from_rows(rows);

    // quadrature: dual cells clipped to the domain; cells of non-interior
    // grid points donate their area to the nearest interior node
    let mut weights = vec![0.0; nn];
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = point(i, j);
            let area = shape.clipped_area(x - 0.5 * hx, x + 0.5 * hx, y - 0.5 * hy, y + 0.5 * hy);
            if area <= 0.0 {
                continue;
            }
            let target = lookup[j * (nx + 1) + i]
                .or_else(|| nearest_interior(&lookup, nx, ny, i, j, hx, hy))
                .ok_or_else(|| Error::InvalidDomain("orphan boundary cell".into()))?;
            weights[target] += area;
        }
    }
    let mass_defect = (weights.iter().sum::<f64>() - shape.measure()).abs();

    let solver = if n <= DIRECT_SOLVE_MAX_N {
        PoissonSolver::Direct(BandCholesky::factor(&stiffness)?)
    } else {
        PoissonSolver::Iterative
    };

    Ok(DomainMesh {
        shape,
        n,
        nx,
        ny,
        hx,
        hy,
        origin,
        nodes,
        grid_ij,
        lookup,
        weights,
        stiffness,
        solver,
        solver_tol,
        mass_defect,
    })
}

/// Distance from `(x, y)` to the boundary along the grid direction `(di, dj)`,
/// capped at the full spacing `dist`.
fn boundary_arm(shape: &DomainShape, x: f64, y: f64, di: isize, dj: isize, dist: f64) -> f64 {
    match shape {
        DomainShape::Rectangle { .. } => dist,
        DomainShape::Disk => {
            let r2 = shape.radius().powi(2);
            let t = if di != 0 {
                (r2 - y * y).max(0.0).sqrt() - x * di as f64
            } else {
                (r2 - x * x).max(0.0).sqrt() - y * dj as f64
            };
            t.clamp(MIN_ARM * dist, dist)
        }
    }
}

fn nearest_interior(
    lookup: &[Option<usize>],
    nx: usize,
    ny: usize,
    i: usize,
    j: usize,
    hx: f64,
    hy: f64,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for radius in 1..=3isize {
        for dj in -radius..=radius {
            for di in -radius..=radius {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni > nx as isize || nj > ny as isize {
                    continue;
                }
                if let Some(m) = lookup[nj as usize * (nx + 1) + ni as usize] {
                    let d = (di as f64 * hx).hypot(dj as f64 * hy);
                    if best.is_none_or(|(bd, _)| d < bd - 1e-12 * hx) {
                        best = Some((d, m));
                    }
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(_, m)| m)
}

impl DomainMesh {
    pub fn shape(&self) -> DomainShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest grid spacing.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiffness
    }

    pub fn mesh_mass_defect(&self) -> f64 {
        self.mass_defect
    }

    pub fn solver_tol(&self) -> f64 {
        self.solver_tol
    }

    /// Number of grid intervals `(nx, ny)` of the bounding box.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Physical coordinates of grid point `(i, j)`.
    pub fn grid_point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin.0 + i as f64 * self.hx, self.origin.1 + j as f64 * self.hy)
    }

    /// Interior node index of grid point `(i, j)`, if any.
    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        self.lookup[j * (self.nx + 1) + i]
    }

    pub fn grid_index(&self, node: usize) -> (usize, usize) {
        self.grid_ij[node]
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        GridField::new(self.nodes.iter().map(|p| f(p[0], p[1])).collect())
    }

    pub fn check(&self, f: &GridField) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::SizeMismatch { expected: self.len(), got: f.len() });
        }
        Ok(())
    }

    /// Quadrature `Σ w f`.
    pub fn integrate(&self, f: &GridField) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_slice(f.as_slice()))
    }

    pub(crate) fn integrate_slice(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `Σ w f g`.
    pub(crate) fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum()
    }

    /// Solves `-Δψ = ρ` with homogeneous Dirichlet data.
    pub fn green_apply(&self, rho: &GridField) -> Result<GridField> {
        self.check(rho)?;
        Ok(GridField::from_vec_unchecked(self.green_slice(rho.as_slice())?))
    }

    pub(crate) fn green_slice(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let mut b: Vec<f64> = rho.iter().zip(&self.weights).map(|(r, w)| r * w).collect();
        match &self.solver {
            PoissonSolver::Direct(chol) => {
                chol.solve_in_place(&mut b);
                Ok(b)
            }
            PoissonSolver::Iterative => {
                let mut x = vec![0.0; b.len()];
                pcg(&self.stiffness, &b, &mut x, self.solver_tol * 1e-2, 20 * self.len() + 100)?;
                Ok(x)
            }
        }
    }

    /// Applies the discrete `-Δ` to a Dirichlet field.
    pub fn neg_laplacian(&self, u: &GridField) -> Result<GridField> {
        self.check(u)?;
        Ok(GridField::from_vec_unchecked(self.neg_laplacian_slice(u.as_slice())))
    }

    pub(crate) fn neg_laplacian_slice(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.stiffness.matvec(u, &mut out);
        out.iter_mut().zip(&self.weights).for_each(|(o, w)| *o /= w);
        out
    }

    /// Discrete `∫(∇u, ∇v)` as the stiffness bilinear form `uᵀ K v`.
    pub fn gradient_dot(&self, u: &GridField, v: &GridField) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.gradient_dot_slice(u.as_slice(), v.as_slice()))
    }

    pub(crate) fn gradient_dot_slice(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        self.stiffness.matvec(u, &mut ku);
        ku.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Torsion function `G[1]`.
    pub fn torsion(&self) -> Result<GridField> {
        self.green_apply(&GridField::constant(self.len(), 1.0))
    }

    /// Writes a field as CSV with columns `x, y, value`.
    pub fn write_field_csv(&self, f: &GridField, path: &Path) -> Result<()> {
        self.check(f)?;
        let mut out = String::with_capacity(64 * self.len());
        out.push_str("x,y,value\n");
        for (p, v) in self.nodes.iter().zip(f.as_slice()) {
            let _ = writeln!(out, "{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(*v));
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_mass_and_nodes() {
        let m = build_mesh(DomainShape::unit_square(), 64).unwrap();
        assert_eq!(m.len(), 63 * 63);
        let one = GridField::constant(m.len(), 1.0);
        assert!((m.integrate(&one).unwrap() - 1.0).abs() <= 1e-2);
        assert!(m.mesh_mass_defect() < 1e-12);
        assert_eq!(m.integrate(&GridField::zeros(m.len())).unwrap(), 0.0);
    }

    #[test]
    fn disk_mass_and_radius() {
        let m = build_mesh(DomainShape::Disk, 64).unwrap();
        assert!((DomainShape::Disk.radius() - 0.564190).abs() < 1e-6);
        let one = GridField::constant(m.len(), 1.0);
        assert!((m.integrate(&one).unwrap() - 1.0).abs() <= 2e-2);
        for p in m.nodes() {
            assert!(DomainShape::Disk.contains(p[0], p[1]));
        }
    }

    #[test]
    fn rectangle_sides() {
        let s = DomainShape::Rectangle { aspect: 4.0 };
        let (a, b) = s.sides();
        assert!((a - 2.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let m = build_mesh(s, 32).unwrap();
        assert_eq!(m.grid_dims(), (128, 32));
        assert!((m.spacing().0 - m.spacing().1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_mesh(DomainShape::Rectangle { aspect: 0.0 }, 16),
            Err(Error::InvalidDomain(_))
        ));
        assert!(matches!(
            build_mesh(DomainShape::Rectangle { aspect: -1.0 }, 16),
            Err(Error::InvalidDomain(_))
        ));
        assert!(matches!(
            build_mesh(DomainShape::unit_square(), 7),
            Err(Error::ResolutionTooSmall { .. })
        ));
        assert!(GridField::new(vec![0.0, f64::NAN]).is_err());
        let m = build_mesh(DomainShape::unit_square(), 8).unwrap();
        assert!(matches!(m.integrate(&GridField::zeros(3)), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn stiffness_is_symmetric_m_matrix() {
        for shape in [DomainShape::unit_square(), DomainShape::Disk] {
            let m = build_mesh(shape, 24).unwrap();
            let k = m.stiffness();
            assert!(k.is_symmetric(1e-14));
            for i in 0..k.nrows {
                let mut off = 0.0;
                for (c, v) in k.row(i) {
                    if c == i {
                        assert!(v > 0.0);
                    } else {
                        assert!(v <= 0.0);
                        off += v.abs();
                    }
                }
                assert!(k.diag(i) >= off - 1e-12);
            }
        }
    }

    #[test]
    fn disk_torsion_profile() {
        let m = build_mesh(DomainShape::Disk, 64).unwrap();
        let psi = m.torsion().unwrap();
        let exact = 1.0 / (4.0 * PI);
        assert!((psi.max() - exact).abs() / exact < 3e-3, "max {}", psi.max());
        let torsion = m.integrate(&psi).unwrap();
        let e0 = 1.0 / (8.0 * PI);
        assert!((torsion - e0).abs() / e0 < 3e-3, "torsion {torsion}");
        let energy = m.gradient_dot(&psi, &psi).unwrap();
        assert!((energy - e0).abs() / e0 < 3e-3);
    }

    #[test]
    fn square_eigenfunction_is_scaled() {
        let m = build_mesh(DomainShape::unit_square(), 64).unwrap();
        let phi = m.field_from_fn(|x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
        let psi = m.green_apply(&phi).unwrap();
        let scale = 2.0 * PI * PI;
        let err = psi.as_slice().iter().zip(phi.as_slice()).fold(0.0f64, |e, (p, f)| {
            e.max((p - f / scale).abs())
        });
        assert!(err / (1.0 / scale) < 1e-3, "rel err {}", err * scale);
        let zero = m.green_apply(&GridField::zeros(m.len())).unwrap();
        assert_eq!(zero.inf_norm(), 0.0);
    }

    #[test]
    fn square_green_identity_is_exact() {
        let m = build_mesh(DomainShape::unit_square(), 32).unwrap();
        let psi = m.torsion().unwrap();
        let a = m.gradient_dot(&psi, &psi).unwrap();
        let b = m.integrate(&psi).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn iterative_path_matches_direct() {
        let direct = build_mesh(DomainShape::Disk, 40).unwrap();
        let psi_d = direct.torsion().unwrap();
        let mut iter = build_mesh(DomainShape::Disk, 40).unwrap();
        iter.solver = PoissonSolver::Iterative;
        let psi_i = iter.torsion().unwrap();
        assert!(psi_d.max_abs_diff(&psi_i) < 1e-10 * psi_d.inf_norm());
    }
}
