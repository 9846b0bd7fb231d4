//! Numerical solver and verification toolkit for the constrained Lane–Emden
//! system of free-boundary type
//!
//! ```text
//! -Δψ₁ = (α₂ + λψ₂)₊^{p₂},   -Δψ₂ = (α₁ + λψ₁)₊^{p₁}   in Ω,   ψ = 0 on ∂Ω,
//! ∫(α₂ + λψ₂)₊^{p₂} = 1 = ∫(α₁ + λψ₁)₊^{p₁},
//! ```
//!
//! on unit-area planar domains.
//!
//! Modules:
//! - [`mesh`]: domains, quadrature, Laplacian and Green operator;
//! - [`solver`]: contraction scheme, bordered Newton, branch continuation;
//! - [`spectral`]: weighted linearized spectrum and Sobolev constants;
//! - [`variational`]: free-energy minimization oracle;
//! - [`diagnostics`]: branch observables and identity audits.

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod solver;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use mesh::{build_mesh, DomainMesh, DomainShape, GridField};
pub use solver::{ProblemParams, SolutionState, Tolerances};
