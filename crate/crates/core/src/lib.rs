//! Numerical laboratory for elliptic boundary value problems at the edge of
//! a crack. The crate builds conforming tetrahedral meshes of a ball minus a
//! slit, straightens curved cracks through an explicit shear diffeomorphism,
//! solves the resulting divergence-form problems with P1 finite elements,
//! computes Almgren frequency profiles and blow-up asymptotics against the
//! slit-sphere spectrum, and audits the integral inequalities the theory
//! rests on.

pub mod audit;
pub mod crack;
pub mod error;
pub mod fem;
pub mod frequency;
pub mod geo;
pub mod io;
pub mod potential;
pub mod profile;
pub mod quad;
pub mod sparse;
pub mod sphere;
pub mod straighten;
pub mod tetmesh;

pub use crack::{contains_crack, crack_local_data, CrackFamily, CrackSpec, Point};
pub use error::{Error, Result};
pub use fem::{assemble_solve, h1_distance, ScalarField};
pub use frequency::{
    blowup_convergence, blowup_field, doubling_check, estimate_limit, fourier_coefficient,
    frequency_profile, height_energy, upsilon_beta, vanishing_order, RadialProfile,
    SphericalBasis,
};
pub use potential::{PotentialSpec, TriPoly};
pub use sphere::{build_slit_sphere_mesh, oracle_eigenvalue, solve_eigenpairs, SphereMesh, SphericalEigenpair};
pub use straighten::{build_bundle, da_form, straighten_point, transform_potential, CoefficientBundle, MapDirection};
pub use tetmesh::{mesh_approx_domain, mesh_slit_ball, MeshParams, TetMesh};
