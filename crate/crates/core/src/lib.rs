//! Moving-mesh discontinuous Galerkin solver for the unsteady radiative
//! transfer equation with discrete ordinates in angle.
//!
//! The crate is organised bottom-up:
//!
//! * [`angular`]: discrete-ordinate directions and weights.
//! * [`mesh`]: simplicial meshes and linear-in-time vertex kinematics.
//! * [`dg`]: modal DG(P1/P2) discretization in ALE form, sweeps and
//!   source iteration.
//! * [`metric`]: Hessian-based metric tensors and their intersection.
//! * [`mmpde`]: the MMPDE mesh mover.
//! * [`problems`]: the built-in test problems.
//! * [`norms`]: error norms and convergence orders.
//! * [`driver`]: configuration, time loop, outputs and the convergence
//!   harness used by the `solve` binary.

pub mod angular;
pub mod dg;
pub mod driver;
pub mod linalg;
pub mod mesh;
pub mod metric;
pub mod mmpde;
pub mod norms;
pub mod problems;

pub use angular::{AngularQuadrature, Direction};
pub use dg::{DGField, SolverOptions};
pub use mesh::{Domain, MovingMesh, SimplicialMesh};
pub use problems::ProblemSpec;

use thiserror::Error;

/// Top-level error type; each module keeps its own error enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Quadrature(#[from] angular::QuadratureError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Solve(#[from] dg::SolveError),
    #[error(transparent)]
    Metric(#[from] metric::MetricError),
    #[error(transparent)]
    Mmpde(#[from] mmpde::MmpdeError),
    #[error(transparent)]
    Problem(#[from] problems::ProblemError),
    #[error(transparent)]
    Norm(#[from] norms::NormError),
    #[error(transparent)]
    Driver(#[from] driver::DriverError),
}
