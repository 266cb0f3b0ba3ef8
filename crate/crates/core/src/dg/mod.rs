//! Modal DG discretization of the discrete-ordinate system on a moving
//! mesh, with upwind fluxes, backward Euler in time and source iteration.

pub mod field;
pub mod ops;
pub mod reference;
pub mod solver;
pub mod sweep;

#[cfg(test)]
mod tests;

pub use field::{project, project_all, DGField};
pub use ops::{classify_edges, EdgeClassification, FaceClass, StepOperators};
pub use reference::ReferenceElement;
pub use solver::{advance_step, InitialGuess, SolverOptions, StepPlan, StepReport};
pub use sweep::{sweep_order, SweepKind, SweepOrder};

use thiserror::Error;

use crate::mesh::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("singular local system at element {element}, direction {direction}")]
    Singular { element: usize, direction: usize },
    #[error("non-finite local solution at element {element}, direction {direction}")]
    NonFinite { element: usize, direction: usize },
    #[error("source iteration hit the cap of {iterations} iterations (last delta {last_delta:e})")]
    IterationCap { iterations: usize, last_delta: f64 },
    #[error("source iteration diverging at iteration {iteration} (delta {delta:e})")]
    Diverged { iteration: usize, delta: f64 },
    #[error("no boundary data at {point:?} for direction {direction}")]
    MissingBoundary { point: Point, direction: usize },
    #[error("point {point:?} is outside element {element}")]
    PointOutsideElement { element: usize, point: Point },
    #[error("old field and new mesh have different connectivity")]
    ConnectivityMismatch,
}
