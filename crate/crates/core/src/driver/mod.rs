//! Configuration, the time loop, outputs, and the convergence harness.

pub mod config;
pub mod converge;
pub mod cut;
pub mod output;
pub mod reference;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{LadderConfig, MeshMode, RunConfig};
pub use converge::{converge, LadderRow};
pub use cut::{cut, CutLine};
pub use output::{Checkpoint, RunManifest};
pub use run::{run, simulate, NoObserver, Observer, RunOutcome, StepDiagnostics};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },
    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        source: Box<crate::Error>,
    },
    #[error("initial adaptation cycle {cycle}: {source}")]
    InitAdapt {
        cycle: usize,
        source: Box<crate::Error>,
    },
    #[error(transparent)]
    Setup(Box<crate::Error>),
    #[error("no checkpoint for step {0}")]
    NoCheckpoint(usize),
    #[error("line does not intersect the domain")]
    LineOutsideDomain,
}

impl From<crate::problems::ProblemError> for DriverError {
    fn from(e: crate::problems::ProblemError) -> Self {
        DriverError::Setup(Box::new(e.into()))
    }
}

impl From<crate::mesh::MeshError> for DriverError {
    fn from(e: crate::mesh::MeshError) -> Self {
        DriverError::Setup(Box::new(e.into()))
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DriverError + '_ {
    move |source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    }
}
