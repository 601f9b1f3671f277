//! Deterministic virtual-time FaaS simulator: synthetic applications,
//! a per-invocation latency model and a synchronous load generator that
//! emits trace logs.

mod app;
mod latency;
mod load;

pub use app::{generate_app, FunctionKind, Shape, SimApp, SimFunctionSpec};
pub use latency::{base_duration, derive_seed, sim_duration, SimRng, CPU_SATURATION_MB};
pub use load::{
    estimation_accuracy, profile_application, profile_application_with, run_load, run_load_with, validate_config,
    LatencySummary, ValidationReport, DEFAULT_VALIDATION_REQUESTS,
};

use thiserror::Error;

use crate::model::{FunctionId, GraphError};
use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("configuration has no memory for function {0}")]
    PartialConfiguration(FunctionId),
    #[error("no simulation spec for function {0}")]
    MissingSpec(FunctionId),
    #[error("function {0} is not part of the application graph")]
    UnknownFunction(FunctionId),
    #[error("invalid simulation parameters for function {0}")]
    InvalidSpec(FunctionId),
    #[error("application graph has no entry function")]
    NoEntryFunction,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("app file: {0}")]
    AppFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
