//! SLO-aware memory configuration for multi-function serverless
//! applications.
//!
//! The pipeline: ingest traces ([`trace`]), build per-function latency
//! profiles ([`perf`]), estimate end-to-end latency and cost
//! ([`estimator`]) and search memory configurations that meet a latency
//! objective ([`search`]). [`sim`] provides a virtual-time platform that
//! produces traces for all of the above.

pub mod estimator;
pub mod exec;
pub mod model;
pub mod perf;
pub mod pipeline;
pub mod report;
pub mod search;
pub mod sim;
pub mod trace;

pub use estimator::{estimate_cost, estimate_time, CompiledEstimator, EstimateError, Evaluation};
pub use exec::Execution;
pub use model::*;
pub use search::{Algorithm, Search, SearchError, SearchResult};
