//! Shared domain types: memory sizes and ladders, function identities,
//! samples, profiles, call graphs, SLOs and the cost model.

mod cost;
mod graph;
mod profile;

pub use cost::{configuration_cost, pairwise_sum, CostError, CostModel};
pub use graph::{normalize_graph, CallGraph, GraphError, GraphNode};
pub use profile::{FunctionProfile, ProfileCell, Profiles};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Memory allocated to one function, in megabytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemorySize(u32);

impl MemorySize {
    pub fn new(megabytes: u32) -> Result<Self, ModelError> {
        if megabytes == 0 {
            return Err(ModelError::ZeroMemory);
        }
        Ok(Self(megabytes))
    }

    pub const fn megabytes(self) -> u32 {
        self.0
    }

    pub fn gigabytes(self) -> f64 {
        f64::from(self.0) / 1024.0
    }
}

impl fmt::Display for MemorySize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}MB", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("memory size must be positive")]
    ZeroMemory,
    #[error("memory ladder is empty")]
    EmptyLadder,
    #[error("memory ladder must be strictly increasing ({0} follows {1})")]
    UnorderedLadder(MemorySize, MemorySize),
    #[error("memory cap {0} leaves no rung on the ladder")]
    CapBelowLadder(MemorySize),
    #[error("function name must be non-empty")]
    EmptyFunctionName,
    #[error("percentile {0} outside (0, 100]")]
    InvalidPercentile(f64),
    #[error("SLO must be a positive number of seconds, got {0}")]
    InvalidSlo(f64),
    #[error("precision gamma must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("cost rate must be positive, got {0}")]
    InvalidCostRate(f64),
    #[error("billing granularity must be at least 1 ms")]
    InvalidGranularity,
}

/// The discrete set of memory sizes a function may be given.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLadder {
    values: Vec<MemorySize>,
    cap: Option<MemorySize>,
}

/// Provider ladder used when nothing else is configured.
pub const DEFAULT_LADDER_MB: [u32; 8] = [128, 256, 512, 1024, 2048, 4096, 8192, 10240];

/// Single-threaded functions stop benefiting from memory beyond this cap.
pub const DEFAULT_CAP_MB: u32 = 2048;

impl MemoryLadder {
    pub fn new(values: Vec<MemorySize>, cap: Option<MemorySize>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyLadder);
        }
        for pair in values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(ModelError::UnorderedLadder(pair[1], pair[0]));
            }
        }
        if let Some(cap) = cap {
            if values[0] > cap {
                return Err(ModelError::CapBelowLadder(cap));
            }
        }
        Ok(Self { values, cap })
    }

    pub fn from_megabytes(values: &[u32], cap: Option<u32>) -> Result<Self, ModelError> {
        let values = values
            .iter()
            .map(|&mb| MemorySize::new(mb))
            .collect::<Result<Vec<_>, _>>()?;
        let cap = cap.map(MemorySize::new).transpose()?;
        Self::new(values, cap)
    }

    /// The full eight-rung provider ladder, uncapped.
    pub fn full() -> Self {
        Self::from_megabytes(&DEFAULT_LADDER_MB, None).expect("static ladder is valid")
    }

    /// The provider ladder capped at 2 GB.
    pub fn capped_default() -> Self {
        Self::from_megabytes(&DEFAULT_LADDER_MB, Some(DEFAULT_CAP_MB)).expect("static ladder is valid")
    }

    pub fn cap(&self) -> Option<MemorySize> {
        self.cap
    }

    /// Rungs at or below the cap, ascending.
    pub fn rungs(&self) -> &[MemorySize] {
        match self.cap {
            None => &self.values,
            Some(cap) => {
                let end = self.values.partition_point(|m| *m <= cap);
                &self.values[..end]
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rungs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs().is_empty()
    }

    pub fn min(&self) -> MemorySize {
        self.rungs()[0]
    }

    pub fn max(&self) -> MemorySize {
        *self.rungs().last().expect("ladder is non-empty")
    }

    pub fn contains(&self, memory: MemorySize) -> bool {
        self.rungs().binary_search(&memory).is_ok()
    }

    pub fn index_of(&self, memory: MemorySize) -> Option<usize> {
        self.rungs().binary_search(&memory).ok()
    }
}

/// Name of a function, unique within one application.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FunctionId(String);

impl FunctionId {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ModelError::EmptyFunctionName);
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for FunctionId {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FunctionId> for String {
    fn from(value: FunctionId) -> Self {
        value.0
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One observed execution of a function at a given memory size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSample {
    pub function: FunctionId,
    pub memory: MemorySize,
    /// Seconds, never negative.
    pub duration: f64,
    pub cold_start: bool,
}

/// A percentile in (0, 100].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Percentile(f64);

impl Percentile {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if !(value > 0.0 && value <= 100.0) {
            return Err(ModelError::InvalidPercentile(value));
        }
        Ok(Self(value))
    }

    pub const fn value(self) -> f64 {
        self.0
    }

    /// The default candidate set for choice-percentile selection.
    pub fn default_candidates() -> Vec<Percentile> {
        [50.0, 75.0, 90.0, 99.0].into_iter().map(Percentile).collect()
    }
}

impl TryFrom<f64> for Percentile {
    type Error = ModelError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Percentile> for f64 {
    fn from(value: Percentile) -> Self {
        value.0
    }
}

impl fmt::Display for Percentile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Latency target for the whole application.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SloSpec {
    pub slo_seconds: f64,
    pub percentile: Percentile,
}

impl SloSpec {
    pub fn new(slo_seconds: f64) -> Result<Self, ModelError> {
        Self::with_percentile(slo_seconds, Percentile(95.0))
    }

    pub fn with_percentile(slo_seconds: f64, percentile: Percentile) -> Result<Self, ModelError> {
        if !(slo_seconds > 0.0) || slo_seconds.is_nan() {
            return Err(ModelError::InvalidSlo(slo_seconds));
        }
        Ok(Self { slo_seconds, percentile })
    }
}

pub const DEFAULT_GAMMA: f64 = 0.01;

/// What to optimize on top of meeting the SLO.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    Feasible,
    MinCost,
    MinTime { precision_gamma: f64 },
}

impl Objective {
    pub fn min_time(precision_gamma: f64) -> Result<Self, ModelError> {
        if !(precision_gamma > 0.0) {
            return Err(ModelError::InvalidGamma(precision_gamma));
        }
        Ok(Self::MinTime { precision_gamma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Feasible => "feasible",
            Objective::MinCost => "min-cost",
            Objective::MinTime { .. } => "min-time",
        }
    }
}

/// A memory size for every function of an application.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemoryConfiguration {
    assignment: BTreeMap<FunctionId, MemorySize>,
}

impl MemoryConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every function of `graph` at the same memory size.
    pub fn uniform(graph: &CallGraph, memory: MemorySize) -> Self {
        graph.functions().into_iter().map(|f| (f, memory)).collect()
    }

    pub fn get(&self, function: &FunctionId) -> Option<MemorySize> {
        self.assignment.get(function).copied()
    }

    pub fn set(&mut self, function: FunctionId, memory: MemorySize) {
        self.assignment.insert(function, memory);
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FunctionId, MemorySize)> {
        self.assignment.iter().map(|(f, m)| (f, *m))
    }

    /// True when the keys are exactly the functions of `graph` and every
    /// value lies on `ladder`.
    pub fn is_total_for(&self, graph: &CallGraph, ladder: &MemoryLadder) -> bool {
        let functions = graph.functions();
        functions.len() == self.assignment.len()
            && functions.iter().all(|f| self.get(f).is_some_and(|m| ladder.contains(m)))
    }
}

impl FromIterator<(FunctionId, MemorySize)> for MemoryConfiguration {
    fn from_iter<T: IntoIterator<Item = (FunctionId, MemorySize)>>(iter: T) -> Self {
        Self { assignment: iter.into_iter().collect() }
    }
}
