use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FunctionId, MemorySize, Percentile};

/// Per-memory summary of a function's observed latency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileCell {
    /// Value used by the estimator (after any monotone repair).
    pub representative: f64,
    /// Percentile value as measured, before repair.
    pub measured: f64,
    pub sample_count: usize,
}

/// Latency model of one function across the memory ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionProfile {
    pub function: FunctionId,
    pub alpha: Percentile,
    pub cells: BTreeMap<MemorySize, ProfileCell>,
    /// Raw durations per memory; empty when loaded from a profile table.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub samples: BTreeMap<MemorySize, Vec<f64>>,
}

impl FunctionProfile {
    pub fn representative(&self, memory: MemorySize) -> Option<f64> {
        self.cells.get(&memory).map(|c| c.representative)
    }

    pub fn memories(&self) -> impl Iterator<Item = MemorySize> + '_ {
        self.cells.keys().copied()
    }
}

/// Profiles for every function of an application.
pub type Profiles = BTreeMap<FunctionId, FunctionProfile>;
