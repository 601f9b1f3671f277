use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FunctionId, MemoryConfiguration, MemorySize, ModelError, Profiles};

/// Price per GB-second of execution, shipped at a provider-typical rate.
pub const DEFAULT_USD_PER_GB_SECOND: f64 = 1.6667e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub usd_per_gb_second: f64,
    pub billing_granularity_ms: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { usd_per_gb_second: DEFAULT_USD_PER_GB_SECOND, billing_granularity_ms: 1 }
    }
}

impl CostModel {
    pub fn new(usd_per_gb_second: f64, billing_granularity_ms: u32) -> Result<Self, ModelError> {
        if !(usd_per_gb_second > 0.0) || !usd_per_gb_second.is_finite() {
            return Err(ModelError::InvalidCostRate(usd_per_gb_second));
        }
        if billing_granularity_ms == 0 {
            return Err(ModelError::InvalidGranularity);
        }
        Ok(Self { usd_per_gb_second, billing_granularity_ms })
    }

    /// Duration rounded up to the billing granularity, in seconds.
    pub fn billed_seconds(&self, duration: f64) -> f64 {
        let granule = f64::from(self.billing_granularity_ms);
        // slack absorbs representation error such as 2.0000000000000004 s
        let granules = ((duration * 1000.0 / granule) - 1e-9).ceil().max(0.0);
        granules * granule / 1000.0
    }

    pub fn invocation_cost(&self, duration: f64, memory: MemorySize) -> f64 {
        self.billed_seconds(duration) * memory.gigabytes() * self.usd_per_gb_second
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("no profile for function {0} at {1}")]
    MissingProfile(FunctionId, MemorySize),
}

/// Sum in a fixed pairwise order: halves are summed recursively, the left
/// half taking the smaller share. Every estimate in the crate sums this
/// way, so incremental and from-scratch evaluation agree bit for bit.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Execution cost of one application invocation: each function's
/// representative duration, billed at its assigned memory.
pub fn configuration_cost(
    config: &MemoryConfiguration,
    profiles: &Profiles,
    cost_model: &CostModel,
) -> Result<f64, CostError> {
    let costs = config
        .iter()
        .map(|(function, memory)| {
            let duration = profiles
                .get(function)
                .and_then(|p| p.representative(memory))
                .ok_or_else(|| CostError::MissingProfile(function.clone(), memory))?;
            Ok(cost_model.invocation_cost(duration, memory))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(pairwise_sum(&costs))
}
