//! Memory-configuration search: the heap-driven greedy search, its
//! min-cost and min-time variants, and the exhaustive baseline.

mod brute;
mod heap;
mod slam;

pub use brute::DEFAULT_BRUTE_FORCE_LIMIT;
pub use slam::PopRecord;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{CompiledEstimator, EstimateError};
use crate::model::{CallGraph, CostModel, MemoryConfiguration, MemoryLadder, Objective, Profiles, SloSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("search space of {size} configurations exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: String, limit: u64 },
    #[error("precision gamma must be positive, got {0}")]
    InvalidGamma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SlamSlo,
    SlamSloMinCost,
    SlamSloMinTime,
    BruteForce,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SlamSlo => "slam-slo",
            Algorithm::SlamSloMinCost => "slam-slo-min-cost",
            Algorithm::SlamSloMinTime => "slam-slo-min-time",
            Algorithm::BruteForce => "brute-force",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Algorithm::SlamSlo, Algorithm::SlamSloMinCost, Algorithm::SlamSloMinTime, Algorithm::BruteForce]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s}"))
    }
}

/// Outcome of one search. `config` is `None` when no SLO-feasible
/// configuration was found; time and cost are then absent as well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub algorithm: Algorithm,
    pub objective: Objective,
    pub slo_seconds: f64,
    pub config: Option<MemoryConfiguration>,
    pub estimated_time: Option<f64>,
    pub estimated_cost: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Wall-clock seconds spent searching.
    pub elapsed: f64,
}

impl SearchResult {
    pub fn is_feasible(&self) -> bool {
        self.config.is_some()
    }

    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &SearchResult) -> bool {
        let mut a = self.clone();
        a.elapsed = 0.0;
        let mut b = other.clone();
        b.elapsed = 0.0;
        a == b
    }
}

/// Raw search outcome in rung-index space.
#[derive(Clone, Debug, Default)]
pub(crate) struct Outcome {
    pub rungs: Option<Vec<usize>>,
    pub iterations: usize,
    pub evaluations: usize,
}

/// A search problem over one application: graph, profiles and ladder
/// resolved into a compiled estimator.
#[derive(Clone, Debug)]
pub struct Search {
    estimator: CompiledEstimator,
}

impl Search {
    pub fn new(
        graph: &CallGraph,
        profiles: &Profiles,
        ladder: &MemoryLadder,
        cost_model: &CostModel,
    ) -> Result<Self, SearchError> {
        Ok(Self { estimator: CompiledEstimator::new(graph, profiles, ladder, cost_model)? })
    }

    pub fn estimator(&self) -> &CompiledEstimator {
        &self.estimator
    }

    /// True when no function gets slower with more memory.
    pub fn is_monotone(&self) -> bool {
        let e = &self.estimator;
        (0..e.function_count()).all(|f| (1..e.rung_count()).all(|r| e.function_time(f, r) <= e.function_time(f, r - 1)))
    }

    pub fn slam_slo(&self, slo: &SloSpec) -> SearchResult {
        self.timed(Algorithm::SlamSlo, Objective::Feasible, slo, || self.run_slam(slo.slo_seconds, None))
    }

    /// Like [`Search::slam_slo`], recording every heap pop.
    pub fn slam_slo_traced(&self, slo: &SloSpec, pops: &mut Vec<PopRecord>) -> SearchResult {
        self.timed(Algorithm::SlamSlo, Objective::Feasible, slo, || self.run_slam(slo.slo_seconds, Some(pops)))
    }

    pub fn slam_slo_min_cost(&self, slo: &SloSpec) -> SearchResult {
        self.timed(Algorithm::SlamSloMinCost, Objective::MinCost, slo, || self.run_min_cost(slo.slo_seconds))
    }

    pub fn slam_slo_min_time(&self, slo: &SloSpec, gamma: f64) -> Result<SearchResult, SearchError> {
        if !(gamma > 0.0) {
            return Err(SearchError::InvalidGamma(gamma));
        }
        let objective = Objective::MinTime { precision_gamma: gamma };
        Ok(self.timed(Algorithm::SlamSloMinTime, objective, slo, || self.run_min_time(slo.slo_seconds, gamma)))
    }

    pub fn brute_force(&self, slo: &SloSpec, objective: Objective, limit: Option<u64>) -> Result<SearchResult, SearchError> {
        let start = Instant::now();
        let outcome = self.run_brute_force(slo.slo_seconds, objective, limit)?;
        Ok(self.finish(Algorithm::BruteForce, objective, slo, outcome, start))
    }

    /// Run the search named by `objective`.
    pub fn optimize(&self, slo: &SloSpec, objective: Objective) -> Result<SearchResult, SearchError> {
        match objective {
            Objective::Feasible => Ok(self.slam_slo(slo)),
            Objective::MinCost => Ok(self.slam_slo_min_cost(slo)),
            Objective::MinTime { precision_gamma } => self.slam_slo_min_time(slo, precision_gamma),
        }
    }

    fn timed(&self, algorithm: Algorithm, objective: Objective, slo: &SloSpec, run: impl FnOnce() -> Outcome) -> SearchResult {
        let start = Instant::now();
        let outcome = run();
        self.finish(algorithm, objective, slo, outcome, start)
    }

    fn finish(&self, algorithm: Algorithm, objective: Objective, slo: &SloSpec, outcome: Outcome, start: Instant) -> SearchResult {
        let elapsed = start.elapsed().as_secs_f64();
        let e = &self.estimator;
        let (config, time, cost) = match &outcome.rungs {
            Some(r) => (Some(e.to_configuration(r)), Some(e.time(r)), Some(e.cost(r))),
            None => (None, None, None),
        };
        SearchResult {
            algorithm,
            objective,
            slo_seconds: slo.slo_seconds,
            config,
            estimated_time: time,
            estimated_cost: cost,
            iterations: outcome.iterations,
            evaluations: outcome.evaluations,
            elapsed,
        }
    }
}

/// Greedy SLO search with the default cost model.
pub fn slam_slo(graph: &CallGraph, profiles: &Profiles, ladder: &MemoryLadder, slo: &SloSpec) -> Result<SearchResult, SearchError> {
    Ok(Search::new(graph, profiles, ladder, &CostModel::default())?.slam_slo(slo))
}

pub fn slam_slo_min_cost(
    graph: &CallGraph,
    profiles: &Profiles,
    ladder: &MemoryLadder,
    slo: &SloSpec,
    cost_model: &CostModel,
) -> Result<SearchResult, SearchError> {
    Ok(Search::new(graph, profiles, ladder, cost_model)?.slam_slo_min_cost(slo))
}

pub fn slam_slo_min_time(
    graph: &CallGraph,
    profiles: &Profiles,
    ladder: &MemoryLadder,
    slo: &SloSpec,
    gamma: f64,
) -> Result<SearchResult, SearchError> {
    Search::new(graph, profiles, ladder, &CostModel::default())?.slam_slo_min_time(slo, gamma)
}

pub fn brute_force(
    graph: &CallGraph,
    profiles: &Profiles,
    ladder: &MemoryLadder,
    slo: &SloSpec,
    objective: Objective,
    cost_model: &CostModel,
) -> Result<SearchResult, SearchError> {
    Search::new(graph, profiles, ladder, cost_model)?.brute_force(slo, objective, Some(DEFAULT_BRUTE_FORCE_LIMIT))
}
