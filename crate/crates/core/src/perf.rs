//! Function performance models: per-(function, memory) latency
//! percentiles, choice-percentile selection and monotone repair.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{estimate_time, EstimateError};
use crate::exec::Execution;
use crate::model::{
    CallGraph, ExecutionSample, FunctionId, FunctionProfile, MemoryConfiguration, MemoryLadder, MemorySize,
    Percentile, ProfileCell, Profiles,
};
use crate::trace::TraceObservation;

/// Invocations per memory level used for profiling by default.
pub const DEFAULT_REQUESTS_PER_LEVEL: usize = 50;

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("no samples for function {0} at {1}")]
    MissingCell(FunctionId, MemorySize),
    #[error("need at least {needed} traces at {memory} to split for validation, found {found}")]
    InsufficientSamples { memory: MemorySize, needed: usize, found: usize },
    #[error("no candidate percentiles given")]
    NoCandidates,
    #[error("holdout fraction must lie in (0, 1), got {0}")]
    InvalidHoldout(f64),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("profile table: {0}")]
    Table(String),
}

/// Percentile of already sorted values, interpolating linearly between the
/// closest ranks.
pub fn percentile_of_sorted(sorted: &[f64], p: Percentile) -> Option<f64> {
    match sorted.len() {
        0 => None,
        1 => Some(sorted[0]),
        n => {
            let rank = p.value() / 100.0 * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = rank - lo as f64;
            Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
        }
    }
}

pub fn percentile(values: &[f64], p: Percentile) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_of_sorted(&sorted, p)
}

pub fn build_profiles(samples: &[ExecutionSample], ladder: &MemoryLadder, alpha: Percentile) -> Result<Profiles, PerfError> {
    build_profiles_with(samples, ladder, alpha, Execution::default())
}

/// Summarize samples into one profile per function. Every function seen
/// in `samples` must have at least one sample at every ladder rung;
/// samples at memories off the ladder are ignored.
pub fn build_profiles_with(
    samples: &[ExecutionSample],
    ladder: &MemoryLadder,
    alpha: Percentile,
    exec: Execution,
) -> Result<Profiles, PerfError> {
    let mut grouped: BTreeMap<&FunctionId, BTreeMap<MemorySize, Vec<f64>>> = BTreeMap::new();
    for s in samples {
        let cells = grouped.entry(&s.function).or_default();
        if ladder.contains(s.memory) {
            cells.entry(s.memory).or_default().push(s.duration);
        }
    }
    let grouped: Vec<(&FunctionId, BTreeMap<MemorySize, Vec<f64>>)> = grouped.into_iter().collect();
    let built = exec.map(&grouped, |(function, cells)| {
        let mut profile = FunctionProfile {
            function: (*function).clone(),
            alpha,
            cells: BTreeMap::new(),
            samples: BTreeMap::new(),
        };
        for &memory in ladder.rungs() {
            let mut durations = cells
                .get(&memory)
                .filter(|d| !d.is_empty())
                .cloned()
                .ok_or_else(|| PerfError::MissingCell((*function).clone(), memory))?;
            durations.sort_by(f64::total_cmp);
            let value = percentile_of_sorted(&durations, alpha).expect("cell is non-empty");
            profile
                .cells
                .insert(memory, ProfileCell { representative: value, measured: value, sample_count: durations.len() });
            profile.samples.insert(memory, durations);
        }
        Ok(profile)
    });
    built.into_iter().map(|p| p.map(|p| (p.function.clone(), p))).collect()
}

/// Replace representatives by their running minimum up the ladder, so more
/// memory never looks slower. Measured values are kept.
pub fn monotone_repair(profile: &FunctionProfile) -> FunctionProfile {
    let mut repaired = profile.clone();
    let mut best = f64::INFINITY;
    for cell in repaired.cells.values_mut() {
        best = best.min(cell.representative);
        cell.representative = best;
    }
    repaired
}

pub fn monotone_repair_all(profiles: &Profiles) -> Profiles {
    profiles.iter().map(|(f, p)| (f.clone(), monotone_repair(p))).collect()
}

/// Which end-to-end percentile a candidate's estimate is scored against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaTarget {
    /// Compare each candidate against the same percentile of observed
    /// latency.
    MatchCandidate,
    /// Compare every candidate against one fixed percentile, typically the
    /// SLO percentile.
    Fixed(Percentile),
}

#[derive(Clone, Debug)]
pub struct AlphaSelection {
    pub candidates: Vec<Percentile>,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub target: AlphaTarget,
}

impl Default for AlphaSelection {
    fn default() -> Self {
        Self {
            candidates: Percentile::default_candidates(),
            holdout_fraction: 0.3,
            seed: 0,
            target: AlphaTarget::Fixed(Percentile::new(95.0).expect("valid")),
        }
    }
}

/// Minimum traces per memory level for a fit/holdout split.
pub const MIN_TRACES_PER_LEVEL: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaScore {
    pub alpha: Percentile,
    pub mse: f64,
}

/// Choose the choice percentile whose composed estimate best predicts
/// held-out end-to-end latency across the profiled uniform configurations.
/// Ties go to the smaller percentile.
pub fn select_alpha(
    observations: &[TraceObservation],
    ladder: &MemoryLadder,
    graph: &CallGraph,
    selection: &AlphaSelection,
) -> Result<Percentile, PerfError> {
    let scores = score_alphas(observations, ladder, graph, selection)?;
    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.mse < best.mse {
            best = s;
        }
    }
    Ok(best.alpha)
}

/// Mean squared error per candidate, candidates in ascending order.
pub fn score_alphas(
    observations: &[TraceObservation],
    ladder: &MemoryLadder,
    graph: &CallGraph,
    selection: &AlphaSelection,
) -> Result<Vec<AlphaScore>, PerfError> {
    if selection.candidates.is_empty() {
        return Err(PerfError::NoCandidates);
    }
    if !(selection.holdout_fraction > 0.0 && selection.holdout_fraction < 1.0) {
        return Err(PerfError::InvalidHoldout(selection.holdout_fraction));
    }
    let mut by_level: BTreeMap<MemorySize, Vec<&TraceObservation>> = BTreeMap::new();
    for obs in observations {
        if let Some(m) = obs.uniform_memory.filter(|m| ladder.contains(*m)) {
            by_level.entry(m).or_default().push(obs);
        }
    }
    let mut fit: Vec<ExecutionSample> = Vec::new();
    let mut holdout: Vec<(MemorySize, Vec<f64>)> = Vec::new();
    for (level, &memory) in ladder.rungs().iter().enumerate() {
        let traces = by_level.get(&memory).map(Vec::as_slice).unwrap_or(&[]);
        if traces.len() < MIN_TRACES_PER_LEVEL {
            return Err(PerfError::InsufficientSamples { memory, needed: MIN_TRACES_PER_LEVEL, found: traces.len() });
        }
        let mut order: Vec<usize> = (0..traces.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(crate::sim::derive_seed(selection.seed, level as u64));
        order.shuffle(&mut rng);
        let n_hold = ((traces.len() as f64 * selection.holdout_fraction).round() as usize).clamp(1, traces.len() - 1);
        let (hold_idx, fit_idx) = order.split_at(n_hold);
        fit.extend(fit_idx.iter().flat_map(|&i| traces[i].samples.iter().cloned()));
        let mut e2e: Vec<f64> = hold_idx.iter().map(|&i| traces[i].end_to_end).collect();
        e2e.sort_by(f64::total_cmp);
        holdout.push((memory, e2e));
    }

    let mut candidates = selection.candidates.clone();
    candidates.sort_by(|a, b| a.value().total_cmp(&b.value()));
    candidates.dedup();
    candidates
        .into_iter()
        .map(|alpha| {
            let profiles = build_profiles_with(&fit, ladder, alpha, Execution::Sequential)?;
            let target = match selection.target {
                AlphaTarget::MatchCandidate => alpha,
                AlphaTarget::Fixed(p) => p,
            };
            let mut sq = 0.0;
            for (memory, e2e) in &holdout {
                let config = MemoryConfiguration::uniform(graph, *memory);
                let estimate = estimate_time(graph, &config, &profiles)?;
                let observed = percentile_of_sorted(e2e, target).expect("holdout is non-empty");
                sq += (estimate - observed).powi(2);
            }
            Ok(AlphaScore { alpha, mse: sq / holdout.len() as f64 })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    function: String,
    memory_mb: u32,
    alpha: f64,
    representative_s: f64,
    sample_count: usize,
}

/// Write profiles as CSV with columns
/// `function,memory_mb,alpha,representative_s,sample_count`.
pub fn write_profile_table(profiles: &Profiles, out: impl Write) -> Result<(), PerfError> {
    let mut writer = csv::Writer::from_writer(out);
    for profile in profiles.values() {
        for (memory, cell) in &profile.cells {
            writer
                .serialize(ProfileRow {
                    function: profile.function.to_string(),
                    memory_mb: memory.megabytes(),
                    alpha: profile.alpha.value(),
                    representative_s: cell.representative,
                    sample_count: cell.sample_count,
                })
                .map_err(|e| PerfError::Table(e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| PerfError::Table(e.to_string()))
}

pub fn read_profile_table(input: impl Read) -> Result<Profiles, PerfError> {
    let mut profiles = Profiles::new();
    let mut reader = csv::Reader::from_reader(input);
    for (i, row) in reader.deserialize::<ProfileRow>().enumerate() {
        let row = row.map_err(|e| PerfError::Table(e.to_string()))?;
        let bad = |e: crate::model::ModelError| PerfError::Table(format!("row {}: {e}", i + 1));
        let function = FunctionId::new(row.function).map_err(bad)?;
        let memory = MemorySize::new(row.memory_mb).map_err(bad)?;
        let alpha = Percentile::new(row.alpha).map_err(bad)?;
        if !(row.representative_s >= 0.0) {
            return Err(PerfError::Table(format!("row {}: negative duration", i + 1)));
        }
        let profile = profiles.entry(function.clone()).or_insert_with(|| FunctionProfile {
            function,
            alpha,
            cells: BTreeMap::new(),
            samples: BTreeMap::new(),
        });
        profile.cells.insert(
            memory,
            ProfileCell { representative: row.representative_s, measured: row.representative_s, sample_count: row.sample_count },
        );
    }
    Ok(profiles)
}

/// Ladder rungs covered by every profile.
pub fn common_ladder(profiles: &Profiles) -> Option<MemoryLadder> {
    let mut iter = profiles.values();
    let first: Vec<MemorySize> = iter.next()?.memories().collect();
    let shared: Vec<MemorySize> = first.into_iter().filter(|m| profiles.values().all(|p| p.cells.contains_key(m))).collect();
    MemoryLadder::new(shared, None).ok()
}
