//! Profiling pass over a simulated application: run the uniform-memory
//! load, pick the choice percentile and build repaired profiles.

use thiserror::Error;

use crate::model::{MemoryLadder, Percentile, Profiles};
use crate::perf::{build_profiles, monotone_repair_all, score_alphas, AlphaScore, AlphaSelection, PerfError};
use crate::sim::{profile_application, SimApp, SimError, SimRng};
use crate::trace::{extract_trace_observations, TraceError, TraceLog};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Perf(#[from] PerfError),
}

#[derive(Clone, Debug)]
pub struct ProfiledApp {
    pub log: TraceLog,
    pub alpha: Percentile,
    pub scores: Vec<AlphaScore>,
    /// Built from all profiling samples at `alpha`, monotone-repaired.
    pub profiles: Profiles,
}

pub fn profile_app(
    app: &SimApp,
    ladder: &MemoryLadder,
    k_per_level: usize,
    rng: &SimRng,
    selection: &AlphaSelection,
) -> Result<ProfiledApp, PipelineError> {
    let log = profile_application(app, ladder, k_per_level, rng)?;
    profile_log(log, app, ladder, selection)
}

/// Same as [`profile_app`] for an already collected profiling log.
pub fn profile_log(
    log: TraceLog,
    app: &SimApp,
    ladder: &MemoryLadder,
    selection: &AlphaSelection,
) -> Result<ProfiledApp, PipelineError> {
    let observations = extract_trace_observations(&log)?;
    let scores = score_alphas(&observations, ladder, app.graph(), selection)?;
    let alpha = scores.iter().fold(&scores[0], |best, s| if s.mse < best.mse { s } else { best }).alpha;
    let samples: Vec<_> = observations.into_iter().flat_map(|o| o.samples).collect();
    let profiles = monotone_repair_all(&build_profiles(&samples, ladder, alpha)?);
    Ok(ProfiledApp { log, alpha, scores, profiles })
}
