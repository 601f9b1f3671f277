use serde::{Deserialize, Serialize};

use super::latency::sim_duration;
use super::{SimApp, SimError, SimRng};
use crate::exec::Execution;
use crate::model::{FunctionId, GraphNode, MemoryConfiguration, MemoryLadder, MemorySize, Percentile, SloSpec};
use crate::perf::percentile_of_sorted;
use crate::trace::{SegmentKind, TraceLog, TraceSegment};

pub const DEFAULT_VALIDATION_REQUESTS: usize = 100;

/// Builds the segments of one request, starting at time zero.
struct Request<'a> {
    app: &'a SimApp,
    memory: Vec<(FunctionId, MemorySize)>,
    rng: SimRng,
    trace_id: String,
    segments: Vec<TraceSegment>,
}

impl<'a> Request<'a> {
    fn memory_of(&self, f: &FunctionId) -> MemorySize {
        self.memory[self.memory.binary_search_by(|(id, _)| id.cmp(f)).expect("configuration checked total")].1
    }

    fn next_id(&self) -> String {
        format!("{}-{}", self.trace_id, self.segments.len())
    }

    /// Invoke `f` at `start`: its own work first, then `calls` one step
    /// after another. Returns the end time.
    fn call(&mut self, f: &FunctionId, calls: &[GraphNode], start: f64, parent: Option<&str>) -> f64 {
        let memory = self.memory_of(f);
        let (own, cold) = sim_duration(self.app.spec(f), memory, &mut self.rng);
        let id = self.next_id();
        let index = self.segments.len();
        self.segments.push(TraceSegment {
            trace_id: self.trace_id.clone(),
            segment_id: id.clone(),
            parent_id: parent.map(str::to_string),
            name: f.to_string(),
            kind: SegmentKind::Function,
            start_time: start,
            end_time: start,
            memory_mb: Some(memory.megabytes()),
            cold_start: Some(cold),
        });
        let backends = self.app.baas_children(f);
        let slot = own / backends.len().max(1) as f64;
        for (i, name) in backends.iter().enumerate() {
            let b_start = start + slot * i as f64;
            self.segments.push(TraceSegment {
                trace_id: self.trace_id.clone(),
                segment_id: self.next_id(),
                parent_id: Some(id.clone()),
                name: name.clone(),
                kind: SegmentKind::Baas,
                start_time: b_start,
                end_time: b_start + slot,
                memory_mb: None,
                cold_start: None,
            });
        }
        let mut t = start + own;
        for step in calls {
            t = self.step(step, t, &id);
        }
        self.segments[index].end_time = t;
        t
    }

    /// Run one node under the calling function `parent`.
    fn step(&mut self, node: &GraphNode, start: f64, parent: &str) -> f64 {
        match node {
            GraphNode::Function { name } => self.call(name, &[], start, Some(parent)),
            GraphNode::Sequence { children } => match children.split_first() {
                Some((GraphNode::Function { name }, rest)) => self.call(name, rest, start, Some(parent)),
                _ => children.iter().fold(start, |t, c| self.step(c, t, parent)),
            },
            GraphNode::Parallel { children } => {
                children.iter().map(|c| self.step(c, start, parent)).fold(start, f64::max)
            }
        }
    }

    fn run(mut self) -> Vec<TraceSegment> {
        match self.app.graph().root() {
            GraphNode::Function { name } => {
                self.call(&name.clone(), &[], 0.0, None);
            }
            GraphNode::Sequence { children } => {
                let Some((GraphNode::Function { name }, rest)) = children.split_first() else {
                    unreachable!("apps are validated to have an entry function");
                };
                self.call(name, rest, 0.0, None);
            }
            GraphNode::Parallel { .. } => unreachable!("apps are validated to have an entry function"),
        }
        self.segments
    }
}

fn checked_memory(app: &SimApp, config: &MemoryConfiguration) -> Result<Vec<(FunctionId, MemorySize)>, SimError> {
    app.graph()
        .functions()
        .into_iter()
        .map(|f| config.get(&f).map(|m| (f.clone(), m)).ok_or(SimError::PartialConfiguration(f)))
        .collect()
}

/// Simulate each request on its own clock starting at zero.
fn simulate(
    app: &SimApp,
    config: &MemoryConfiguration,
    k_requests: usize,
    rng: &SimRng,
    prefix: &str,
    exec: Execution,
) -> Result<Vec<Vec<TraceSegment>>, SimError> {
    let memory = checked_memory(app, config)?;
    Ok(exec.map_range(k_requests, |i| {
        Request {
            app,
            memory: memory.clone(),
            rng: rng.fork(i as u64),
            trace_id: format!("{prefix}-{i}"),
            segments: Vec::new(),
        }
        .run()
    }))
}

fn load(
    app: &SimApp,
    config: &MemoryConfiguration,
    k_requests: usize,
    rng: &SimRng,
    prefix: &str,
    exec: Execution,
) -> Result<TraceLog, SimError> {
    let requests = simulate(app, config, k_requests, rng, prefix, exec)?;
    // requests are issued synchronously, each one after the previous ends
    let mut offset = 0.0;
    let mut segments = Vec::with_capacity(requests.iter().map(Vec::len).sum());
    for request in requests {
        let end = request[0].end_time;
        segments.extend(request.into_iter().map(|mut s| {
            s.start_time += offset;
            s.end_time += offset;
            s
        }));
        offset += end;
    }
    Ok(TraceLog::from_segments(segments)?)
}

/// Issue `k_requests` synchronous requests against `app` with the given
/// memory configuration and collect their traces.
pub fn run_load(app: &SimApp, config: &MemoryConfiguration, k_requests: usize, rng: &SimRng) -> Result<TraceLog, SimError> {
    run_load_with(app, config, k_requests, rng, Execution::default())
}

pub fn run_load_with(
    app: &SimApp,
    config: &MemoryConfiguration,
    k_requests: usize,
    rng: &SimRng,
    exec: Execution,
) -> Result<TraceLog, SimError> {
    load(app, config, k_requests, rng, "req", exec)
}

/// Run `k_per_level` requests at every ladder memory with every function
/// set to that memory. Traces of level `m` are named `m{m}-{i}`.
pub fn profile_application(
    app: &SimApp,
    ladder: &MemoryLadder,
    k_per_level: usize,
    rng: &SimRng,
) -> Result<TraceLog, SimError> {
    profile_application_with(app, ladder, k_per_level, rng, Execution::default())
}

pub fn profile_application_with(
    app: &SimApp,
    ladder: &MemoryLadder,
    k_per_level: usize,
    rng: &SimRng,
    exec: Execution,
) -> Result<TraceLog, SimError> {
    let levels = exec.map(ladder.rungs(), |&m| {
        let level_rng = rng.fork(u64::from(m.megabytes()));
        let config = MemoryConfiguration::uniform(app.graph(), m);
        load(app, &config, k_per_level, &level_rng, &format!("m{}", m.megabytes()), Execution::Sequential)
    });
    let mut log = TraceLog::new();
    for level in levels {
        log.extend(level?);
    }
    Ok(log)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub min: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl LatencySummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let p = |v: f64| percentile_of_sorted(&sorted, Percentile::new(v).expect("valid"));
        Some(Self { min: *sorted.first()?, median: p(50.0)?, p95: p(95.0)?, max: *sorted.last()? })
    }
}

/// Outcome of replaying a configuration against the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub slo_seconds: f64,
    pub requests: usize,
    /// Fraction of requests finishing within the SLO.
    pub conformance: f64,
    pub latency: Option<LatencySummary>,
}

/// Run `n_requests` requests and measure how many meet the SLO.
pub fn validate_config(
    app: &SimApp,
    config: &MemoryConfiguration,
    slo: &SloSpec,
    n_requests: usize,
    rng: &SimRng,
) -> Result<ValidationReport, SimError> {
    // each request on its own clock starting at zero
    let requests = simulate(app, config, n_requests, rng, "req", Execution::default())?;
    let latencies: Vec<f64> = requests.iter().map(|r| r[0].end_time).collect();
    let within = latencies.iter().filter(|&&d| d <= slo.slo_seconds).count();
    Ok(ValidationReport {
        slo_seconds: slo.slo_seconds,
        requests: n_requests,
        conformance: if n_requests == 0 { 1.0 } else { within as f64 / n_requests as f64 },
        latency: LatencySummary::of(&latencies),
    })
}

/// Accuracy in percent of an estimate against an observation: 100 minus
/// the squared percentage error.
pub fn estimation_accuracy(estimated: f64, observed: f64) -> f64 {
    let error = (observed - estimated) / observed;
    100.0 - 100.0 * error * error
}
