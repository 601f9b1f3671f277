use std::collections::BTreeMap;

use super::{SegmentKind, TraceError, TraceLog, TraceSegment};
use crate::model::{ExecutionSample, FunctionId, MemorySize};

/// Segment index for one trace: children by parent id.
pub(crate) struct TraceIndex<'a> {
    pub segments: &'a [TraceSegment],
    children: BTreeMap<&'a str, Vec<usize>>,
}

impl<'a> TraceIndex<'a> {
    pub fn new(segments: &'a [TraceSegment]) -> Self {
        let mut children: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in segments.iter().enumerate() {
            if let Some(p) = &s.parent_id {
                children.entry(p.as_str()).or_default().push(i);
            }
        }
        Self { segments, children }
    }

    /// Function segments invoked by `segment`, looking through any
    /// intermediate BaaS segments.
    pub fn function_children(&self, segment: &TraceSegment) -> Vec<&'a TraceSegment> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.children.get(segment.segment_id.as_str()).cloned().unwrap_or_default();
        while let Some(i) = stack.pop() {
            let child = &self.segments[i];
            match child.kind {
                SegmentKind::Function => out.push(child),
                SegmentKind::Baas => {
                    stack.extend(self.children.get(child.segment_id.as_str()).into_iter().flatten());
                }
            }
        }
        out.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then_with(|| a.name.cmp(&b.name)));
        out
    }

    /// Time spent in the function itself: its span minus the time covered
    /// by the functions it invoked and waited on.
    pub fn self_duration(&self, segment: &TraceSegment) -> f64 {
        let mut spans: Vec<(f64, f64)> = self
            .function_children(segment)
            .iter()
            .map(|c| (c.start_time.max(segment.start_time), c.end_time.min(segment.end_time)))
            .filter(|(s, e)| e > s)
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut current: Option<(f64, f64)> = None;
        for (s, e) in spans {
            match current {
                Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
                Some((cs, ce)) => {
                    covered += ce - cs;
                    current = Some((s, e));
                }
                None => current = Some((s, e)),
            }
        }
        if let Some((cs, ce)) = current {
            covered += ce - cs;
        }
        (segment.duration() - covered).max(0.0)
    }
}

fn sample_for(index: &TraceIndex<'_>, segment: &TraceSegment) -> Result<ExecutionSample, TraceError> {
    let memory = segment
        .memory_mb
        .and_then(|mb| MemorySize::new(mb).ok())
        .ok_or_else(|| TraceError::MissingMemoryAnnotation(segment.segment_id.clone()))?;
    let function = FunctionId::new(segment.name.clone()).map_err(|e| TraceError::Schema(e.to_string()))?;
    Ok(ExecutionSample {
        function,
        memory,
        duration: index.self_duration(segment),
        cold_start: segment.cold_start.unwrap_or(false),
    })
}

/// One execution sample per function segment. BaaS segments produce none;
/// a caller's waiting time on the functions it invoked is excluded.
pub fn extract_samples(log: &TraceLog) -> Result<Vec<ExecutionSample>, TraceError> {
    let mut out = Vec::with_capacity(log.segment_count());
    for (_, segments) in log.traces() {
        let index = TraceIndex::new(segments);
        for segment in segments.iter().filter(|s| s.kind == SegmentKind::Function) {
            out.push(sample_for(&index, segment)?);
        }
    }
    Ok(out)
}

/// Per-trace view used for model validation: the samples of one request
/// plus its observed end-to-end latency.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceObservation {
    pub trace_id: String,
    /// Memory shared by every function in the trace, if uniform.
    pub uniform_memory: Option<MemorySize>,
    pub end_to_end: f64,
    pub samples: Vec<ExecutionSample>,
}

pub fn extract_trace_observations(log: &TraceLog) -> Result<Vec<TraceObservation>, TraceError> {
    let mut out = Vec::with_capacity(log.trace_count());
    for (trace_id, segments) in log.traces() {
        let index = TraceIndex::new(segments);
        let samples = segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Function)
            .map(|s| sample_for(&index, s))
            .collect::<Result<Vec<_>, _>>()?;
        let uniform_memory = match samples.first() {
            Some(first) if samples.iter().all(|s| s.memory == first.memory) => Some(first.memory),
            _ => None,
        };
        let root = TraceLog::root_of(segments);
        out.push(TraceObservation {
            trace_id: trace_id.to_string(),
            uniform_memory,
            end_to_end: root.duration(),
            samples,
        });
    }
    Ok(out)
}
