//! Trace ingestion: newline-delimited segment records, call-graph
//! reconstruction and per-function execution samples.

mod builder;
mod samples;

pub use builder::build_call_graph;
pub use samples::{extract_samples, extract_trace_observations, TraceObservation};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CallGraph, GraphError, GraphNode};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace {0} has more than one root segment")]
    MultipleRoots(String),
    #[error("trace {0} has no root segment")]
    MissingRoot(String),
    #[error("segment {0} references a parent outside its trace")]
    OrphanSegment(String),
    #[error("trace {0} is rooted at a non-function segment")]
    RootNotFunction(String),
    #[error("trace {0} implies a different call topology than earlier traces")]
    InconsistentTopology(String),
    #[error("no function segments remain after filtering BaaS services")]
    EmptyAfterFiltering,
    #[error("segment {0} has no memory annotation")]
    MissingMemoryAnnotation(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Function,
    Baas,
}

/// One traced span: a function execution or a call to a backend service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSegment {
    pub trace_id: String,
    pub segment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub name: String,
    pub kind: SegmentKind,
    pub start_time: f64,
    pub end_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_mb: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cold_start: Option<bool>,
}

impl TraceSegment {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    /// Half-open interval overlap; touching endpoints do not overlap.
    pub fn overlaps(&self, other: &TraceSegment) -> bool {
        intervals_overlap((self.start_time, self.end_time), (other.start_time, other.end_time))
    }
}

pub(crate) fn intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Segments grouped by trace, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceLog {
    traces: IndexMap<String, Vec<TraceSegment>>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Group segments by trace id and check referential integrity.
    pub fn from_segments(segments: impl IntoIterator<Item = TraceSegment>) -> Result<Self, TraceError> {
        let mut log = Self::new();
        for segment in segments {
            log.traces.entry(segment.trace_id.clone()).or_default().push(segment);
        }
        log.validate()?;
        Ok(log)
    }

    pub fn trace_count(&self) -> usize {
        self.traces.len()
    }

    pub fn segment_count(&self) -> usize {
        self.traces.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn traces(&self) -> impl Iterator<Item = (&str, &[TraceSegment])> {
        self.traces.iter().map(|(id, segs)| (id.as_str(), segs.as_slice()))
    }

    pub fn trace(&self, trace_id: &str) -> Option<&[TraceSegment]> {
        self.traces.get(trace_id).map(Vec::as_slice)
    }

    /// Append all traces of `other`; trace ids must not collide.
    pub fn extend(&mut self, other: TraceLog) {
        for (id, segments) in other.traces {
            self.traces.entry(id).or_default().extend(segments);
        }
    }

    /// Root segment of a validated trace.
    pub fn root_of(segments: &[TraceSegment]) -> &TraceSegment {
        segments.iter().find(|s| s.parent_id.is_none()).expect("validated trace has a root")
    }

    fn validate(&self) -> Result<(), TraceError> {
        for (trace_id, segments) in &self.traces {
            let ids: BTreeSet<&str> = segments.iter().map(|s| s.segment_id.as_str()).collect();
            let mut roots = segments.iter().filter(|s| s.parent_id.is_none());
            let root = roots.next().ok_or_else(|| TraceError::MissingRoot(trace_id.clone()))?;
            if roots.next().is_some() {
                return Err(TraceError::MultipleRoots(trace_id.clone()));
            }
            let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for s in segments {
                if let Some(parent) = &s.parent_id {
                    if !ids.contains(parent.as_str()) {
                        return Err(TraceError::OrphanSegment(s.segment_id.clone()));
                    }
                    children.entry(parent.as_str()).or_default().push(&s.segment_id);
                }
            }
            // cycles detached from the root show up as unreachable segments
            let mut reached = BTreeSet::new();
            let mut stack = vec![root.segment_id.as_str()];
            while let Some(id) = stack.pop() {
                if reached.insert(id) {
                    stack.extend(children.get(id).into_iter().flatten());
                }
            }
            if let Some(s) = segments.iter().find(|s| !reached.contains(s.segment_id.as_str())) {
                return Err(TraceError::OrphanSegment(s.segment_id.clone()));
            }
        }
        Ok(())
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<(), TraceError> {
        for segment in self.traces.values().flatten() {
            let line = serde_json::to_string(segment).map_err(|e| TraceError::Schema(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

fn parse_segment(line_no: usize, line: &str) -> Result<TraceSegment, TraceError> {
    let segment: TraceSegment =
        serde_json::from_str(line).map_err(|e| TraceError::Parse { line: line_no, reason: e.to_string() })?;
    let bad = |reason: &str| TraceError::Parse { line: line_no, reason: reason.to_string() };
    if !segment.start_time.is_finite() || !segment.end_time.is_finite() {
        return Err(bad("timestamps must be finite"));
    }
    if segment.end_time < segment.start_time {
        return Err(bad("end_time precedes start_time"));
    }
    if segment.memory_mb == Some(0) {
        return Err(bad("memory_mb must be positive"));
    }
    if segment.segment_id.is_empty() || segment.trace_id.is_empty() || segment.name.is_empty() {
        return Err(bad("ids and name must be non-empty"));
    }
    Ok(segment)
}

/// Parse newline-delimited segment records. Blank lines are skipped.
pub fn parse_trace_reader(reader: impl Read) -> Result<TraceLog, TraceError> {
    let mut segments = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let segment = parse_segment(idx + 1, &line)?;
        if !seen.insert((segment.trace_id.clone(), segment.segment_id.clone())) {
            return Err(TraceError::Parse {
                line: idx + 1,
                reason: format!("duplicate segment id {}", segment.segment_id),
            });
        }
        segments.push(segment);
    }
    TraceLog::from_segments(segments)
}

pub fn parse_trace_str(text: &str) -> Result<TraceLog, TraceError> {
    parse_trace_reader(text.as_bytes())
}

pub fn parse_trace_file(path: impl AsRef<Path>) -> Result<TraceLog, TraceError> {
    parse_trace_reader(File::open(path)?)
}

/// Read a call graph written in the declarative `function | sequence |
/// parallel` schema and normalize it.
pub fn load_manual_graph(path: impl AsRef<Path>) -> Result<CallGraph, TraceError> {
    let text = std::fs::read_to_string(path)?;
    parse_manual_graph(&text)
}

pub fn parse_manual_graph(text: &str) -> Result<CallGraph, TraceError> {
    let node: GraphNode = serde_json::from_str(text).map_err(|e| TraceError::Schema(e.to_string()))?;
    Ok(CallGraph::new(node)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"{"trace_id":"t1","segment_id":"a","name":"f1","kind":"function","start_time":0.0,"end_time":3.0,"memory_mb":128}
{"trace_id":"t1","segment_id":"b","parent_id":"a","name":"f2","kind":"function","start_time":1.0,"end_time":2.0,"memory_mb":128}
{"trace_id":"t1","segment_id":"c","parent_id":"a","name":"f3","kind":"function","start_time":2.5,"end_time":3.0,"memory_mb":128}
"#;

    #[test]
    fn minimal_file() {
        let log = parse_trace_str(THREE).unwrap();
        assert_eq!(log.trace_count(), 1);
        assert_eq!(log.segment_count(), 3);
    }

    #[test]
    fn baas_segment_retained() {
        let text = format!(
            "{THREE}{}\n",
            r#"{"trace_id":"t1","segment_id":"d","parent_id":"b","name":"DynamoDB","kind":"baas","start_time":1.2,"end_time":1.8}"#
        );
        let log = parse_trace_str(&text).unwrap();
        let seg = log.trace("t1").unwrap().iter().find(|s| s.name == "DynamoDB").unwrap();
        assert_eq!(seg.kind, SegmentKind::Baas);
    }

    #[test]
    fn orphan_detected() {
        let text = THREE.replace(r#""parent_id":"a","name":"f3""#, r#""parent_id":"zz","name":"f3""#);
        assert!(matches!(parse_trace_str(&text), Err(TraceError::OrphanSegment(id)) if id == "c"));
    }

    #[test]
    fn multiple_roots_detected() {
        let text = THREE.replace(r#""parent_id":"a","name":"f3""#, r#""name":"f3""#);
        assert!(matches!(parse_trace_str(&text), Err(TraceError::MultipleRoots(id)) if id == "t1"));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = format!("{THREE}{{not json}}\n");
        assert!(matches!(parse_trace_str(&text), Err(TraceError::Parse { line: 4, .. })));
        let backwards = THREE.replace(r#""start_time":2.5,"end_time":3.0"#, r#""start_time":3.5,"end_time":3.0"#);
        assert!(matches!(parse_trace_str(&backwards), Err(TraceError::Parse { line: 3, .. })));
        let unknown = THREE.replace(r#""memory_mb":128}"#, r#""memory_mb":128,"extra":1}"#);
        assert!(matches!(parse_trace_str(&unknown), Err(TraceError::Parse { line: 1, .. })));
    }

    #[test]
    fn detached_cycle_is_orphaned() {
        let text = r#"{"trace_id":"t","segment_id":"r","name":"f1","kind":"function","start_time":0,"end_time":1}
{"trace_id":"t","segment_id":"x","parent_id":"y","name":"f2","kind":"function","start_time":0,"end_time":1}
{"trace_id":"t","segment_id":"y","parent_id":"x","name":"f3","kind":"function","start_time":0,"end_time":1}"#;
        assert!(matches!(parse_trace_str(text), Err(TraceError::OrphanSegment(_))));
    }

    #[test]
    fn manual_graph_errors() {
        assert!(matches!(parse_manual_graph("{\"kind\":\"loop\"}"), Err(TraceError::Schema(_))));
        let dup = r#"{"kind":"sequence","children":[{"kind":"function","name":"f1"},{"kind":"function","name":"f1"}]}"#;
        assert!(matches!(parse_manual_graph(dup), Err(TraceError::Graph(GraphError::DuplicateFunction(_)))));
        let single = parse_manual_graph(r#"{"kind":"function","name":"only"}"#).unwrap();
        assert_eq!(single.root(), &GraphNode::function("only"));
    }
}
