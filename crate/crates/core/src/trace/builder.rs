use std::collections::BTreeMap;

use super::samples::TraceIndex;
use super::{intervals_overlap, SegmentKind, TraceError, TraceLog};
use crate::model::{CallGraph, FunctionId, GraphError, GraphNode};

/// Function-level view of one trace.
struct TraceShape {
    root: String,
    parent: BTreeMap<String, Option<String>>,
    children: BTreeMap<String, Vec<String>>,
    interval: BTreeMap<String, (f64, f64)>,
}

fn shape_of(trace_id: &str, segments: &[super::TraceSegment]) -> Result<TraceShape, TraceError> {
    let index = TraceIndex::new(segments);
    let root = TraceLog::root_of(segments);
    if root.kind != SegmentKind::Function {
        return if segments.iter().any(|s| s.kind == SegmentKind::Function) {
            Err(TraceError::RootNotFunction(trace_id.to_string()))
        } else {
            Err(TraceError::EmptyAfterFiltering)
        };
    }
    let mut shape = TraceShape {
        root: root.name.clone(),
        parent: BTreeMap::new(),
        children: BTreeMap::new(),
        interval: BTreeMap::new(),
    };
    let mut stack = vec![(root, None::<String>)];
    while let Some((segment, parent)) = stack.pop() {
        if shape.parent.insert(segment.name.clone(), parent).is_some() {
            let id = FunctionId::new(segment.name.clone()).map_err(|e| TraceError::Schema(e.to_string()))?;
            return Err(GraphError::DuplicateFunction(id).into());
        }
        shape.interval.insert(segment.name.clone(), (segment.start_time, segment.end_time));
        let kids = index.function_children(segment);
        shape.children.insert(segment.name.clone(), kids.iter().map(|k| k.name.clone()).collect());
        for kid in kids {
            stack.push((kid, Some(segment.name.clone())));
        }
    }
    Ok(shape)
}

/// Reconstruct the application call graph from traces.
///
/// BaaS segments are dropped. A function's invoked children follow it in a
/// sequence; two siblings are grouped in parallel when their intervals
/// overlap in a strict majority of traces, otherwise they run in sequence
/// ordered by mean start offset. All traces must agree on who calls whom.
pub fn build_call_graph(log: &TraceLog) -> Result<CallGraph, TraceError> {
    let mut shapes = Vec::with_capacity(log.trace_count());
    for (trace_id, segments) in log.traces() {
        let shape = shape_of(trace_id, segments)?;
        if let Some(first) = shapes.first() {
            let first: &TraceShape = first;
            if first.root != shape.root || first.parent != shape.parent {
                return Err(TraceError::InconsistentTopology(trace_id.to_string()));
            }
        }
        shapes.push(shape);
    }
    let Some(reference) = shapes.first() else {
        return Err(TraceError::EmptyAfterFiltering);
    };
    let node = build_node(&reference.root, &shapes);
    Ok(CallGraph::new(node)?)
}

fn build_node(function: &str, shapes: &[TraceShape]) -> GraphNode {
    let name = FunctionId::new(function.to_string()).expect("segment names are non-empty");
    let reference = &shapes[0];
    let mut kids: Vec<String> = reference.children[function].clone();
    if kids.is_empty() {
        return GraphNode::Function { name };
    }
    kids.sort();

    let n = shapes.len() as f64;
    let offset: BTreeMap<&str, f64> = kids
        .iter()
        .map(|k| {
            let total: f64 = shapes.iter().map(|s| s.interval[k.as_str()].0 - s.interval[function].0).sum();
            (k.as_str(), total / n)
        })
        .collect();

    // union-find over majority-overlapping sibling pairs
    let mut group: Vec<usize> = (0..kids.len()).collect();
    fn find(group: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while group[r] != r {
            r = group[r];
        }
        group[i] = r;
        r
    }
    for i in 0..kids.len() {
        for j in (i + 1)..kids.len() {
            let overlapping = shapes
                .iter()
                .filter(|s| intervals_overlap(s.interval[kids[i].as_str()], s.interval[kids[j].as_str()]))
                .count();
            if overlapping * 2 > shapes.len() {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                group[a.max(b)] = a.min(b);
            }
        }
    }
    let mut components: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for i in 0..kids.len() {
        let root = find(&mut group, i);
        components.entry(root).or_default().push(kids[i].as_str());
    }
    let by_offset = |a: &&str, b: &&str| offset[a].total_cmp(&offset[b]).then_with(|| a.cmp(b));
    let mut steps: Vec<Vec<&str>> = components.into_values().collect();
    for members in &mut steps {
        members.sort_by(by_offset);
    }
    steps.sort_by(|a, b| by_offset(&a[0], &b[0]));

    let mut children = vec![GraphNode::Function { name }];
    for members in steps {
        if members.len() == 1 {
            children.push(build_node(members[0], shapes));
        } else {
            children.push(GraphNode::Parallel { children: members.iter().map(|m| build_node(m, shapes)).collect() });
        }
    }
    GraphNode::Sequence { children }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{parse_trace_str, TraceSegment};

    fn seg(trace: &str, id: &str, parent: Option<&str>, name: &str, kind: SegmentKind, s: f64, e: f64) -> TraceSegment {
        TraceSegment {
            trace_id: trace.into(),
            segment_id: id.into(),
            parent_id: parent.map(Into::into),
            name: name.into(),
            kind,
            start_time: s,
            end_time: e,
            memory_mb: Some(128),
            cold_start: None,
        }
    }

    fn f(name: &str) -> GraphNode {
        GraphNode::function(name)
    }

    #[test]
    fn disjoint_children_form_a_sequence() {
        let log = parse_trace_str(
            r#"{"trace_id":"t1","segment_id":"a","name":"f1","kind":"function","start_time":0.0,"end_time":3.0,"memory_mb":128}
{"trace_id":"t1","segment_id":"b","parent_id":"a","name":"f2","kind":"function","start_time":1.0,"end_time":2.0,"memory_mb":128}
{"trace_id":"t1","segment_id":"c","parent_id":"a","name":"f3","kind":"function","start_time":2.5,"end_time":3.0,"memory_mb":128}"#,
        )
        .unwrap();
        let g = build_call_graph(&log).unwrap();
        assert_eq!(g.root(), &GraphNode::sequence(vec![f("f1"), f("f2"), f("f3")]));
    }

    #[test]
    fn overlapping_children_form_a_parallel_group() {
        use SegmentKind::Function as F;
        let log = TraceLog::from_segments(vec![
            seg("t", "a", None, "f1", F, 0.0, 5.0),
            seg("t", "b", Some("a"), "f2", F, 1.0, 3.0),
            seg("t", "c", Some("a"), "f3", F, 2.0, 4.0),
        ])
        .unwrap();
        let g = build_call_graph(&log).unwrap();
        assert_eq!(g.root(), &GraphNode::sequence(vec![f("f1"), GraphNode::parallel(vec![f("f2"), f("f3")])]));
    }

    #[test]
    fn touching_intervals_are_sequential() {
        use SegmentKind::Function as F;
        let log = TraceLog::from_segments(vec![
            seg("t", "a", None, "f1", F, 0.0, 5.0),
            seg("t", "b", Some("a"), "f2", F, 1.0, 3.0),
            seg("t", "c", Some("a"), "f3", F, 3.0, 4.0),
        ])
        .unwrap();
        let g = build_call_graph(&log).unwrap();
        assert_eq!(g.root(), &GraphNode::sequence(vec![f("f1"), f("f2"), f("f3")]));
    }

    #[test]
    fn pet_store_chain_drops_baas() {
        use SegmentKind::{Baas as B, Function as F};
        let log = TraceLog::from_segments(vec![
            seg("t", "1", None, "pet-checkout", F, 0.0, 10.0),
            seg("t", "db1", Some("1"), "pets-table", B, 0.1, 0.4),
            seg("t", "2", Some("1"), "pet-currency", F, 1.0, 2.0),
            seg("t", "3", Some("1"), "pet-payment", F, 2.0, 4.0),
            seg("t", "4", Some("1"), "pet-shipping", F, 4.0, 6.0),
            seg("t", "db2", Some("4"), "shipping-table", B, 4.5, 5.5),
            seg("t", "5", Some("1"), "pet-email", F, 6.0, 9.0),
        ])
        .unwrap();
        let g = build_call_graph(&log).unwrap();
        let names: Vec<&str> = g.functions_in_order().iter().map(|f| f.as_str()).collect();
        assert_eq!(names, ["pet-checkout", "pet-currency", "pet-payment", "pet-shipping", "pet-email"]);
        assert!(matches!(g.root(), GraphNode::Sequence { children } if children.len() == 5));
    }

    #[test]
    fn majority_rule_and_ties() {
        use SegmentKind::Function as F;
        let trace = |t: &str, overlap: bool| {
            let c_start = if overlap { 1.5 } else { 2.0 };
            vec![
                seg(t, "a", None, "f1", F, 0.0, 5.0),
                seg(t, "b", Some("a"), "f2", F, 1.0, 2.0),
                seg(t, "c", Some("a"), "f3", F, c_start, 3.0),
            ]
        };
        let par = GraphNode::sequence(vec![f("f1"), GraphNode::parallel(vec![f("f2"), f("f3")])]);
        let seq = GraphNode::sequence(vec![f("f1"), f("f2"), f("f3")]);

        let two_of_three = [trace("t1", true), trace("t2", true), trace("t3", false)].concat();
        let g = build_call_graph(&TraceLog::from_segments(two_of_three).unwrap()).unwrap();
        assert_eq!(g.root(), &par);

        let tie = [trace("t1", true), trace("t2", false)].concat();
        let g = build_call_graph(&TraceLog::from_segments(tie).unwrap()).unwrap();
        assert_eq!(g.root(), &seq);
    }

    #[test]
    fn disagreeing_callers_are_inconsistent() {
        use SegmentKind::Function as F;
        let segs = vec![
            seg("t1", "a", None, "f1", F, 0.0, 5.0),
            seg("t1", "b", Some("a"), "f2", F, 1.0, 4.0),
            seg("t1", "c", Some("b"), "f3", F, 2.0, 3.0),
            seg("t2", "a", None, "f1", F, 0.0, 5.0),
            seg("t2", "b", Some("a"), "f2", F, 1.0, 2.0),
            seg("t2", "c", Some("a"), "f3", F, 2.0, 3.0),
        ];
        let log = TraceLog::from_segments(segs).unwrap();
        assert!(matches!(build_call_graph(&log), Err(TraceError::InconsistentTopology(t)) if t == "t2"));
    }

    #[test]
    fn only_baas_is_empty() {
        let log = TraceLog::from_segments(vec![seg("t", "a", None, "db", SegmentKind::Baas, 0.0, 1.0)]).unwrap();
        assert!(matches!(build_call_graph(&log), Err(TraceError::EmptyAfterFiltering)));
        assert!(matches!(build_call_graph(&TraceLog::new()), Err(TraceError::EmptyAfterFiltering)));
    }

    #[test]
    fn classification_ignores_record_order() {
        use SegmentKind::Function as F;
        let mut segs = vec![
            seg("t", "a", None, "f1", F, 0.0, 9.0),
            seg("t", "b", Some("a"), "f2", F, 1.0, 3.0),
            seg("t", "c", Some("a"), "f3", F, 2.0, 4.0),
            seg("t", "d", Some("a"), "f4", F, 5.0, 6.0),
            seg("t", "e", Some("d"), "f5", F, 5.2, 5.8),
        ];
        let forward = build_call_graph(&TraceLog::from_segments(segs.clone()).unwrap()).unwrap();
        segs.reverse();
        let backward = build_call_graph(&TraceLog::from_segments(segs).unwrap()).unwrap();
        assert_eq!(forward, backward);
    }
}
