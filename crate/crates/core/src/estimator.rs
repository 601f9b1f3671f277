//! End-to-end latency and cost estimation over a call graph.
//!
//! A function contributes its representative duration at the assigned
//! memory; a sequence sums its children and a parallel group takes the
//! maximum of its children.

use thiserror::Error;

use crate::model::{
    configuration_cost, pairwise_sum, CallGraph, CostError, CostModel, FunctionId, GraphNode, MemoryConfiguration,
    MemoryLadder, MemorySize, Profiles,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no profile for function {0} at {1}")]
    MissingProfile(FunctionId, MemorySize),
    #[error("configuration does not assign memory to function {0}")]
    PartialConfiguration(FunctionId),
}

impl From<CostError> for EstimateError {
    fn from(value: CostError) -> Self {
        match value {
            CostError::MissingProfile(f, m) => EstimateError::MissingProfile(f, m),
        }
    }
}

pub fn estimate_time(graph: &CallGraph, config: &MemoryConfiguration, profiles: &Profiles) -> Result<f64, EstimateError> {
    node_time(graph.root(), config, profiles)
}

fn node_time(node: &GraphNode, config: &MemoryConfiguration, profiles: &Profiles) -> Result<f64, EstimateError> {
    match node {
        GraphNode::Function { name } => {
            let memory = config.get(name).ok_or_else(|| EstimateError::PartialConfiguration(name.clone()))?;
            profiles
                .get(name)
                .and_then(|p| p.representative(memory))
                .ok_or_else(|| EstimateError::MissingProfile(name.clone(), memory))
        }
        GraphNode::Sequence { children } => {
            let parts = children.iter().map(|c| node_time(c, config, profiles)).collect::<Result<Vec<f64>, _>>()?;
            Ok(pairwise_sum(&parts))
        }
        GraphNode::Parallel { children } => children
            .iter()
            .try_fold(f64::NEG_INFINITY, |acc: f64, child| Ok(acc.max(node_time(child, config, profiles)?))),
    }
}

/// Cost of one invocation. Structure plays no part: every function is
/// billed once at its assigned memory.
pub fn estimate_cost(
    graph: &CallGraph,
    config: &MemoryConfiguration,
    profiles: &Profiles,
    cost_model: &CostModel,
) -> Result<f64, EstimateError> {
    let functions = graph.functions();
    let restricted: MemoryConfiguration = functions
        .into_iter()
        .map(|f| match config.get(&f) {
            Some(m) => Ok((f, m)),
            None => Err(EstimateError::PartialConfiguration(f)),
        })
        .collect::<Result<_, _>>()?;
    Ok(configuration_cost(&restricted, profiles, cost_model)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Leaf(usize),
    Sequence,
    Parallel,
}

#[derive(Clone, Debug)]
struct Node {
    kind: Kind,
    children: Vec<usize>,
    /// Parent node and position among its children.
    parent: Option<(usize, usize)>,
}

/// Index-based estimator for search loops: function and rung lookups are
/// resolved once, configurations are rung-index vectors.
///
/// Functions are indexed in name order, so a rung vector doubles as the
/// lexicographic key used for deterministic tie-breaks.
#[derive(Clone, Debug)]
pub struct CompiledEstimator {
    functions: Vec<FunctionId>,
    rungs: Vec<MemorySize>,
    times: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
    /// Pre-order; node 0 is the root.
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
}

impl CompiledEstimator {
    pub fn new(
        graph: &CallGraph,
        profiles: &Profiles,
        ladder: &MemoryLadder,
        cost_model: &CostModel,
    ) -> Result<Self, EstimateError> {
        let functions = graph.functions();
        let rungs = ladder.rungs().to_vec();
        let mut times = Vec::with_capacity(functions.len());
        let mut costs = Vec::with_capacity(functions.len());
        for f in &functions {
            let profile = profiles.get(f);
            let row = rungs
                .iter()
                .map(|&m| {
                    profile
                        .and_then(|p| p.representative(m))
                        .ok_or_else(|| EstimateError::MissingProfile(f.clone(), m))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            costs.push(rungs.iter().zip(&row).map(|(&m, &t)| cost_model.invocation_cost(t, m)).collect());
            times.push(row);
        }
        let mut nodes = Vec::new();
        let mut leaf_of = vec![0; functions.len()];
        compile(graph.root(), None, &functions, &mut nodes, &mut leaf_of);
        Ok(Self { functions, rungs, times, costs, nodes, leaf_of })
    }

    pub fn functions(&self) -> &[FunctionId] {
        &self.functions
    }

    pub fn rungs(&self) -> &[MemorySize] {
        &self.rungs
    }

    pub fn function_count(&self) -> usize {
        self.functions.len()
    }

    pub fn rung_count(&self) -> usize {
        self.rungs.len()
    }

    /// Representative time of function `f` at rung `r`.
    pub fn function_time(&self, f: usize, r: usize) -> f64 {
        self.times[f][r]
    }

    pub fn time(&self, rungs: &[usize]) -> f64 {
        Evaluation::new(self, rungs).time()
    }

    pub fn cost(&self, rungs: &[usize]) -> f64 {
        let parts: Vec<f64> = rungs.iter().enumerate().map(|(f, &r)| self.costs[f][r]).collect();
        pairwise_sum(&parts)
    }

    pub fn to_configuration(&self, rungs: &[usize]) -> MemoryConfiguration {
        self.functions.iter().cloned().zip(rungs.iter().map(|&r| self.rungs[r])).collect()
    }

    pub fn to_rungs(&self, config: &MemoryConfiguration) -> Option<Vec<usize>> {
        self.functions
            .iter()
            .map(|f| config.get(f).and_then(|m| self.rungs.binary_search(&m).ok()))
            .collect()
    }
}

fn compile(
    node: &GraphNode,
    parent: Option<(usize, usize)>,
    functions: &[FunctionId],
    nodes: &mut Vec<Node>,
    leaf_of: &mut [usize],
) -> usize {
    let id = nodes.len();
    let (kind, children) = match node {
        GraphNode::Function { name } => {
            let f = functions.binary_search(name).expect("graph function is indexed");
            leaf_of[f] = id;
            (Kind::Leaf(f), &[][..])
        }
        GraphNode::Sequence { children } => (Kind::Sequence, children.as_slice()),
        GraphNode::Parallel { children } => (Kind::Parallel, children.as_slice()),
    };
    nodes.push(Node { kind, children: Vec::new(), parent });
    let ids: Vec<usize> =
        children.iter().enumerate().map(|(pos, c)| compile(c, Some((id, pos)), functions, nodes, leaf_of)).collect();
    nodes[id].children = ids;
    id
}

fn combine(kind: Kind, a: f64, b: f64) -> f64 {
    match kind {
        Kind::Parallel => a.max(b),
        _ => a + b,
    }
}

/// Segment tree over `values` split exactly like [`pairwise_sum`].
fn seg_build(tree: &mut [f64], kind: Kind, node: usize, lo: usize, hi: usize, values: &[f64]) {
    if hi - lo == 1 {
        tree[node] = values[lo];
        return;
    }
    let mid = lo + (hi - lo) / 2;
    seg_build(tree, kind, 2 * node + 1, lo, mid, values);
    seg_build(tree, kind, 2 * node + 2, mid, hi, values);
    tree[node] = combine(kind, tree[2 * node + 1], tree[2 * node + 2]);
}

fn seg_update(tree: &mut [f64], kind: Kind, node: usize, lo: usize, hi: usize, pos: usize, value: f64) {
    if hi - lo == 1 {
        tree[node] = value;
        return;
    }
    let mid = lo + (hi - lo) / 2;
    if pos < mid {
        seg_update(tree, kind, 2 * node + 1, lo, mid, pos, value);
    } else {
        seg_update(tree, kind, 2 * node + 2, mid, hi, pos, value);
    }
    tree[node] = combine(kind, tree[2 * node + 1], tree[2 * node + 2]);
}

/// A configuration under evaluation. Changing one function's rung updates
/// only the groups on its path to the root, and the result is identical
/// to evaluating the new configuration from scratch.
#[derive(Clone, Debug)]
pub struct Evaluation<'a> {
    estimator: &'a CompiledEstimator,
    rungs: Vec<usize>,
    trees: Vec<Vec<f64>>,
    cost_tree: Vec<f64>,
}

impl<'a> Evaluation<'a> {
    pub fn new(estimator: &'a CompiledEstimator, rungs: &[usize]) -> Self {
        let mut eval = Self { estimator, rungs: rungs.to_vec(), trees: vec![Vec::new(); estimator.nodes.len()], cost_tree: Vec::new() };
        for id in (0..estimator.nodes.len()).rev() {
            let node = &estimator.nodes[id];
            if node.children.is_empty() {
                continue;
            }
            let values: Vec<f64> = node.children.iter().map(|&c| eval.value(c)).collect();
            let mut tree = vec![0.0; 4 * values.len()];
            seg_build(&mut tree, node.kind, 0, 0, values.len(), &values);
            eval.trees[id] = tree;
        }
        let costs: Vec<f64> = rungs.iter().enumerate().map(|(f, &r)| estimator.costs[f][r]).collect();
        eval.cost_tree = vec![0.0; 4 * costs.len()];
        seg_build(&mut eval.cost_tree, Kind::Sequence, 0, 0, costs.len(), &costs);
        eval
    }

    fn value(&self, id: usize) -> f64 {
        match self.estimator.nodes[id].kind {
            Kind::Leaf(f) => self.estimator.times[f][self.rungs[f]],
            _ => self.trees[id][0],
        }
    }

    pub fn rungs(&self) -> &[usize] {
        &self.rungs
    }

    pub fn time(&self) -> f64 {
        self.value(0)
    }

    pub fn cost(&self) -> f64 {
        self.cost_tree[0]
    }

    /// Move function `f` to rung `r`.
    pub fn set(&mut self, f: usize, r: usize) {
        if self.rungs[f] == r {
            return;
        }
        self.rungs[f] = r;
        let n = self.rungs.len();
        seg_update(&mut self.cost_tree, Kind::Sequence, 0, 0, n, f, self.estimator.costs[f][r]);
        let mut id = self.estimator.leaf_of[f];
        while let Some((parent, pos)) = self.estimator.nodes[id].parent {
            let value = self.value(id);
            let node = &self.estimator.nodes[parent];
            seg_update(&mut self.trees[parent], node.kind, 0, 0, node.children.len(), pos, value);
            id = parent;
        }
    }
}
