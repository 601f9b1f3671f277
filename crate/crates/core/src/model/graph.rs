use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FunctionId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("function {0} appears more than once in the call graph")]
    DuplicateFunction(FunctionId),
    #[error("sequence group has no children")]
    EmptyGroup,
    #[error("parallel group needs at least two children, found {0}")]
    ParallelArity(usize),
}

/// One node of a call graph: a single function, or a sequence / parallel
/// composition of sub-graphs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphNode {
    Function { name: FunctionId },
    Sequence { children: Vec<GraphNode> },
    Parallel { children: Vec<GraphNode> },
}

impl GraphNode {
    /// Convenience constructor; panics on an empty name.
    pub fn function(name: &str) -> Self {
        GraphNode::Function { name: FunctionId::new(name).expect("function name must be non-empty") }
    }

    pub fn sequence(children: Vec<GraphNode>) -> Self {
        GraphNode::Sequence { children }
    }

    pub fn parallel(children: Vec<GraphNode>) -> Self {
        GraphNode::Parallel { children }
    }

    /// First function reached in pre-order.
    pub fn leading_function(&self) -> &FunctionId {
        match self {
            GraphNode::Function { name } => name,
            GraphNode::Sequence { children } | GraphNode::Parallel { children } => children
                .first()
                .expect("normalized groups are non-empty")
                .leading_function(),
        }
    }

    pub fn visit_functions<'a>(&'a self, out: &mut Vec<&'a FunctionId>) {
        match self {
            GraphNode::Function { name } => out.push(name),
            GraphNode::Sequence { children } | GraphNode::Parallel { children } => {
                for child in children {
                    child.visit_functions(out);
                }
            }
        }
    }

    /// Depth of nesting, a bare function being 1.
    pub fn depth(&self) -> usize {
        match self {
            GraphNode::Function { .. } => 1,
            GraphNode::Sequence { children } | GraphNode::Parallel { children } => {
                1 + children.iter().map(GraphNode::depth).max().unwrap_or(0)
            }
        }
    }
}

/// A normalized application call graph.
///
/// Normal form: sequences of one collapse into their child, nested
/// sequences (and nested parallels) are flattened into their parent, and
/// parallel children are ordered by their leading function name. Every
/// function appears exactly once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphNode", into = "GraphNode")]
pub struct CallGraph {
    root: GraphNode,
}

impl CallGraph {
    pub fn new(root: GraphNode) -> Result<Self, GraphError> {
        normalize_node(root).and_then(|root| {
            check_unique(&root)?;
            Ok(Self { root })
        })
    }

    pub fn root(&self) -> &GraphNode {
        &self.root
    }

    /// All functions, in call-graph pre-order.
    pub fn functions_in_order(&self) -> Vec<&FunctionId> {
        let mut out = Vec::new();
        self.root.visit_functions(&mut out);
        out
    }

    /// All functions, sorted by name.
    pub fn functions(&self) -> Vec<FunctionId> {
        let mut out: Vec<FunctionId> = self.functions_in_order().into_iter().cloned().collect();
        out.sort();
        out
    }

    pub fn len(&self) -> usize {
        self.functions_in_order().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, function: &FunctionId) -> bool {
        self.functions_in_order().contains(&function)
    }

    /// The function that receives the external request: either the root
    /// itself or the head of a root sequence. `None` when the root is a
    /// parallel group or a sequence starting with one.
    pub fn entry_function(&self) -> Option<&FunctionId> {
        match &self.root {
            GraphNode::Function { name } => Some(name),
            GraphNode::Sequence { children } => match children.first() {
                Some(GraphNode::Function { name }) => Some(name),
                _ => None,
            },
            GraphNode::Parallel { .. } => None,
        }
    }
}

impl TryFrom<GraphNode> for CallGraph {
    type Error = GraphError;

    fn try_from(value: GraphNode) -> Result<Self, Self::Error> {
        CallGraph::new(value)
    }
}

impl From<CallGraph> for GraphNode {
    fn from(value: CallGraph) -> Self {
        value.root
    }
}

/// Bring a graph to normal form and verify function uniqueness.
pub fn normalize_graph(graph: CallGraph) -> Result<CallGraph, GraphError> {
    CallGraph::new(graph.root)
}

fn normalize_node(node: GraphNode) -> Result<GraphNode, GraphError> {
    match node {
        GraphNode::Function { .. } => Ok(node),
        GraphNode::Sequence { children } => {
            if children.is_empty() {
                return Err(GraphError::EmptyGroup);
            }
            let mut flat = Vec::with_capacity(children.len());
            for child in children {
                match normalize_node(child)? {
                    GraphNode::Sequence { children } => flat.extend(children),
                    other => flat.push(other),
                }
            }
            if flat.len() == 1 {
                Ok(flat.pop().expect("length checked"))
            } else {
                Ok(GraphNode::Sequence { children: flat })
            }
        }
        GraphNode::Parallel { children } => {
            if children.len() < 2 {
                return Err(GraphError::ParallelArity(children.len()));
            }
            let mut flat = Vec::with_capacity(children.len());
            for child in children {
                match normalize_node(child)? {
                    GraphNode::Parallel { children } => flat.extend(children),
                    other => flat.push(other),
                }
            }
            flat.sort_by(|a, b| a.leading_function().cmp(b.leading_function()));
            Ok(GraphNode::Parallel { children: flat })
        }
    }
}

fn check_unique(root: &GraphNode) -> Result<(), GraphError> {
    let mut all = Vec::new();
    root.visit_functions(&mut all);
    let mut seen = BTreeSet::new();
    for f in all {
        if !seen.insert(f) {
            return Err(GraphError::DuplicateFunction(f.clone()));
        }
    }
    Ok(())
}
