use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{CallGraph, FunctionId, GraphNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    /// CPU-bound; speeds up with memory until CPU saturation.
    Compute,
    /// Dominated by a backend call; memory makes no difference.
    BaasBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimFunctionSpec {
    pub function: FunctionId,
    /// Compute demand in MB-seconds (duration at 1 MB of CPU share).
    pub work: f64,
    pub kind: FunctionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baas_latency_s: Option<f64>,
    pub cold_start_s: f64,
    pub cold_start_prob: f64,
    pub jitter_cv: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Chain,
    Paper3,
    Paper6,
    Paper10,
    Petstore,
    Random,
    /// Loaded from a hand-written graph.
    Custom,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Chain => "chain",
            Shape::Paper3 => "paper3",
            Shape::Paper6 => "paper6",
            Shape::Paper10 => "paper10",
            Shape::Petstore => "petstore",
            Shape::Random => "random",
            Shape::Custom => "custom",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Shape::Chain, Shape::Paper3, Shape::Paper6, Shape::Paper10, Shape::Petstore, Shape::Random]
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| SimError::InvalidShape(s.to_string()))
    }
}

/// A simulated application: call graph, per-function latency parameters
/// and the backend services each function calls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimAppFile", into = "SimAppFile")]
pub struct SimApp {
    name: String,
    shape: Shape,
    seed: u64,
    graph: CallGraph,
    specs: BTreeMap<FunctionId, SimFunctionSpec>,
    baas_children: BTreeMap<FunctionId, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimAppFile {
    name: String,
    shape: Shape,
    seed: u64,
    graph: CallGraph,
    functions: Vec<SimFunctionSpec>,
    #[serde(default)]
    baas_children: BTreeMap<FunctionId, Vec<String>>,
}

impl TryFrom<SimAppFile> for SimApp {
    type Error = SimError;

    fn try_from(file: SimAppFile) -> Result<Self, Self::Error> {
        let specs = file.functions.into_iter().map(|s| (s.function.clone(), s)).collect();
        SimApp::new(file.name, file.shape, file.seed, file.graph, specs, file.baas_children)
    }
}

impl From<SimApp> for SimAppFile {
    fn from(app: SimApp) -> Self {
        SimAppFile {
            name: app.name,
            shape: app.shape,
            seed: app.seed,
            graph: app.graph,
            functions: app.specs.into_values().collect(),
            baas_children: app.baas_children,
        }
    }
}

impl SimApp {
    pub fn new(
        name: String,
        shape: Shape,
        seed: u64,
        graph: CallGraph,
        specs: BTreeMap<FunctionId, SimFunctionSpec>,
        baas_children: BTreeMap<FunctionId, Vec<String>>,
    ) -> Result<Self, SimError> {
        if graph.entry_function().is_none() {
            return Err(SimError::NoEntryFunction);
        }
        let functions = graph.functions();
        if let Some(missing) = functions.iter().find(|f| !specs.contains_key(*f)) {
            return Err(SimError::MissingSpec(missing.clone()));
        }
        if let Some(extra) = specs.keys().find(|f| !graph.contains(f)) {
            return Err(SimError::UnknownFunction(extra.clone()));
        }
        if let Some(extra) = baas_children.keys().find(|f| !graph.contains(f)) {
            return Err(SimError::UnknownFunction(extra.clone()));
        }
        for spec in specs.values() {
            let bad_baas = spec.kind == FunctionKind::BaasBound && !spec.baas_latency_s.is_some_and(|l| l > 0.0);
            if bad_baas
                || !(spec.work > 0.0)
                || !(spec.cold_start_s >= 0.0)
                || !(0.0..=1.0).contains(&spec.cold_start_prob)
                || !(spec.jitter_cv >= 0.0)
            {
                return Err(SimError::InvalidSpec(spec.function.clone()));
            }
        }
        Ok(Self { name, shape, seed, graph, specs, baas_children })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn graph(&self) -> &CallGraph {
        &self.graph
    }

    pub fn spec(&self, function: &FunctionId) -> &SimFunctionSpec {
        &self.specs[function]
    }

    pub fn specs(&self) -> impl Iterator<Item = &SimFunctionSpec> {
        self.specs.values()
    }

    pub fn baas_children(&self, function: &FunctionId) -> &[String] {
        self.baas_children.get(function).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn baas_count(&self) -> usize {
        self.baas_children.values().map(Vec::len).sum()
    }

    /// Copy with every function's noise removed.
    pub fn without_noise(&self) -> SimApp {
        let mut app = self.clone();
        for spec in app.specs.values_mut() {
            spec.jitter_cv = 0.0;
            spec.cold_start_prob = 0.0;
        }
        app
    }

    /// Copy with the given jitter applied to every function.
    pub fn with_jitter(&self, jitter_cv: f64) -> SimApp {
        let mut app = self.clone();
        for spec in app.specs.values_mut() {
            spec.jitter_cv = jitter_cv;
        }
        app
    }

    /// Copy with the given cold-start probability on every function.
    pub fn with_cold_start_prob(&self, prob: f64) -> SimApp {
        let mut app = self.clone();
        for spec in app.specs.values_mut() {
            spec.cold_start_prob = prob;
        }
        app
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SimError::AppFile(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimApp, SimError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SimError::AppFile(e.to_string()))
    }

    /// Wrap a hand-written graph with seeded compute specs.
    pub fn from_graph(graph: CallGraph, seed: u64) -> Result<SimApp, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = graph.functions_in_order().into_iter().map(|f| (f.clone(), compute_spec(f.clone(), &mut rng))).collect();
        SimApp::new("custom".into(), Shape::Custom, seed, graph, specs, BTreeMap::new())
    }
}

fn f(name: &str) -> GraphNode {
    GraphNode::function(name)
}

fn seq(children: Vec<GraphNode>) -> GraphNode {
    GraphNode::sequence(children)
}

fn par(children: Vec<GraphNode>) -> GraphNode {
    GraphNode::parallel(children)
}

/// Compute-bound function: 0.75-3 s at 128 MB, with mild jitter and rare
/// cold starts.
fn compute_spec(function: FunctionId, rng: &mut ChaCha8Rng) -> SimFunctionSpec {
    SimFunctionSpec {
        function,
        work: rng.random_range(96.0..384.0),
        kind: FunctionKind::Compute,
        baas_latency_s: None,
        cold_start_s: rng.random_range(0.05..0.15),
        cold_start_prob: 0.02,
        jitter_cv: 0.08,
    }
}

/// Build a random call tree of `budget` functions headed by one caller.
/// Each step after the head is either a single callee subtree or a
/// parallel fan-out of callee subtrees.
fn random_call(next: &mut usize, budget: usize, rng: &mut ChaCha8Rng) -> GraphNode {
    *next += 1;
    let head = f(&format!("f{next}"));
    let mut rest = budget - 1;
    if rest == 0 {
        return head;
    }
    let mut children = vec![head];
    while rest > 0 {
        if rest >= 2 && rng.random_bool(0.4) {
            let width = rng.random_range(2..=rest.min(4));
            let total = rng.random_range(width..=rest.min(width * 3));
            let mut sizes = vec![1usize; width];
            for _ in width..total {
                sizes[rng.random_range(0..width)] += 1;
            }
            children.push(par(sizes.into_iter().map(|s| random_call(next, s, rng)).collect()));
            rest -= total;
        } else {
            let size = rng.random_range(1..=rest.min(3));
            children.push(random_call(next, size, rng));
            rest -= size;
        }
    }
    seq(children)
}

/// Generate a simulated application. Named shapes ignore `n_functions`.
pub fn generate_app(n_functions: usize, shape: Shape, seed: u64) -> Result<SimApp, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut baas = BTreeMap::new();
    let root = match shape {
        Shape::Chain | Shape::Random if n_functions == 0 => {
            return Err(SimError::InvalidShape(format!("{shape} needs at least one function")));
        }
        Shape::Chain if n_functions == 1 => f("f1"),
        Shape::Chain => seq((1..=n_functions).map(|i| f(&format!("f{i}"))).collect()),
        Shape::Random => random_call(&mut 0, n_functions, &mut rng),
        // one caller invoking the other two in sequence
        Shape::Paper3 => seq(vec![f("f1"), f("f2"), f("f3")]),
        Shape::Paper6 => seq(vec![f("f1"), f("f2"), par(vec![seq(vec![f("f3"), f("f4")]), f("f5")]), f("f6")]),
        Shape::Paper10 => seq(vec![
            f("f1"),
            par(vec![seq(vec![f("f2"), f("f3")]), seq(vec![f("f4"), par(vec![f("f5"), f("f6")])])]),
            f("f7"),
            par(vec![f("f8"), seq(vec![f("f9"), f("f10")])]),
        ]),
        Shape::Petstore => {
            baas.insert(FunctionId::new("pet-checkout").expect("static"), vec!["pets-table".to_string()]);
            baas.insert(FunctionId::new("pet-shipping").expect("static"), vec!["shipping-table".to_string()]);
            seq(vec![f("pet-checkout"), f("pet-currency"), f("pet-payment"), f("pet-shipping"), f("pet-email")])
        }
        Shape::Custom => return Err(SimError::InvalidShape("custom apps are loaded from a graph file".into())),
    };
    let graph = CallGraph::new(root)?;
    let specs = graph
        .functions_in_order()
        .into_iter()
        .map(|id| {
            let spec = match (shape, id.as_str()) {
                (Shape::Petstore, "pet-checkout" | "pet-shipping") => SimFunctionSpec {
                    function: id.clone(),
                    work: 8.0,
                    kind: FunctionKind::BaasBound,
                    baas_latency_s: Some(rng.random_range(0.06..0.12)),
                    cold_start_s: 0.05,
                    cold_start_prob: 0.02,
                    jitter_cv: 0.35,
                },
                (Shape::Petstore, _) => SimFunctionSpec {
                    function: id.clone(),
                    work: rng.random_range(16.0..48.0),
                    kind: FunctionKind::Compute,
                    baas_latency_s: None,
                    cold_start_s: 0.05,
                    cold_start_prob: 0.02,
                    jitter_cv: 0.1,
                },
                _ => compute_spec(id.clone(), &mut rng),
            };
            (id.clone(), spec)
        })
        .collect();
    let name = match shape {
        Shape::Chain | Shape::Random => format!("{shape}{n_functions}"),
        _ => shape.name().to_string(),
    };
    SimApp::new(name, shape, seed, graph, specs, baas)
}
