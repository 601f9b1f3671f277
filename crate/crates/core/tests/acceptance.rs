//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use memtune_core::perf::{build_profiles, AlphaSelection, DEFAULT_REQUESTS_PER_LEVEL};
use memtune_core::pipeline::profile_app;
use memtune_core::sim::{
    estimation_accuracy, generate_app, profile_application, run_load, validate_config, Shape, SimApp, SimRng,
    DEFAULT_VALIDATION_REQUESTS,
};
use memtune_core::trace::{build_call_graph, extract_samples, TraceLog};
use memtune_core::{
    estimate_time, CallGraph, CostModel, FunctionProfile, MemoryConfiguration, MemoryLadder, Objective,
    Percentile, ProfileCell, Profiles, Search, SloSpec, DEFAULT_GAMMA,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;
const SLO_FACTORS: [f64; 3] = [1.2, 1.5, 2.0];
const NAMED: [Shape; 4] = [Shape::Paper3, Shape::Paper6, Shape::Paper10, Shape::Petstore];

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &[Line]) -> bool {
    for l in lines {
        println!("criterion {} [{}] {}: {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
    lines.iter().all(|l| l.pass)
}

struct Cell {
    shape: Shape,
    factor: f64,
    slo: f64,
    estimate: f64,
    conformance: f64,
    accuracy: f64,
}

/// Profile, search with the greedy SLO algorithm and validate, with the
/// command-line defaults for ladder, request counts and seeds.
fn pipeline_cells(shape: Shape, seed: u64) -> Vec<Cell> {
    let app = generate_app(0, shape, seed).unwrap();
    let ladder = MemoryLadder::capped_default();
    let selection = AlphaSelection { seed, ..AlphaSelection::default() };
    let profiled = profile_app(&app, &ladder, DEFAULT_REQUESTS_PER_LEVEL, &SimRng::new(seed), &selection).unwrap();
    let search = Search::new(app.graph(), &profiled.profiles, &ladder, &CostModel::default()).unwrap();
    let top = MemoryConfiguration::uniform(app.graph(), ladder.max());
    let base = estimate_time(app.graph(), &top, &profiled.profiles).unwrap();
    SLO_FACTORS
        .iter()
        .map(|&factor| {
            let slo = SloSpec::new(base * factor).unwrap();
            let found = search.slam_slo(&slo);
            let config = found.config.expect("an SLO above the all-max estimate is feasible");
            let estimate = found.estimated_time.unwrap();
            let v = validate_config(&app, &config, &slo, DEFAULT_VALIDATION_REQUESTS, &SimRng::new(seed)).unwrap();
            let p95 = v.latency.unwrap().p95;
            Cell { shape, factor, slo: slo.slo_seconds, estimate, conformance: v.conformance, accuracy: estimation_accuracy(estimate, p95) }
        })
        .collect()
}

fn criteria_1_2() -> Vec<Line> {
    let cells: Vec<Cell> = NAMED.iter().flat_map(|&s| pipeline_cells(s, SEED)).collect();
    for c in &cells {
        println!(
            "  {:8} slo {:.1}x = {:.4} s  estimate {:.4}  conformance {:.2}  accuracy {:.2}%",
            c.shape.name(),
            c.factor,
            c.slo,
            c.estimate,
            c.conformance,
            c.accuracy
        );
    }
    let failing: Vec<String> = cells
        .iter()
        .filter(|c| c.conformance < 0.95)
        .map(|c| format!("{}@{:.1}x={:.2}", c.shape.name(), c.factor, c.conformance))
        .collect();
    let min_conf = cells.iter().map(|c| c.conformance).fold(1.0, f64::min);
    let c1 = Line {
        id: 1,
        name: "SLO conformance",
        pass: failing.is_empty(),
        detail: format!("{} cells, min conformance {:.2}, below 95%: {:?}", cells.len(), min_conf, failing),
    };

    let synthetic_min =
        cells.iter().filter(|c| c.shape != Shape::Petstore).map(|c| c.accuracy).fold(f64::INFINITY, f64::min);
    let pet: Vec<&Cell> = cells.iter().filter(|c| c.shape == Shape::Petstore).collect();
    let pet_min = pet.iter().map(|c| c.accuracy).fold(f64::INFINITY, f64::min);
    let pet_within = pet.iter().all(|c| c.estimate <= c.slo);
    let c2 = Line {
        id: 2,
        name: "estimation accuracy",
        pass: synthetic_min >= 90.0 && pet_min >= 70.0 && pet_within,
        detail: format!(
            "synthetic min {synthetic_min:.2}% (>= 90), petstore min {pet_min:.2}% (>= 70), petstore estimate <= SLO: {pet_within}"
        ),
    };

    // same protocol over further seeds, for information only
    let seeds = 1..=19u64;
    let mut total = 0;
    let mut conforming = 0;
    for seed in seeds.clone() {
        for &shape in &NAMED {
            for c in pipeline_cells(shape, seed) {
                total += 1;
                conforming += usize::from(c.conformance >= 0.95);
            }
        }
    }
    println!("  info: seeds {seeds:?}: {conforming}/{total} cells reach 95% conformance");
    vec![c1, c2]
}

struct Instance {
    search: Search,
    graph: CallGraph,
    profiles: Profiles,
    slo: SloSpec,
    n: usize,
    m: usize,
}

/// Random call tree of up to 4 functions over a ladder of up to 4 rungs,
/// with monotone profiles: a base time of 0.5-5 s and a speedup of 1-2.2
/// per rung.
fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=4);
    let graph = generate_app(n, Shape::Random, rng.random()).unwrap().graph().clone();
    let ladder = MemoryLadder::from_megabytes(&[128, 256, 512, 1024][..m], None).unwrap();
    let mut profiles = Profiles::new();
    for f in graph.functions() {
        let mut t: f64 = rng.random_range(0.5..5.0);
        let mut cells = BTreeMap::new();
        for &mem in ladder.rungs() {
            cells.insert(mem, ProfileCell { representative: t, measured: t, sample_count: 1 });
            t /= rng.random_range(1.0..2.2);
        }
        profiles.insert(f.clone(), FunctionProfile { function: f, alpha: Percentile::new(95.0).unwrap(), cells, samples: BTreeMap::new() });
    }
    let fastest = estimate_time(&graph, &MemoryConfiguration::uniform(&graph, ladder.max()), &profiles).unwrap();
    let slowest = estimate_time(&graph, &MemoryConfiguration::uniform(&graph, ladder.min()), &profiles).unwrap();
    // mostly between the extremes, sometimes infeasible
    let slo = SloSpec::new(rng.random_range(0.8 * fastest..1.05 * slowest)).unwrap();
    let search = Search::new(&graph, &profiles, &ladder, &CostModel::default()).unwrap();
    Instance { search, graph, profiles, slo, n, m }
}

fn criteria_3_to_6() -> Vec<Line> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let count = 500;
    let gamma = DEFAULT_GAMMA;
    let mut unsound = 0;
    let mut missed = 0;
    let mut feasible = 0;
    let mut time_ok = 0;
    let mut gaps = Vec::new();
    let mut cost_worse = 0;
    let mut ratios = Vec::new();
    let mut over_bound = 0;
    let mut max_eval_ratio: f64 = 0.0;
    for _ in 0..count {
        let inst = instance(&mut rng);
        let s = &inst.search;
        let greedy = s.slam_slo(&inst.slo);
        let min_cost = s.slam_slo_min_cost(&inst.slo);
        let min_time = s.slam_slo_min_time(&inst.slo, gamma).unwrap();
        let bf_cost = s.brute_force(&inst.slo, Objective::MinCost, None).unwrap();
        let bf_time = s.brute_force(&inst.slo, Objective::min_time(gamma).unwrap(), None).unwrap();
        let bf_any = s.brute_force(&inst.slo, Objective::Feasible, None).unwrap();

        for r in [&greedy, &min_cost, &min_time, &bf_cost, &bf_time, &bf_any] {
            if let Some(c) = &r.config {
                if estimate_time(&inst.graph, c, &inst.profiles).unwrap() > inst.slo.slo_seconds {
                    unsound += 1;
                }
            }
        }
        if bf_any.is_feasible() && !greedy.is_feasible() {
            missed += 1;
        }

        let bound = inst.n * (inst.m - 1) + 1;
        if greedy.evaluations > bound {
            over_bound += 1;
        }
        max_eval_ratio = max_eval_ratio.max(greedy.evaluations as f64 / bound as f64);

        if !bf_any.is_feasible() {
            continue;
        }
        feasible += 1;
        let (t, best_t) = (min_time.estimated_time.unwrap(), bf_time.estimated_time.unwrap());
        if t <= best_t + gamma {
            time_ok += 1;
        } else {
            gaps.push(t - best_t);
        }
        let (c, base_c, best_c) =
            (min_cost.estimated_cost.unwrap(), greedy.estimated_cost.unwrap(), bf_cost.estimated_cost.unwrap());
        if c > base_c {
            cost_worse += 1;
        }
        ratios.push(c / best_c);
    }

    gaps.sort_by(f64::total_cmp);
    ratios.sort_by(f64::total_cmp);
    let median = |v: &[f64]| if v.is_empty() { f64::NAN } else { (v[(v.len() - 1) / 2] + v[v.len() / 2]) / 2.0 };
    let time_share = time_ok as f64 / feasible as f64;
    let worst_ratio = ratios.last().copied().unwrap_or(f64::NAN);
    vec![
        Line {
            id: 3,
            name: "feasibility soundness",
            pass: unsound == 0 && missed == 0,
            detail: format!("{count} instances ({feasible} feasible): {unsound} results over SLO, {missed} missed feasible"),
        },
        Line {
            id: 4,
            name: "min-time optimality gap",
            pass: time_share >= 0.95,
            detail: format!(
                "{time_ok}/{feasible} = {:.1}% within brute force + {gamma} s; remaining gaps (s): {:?}",
                100.0 * time_share,
                gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>()
            ),
        },
        Line {
            id: 5,
            name: "min-cost near-optimality",
            pass: cost_worse == 0 && median(&ratios) <= 1.10,
            detail: format!(
                "{cost_worse} runs costlier than slam-slo; cost ratio to brute force median {:.4}, worst {worst_ratio:.4}",
                median(&ratios)
            ),
        },
        Line {
            id: 6,
            name: "evaluation-count bound",
            pass: over_bound == 0,
            detail: format!("{over_bound} runs over N(M-1)+1; highest evaluations/bound {max_eval_ratio:.3}"),
        },
    ]
}

/// Median wall time of `run`, repeated until at least 50 ms are spent.
fn wall_time(mut run: impl FnMut()) -> f64 {
    let mut times = Vec::new();
    let start = Instant::now();
    while times.len() < 5 || (start.elapsed().as_secs_f64() < 0.05 && times.len() < 10_000) {
        let t = Instant::now();
        run();
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn profiled(app: &SimApp, ladder: &MemoryLadder) -> Profiles {
    let selection = AlphaSelection { seed: SEED, ..AlphaSelection::default() };
    profile_app(app, ladder, DEFAULT_REQUESTS_PER_LEVEL, &SimRng::new(SEED), &selection).unwrap().profiles
}

fn criterion_7() -> Line {
    let ladder = MemoryLadder::full();
    let sizes = [1usize, 10, 25, 50, 100];
    let mut times: [Vec<f64>; 3] = Default::default();
    let mut all_found = true;
    let mut min_cost_100 = 0.0;
    for &n in &sizes {
        let app = generate_app(n, Shape::Chain, SEED).unwrap();
        let profiles = profiled(&app, &ladder);
        let search = Search::new(app.graph(), &profiles, &ladder, &CostModel::default()).unwrap();
        let top = estimate_time(app.graph(), &MemoryConfiguration::uniform(app.graph(), ladder.max()), &profiles).unwrap();
        let slo = SloSpec::new(1.2 * top).unwrap();
        all_found &= search.slam_slo(&slo).is_feasible()
            && search.slam_slo_min_cost(&slo).is_feasible()
            && search.slam_slo_min_time(&slo, DEFAULT_GAMMA).unwrap().is_feasible();
        times[0].push(wall_time(|| {
            search.slam_slo(&slo);
        }));
        times[1].push(wall_time(|| {
            search.slam_slo_min_cost(&slo);
        }));
        times[2].push(wall_time(|| {
            search.slam_slo_min_time(&slo, DEFAULT_GAMMA).unwrap();
        }));
        if n == 100 {
            let t = Instant::now();
            search.slam_slo_min_cost(&slo);
            min_cost_100 = t.elapsed().as_secs_f64();
        }
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let slopes: Vec<f64> = times.iter().map(|t| slope(&xs, t)).collect();
    for (name, t) in ["slam-slo", "min-cost", "min-time"].iter().zip(&times) {
        let shown: Vec<String> = t.iter().map(|s| format!("{:.1}us", s * 1e6)).collect();
        println!("  {name:9} wall time over N {sizes:?}: {shown:?}");
    }

    let paper6 = generate_app(0, Shape::Paper6, SEED).unwrap();
    let four = MemoryLadder::from_megabytes(&[128, 256, 512, 1024], None).unwrap();
    let profiles = profiled(&paper6, &four);
    let search = Search::new(paper6.graph(), &profiles, &four, &CostModel::default()).unwrap();
    let top = estimate_time(paper6.graph(), &MemoryConfiguration::uniform(paper6.graph(), four.max()), &profiles).unwrap();
    let slo = SloSpec::new(1.2 * top).unwrap();
    let greedy = wall_time(|| {
        search.slam_slo(&slo);
    });
    let brute = wall_time(|| {
        search.brute_force(&slo, Objective::MinCost, None).unwrap();
    });
    let ratio = brute / greedy;

    let max_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Line {
        id: 7,
        name: "scalability shape",
        pass: all_found && max_slope <= 1.5 && min_cost_100 < 60.0 && ratio >= 10.0,
        detail: format!(
            "all variants found configs: {all_found}; log-log slopes {:.2}/{:.2}/{:.2} (<= 1.5); 100-function min-cost {:.4} s; brute/slam on paper6 x4 rungs {ratio:.0}x (>= 10)",
            slopes[0], slopes[1], slopes[2], min_cost_100
        ),
    }
}

fn criterion_8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let ladder = MemoryLadder::capped_default();
    let apps = 100;
    let mut recovered = 0;
    let mut worst: f64 = 0.0;
    for i in 0..apps {
        let n = rng.random_range(1..=40);
        let app = generate_app(n, Shape::Random, rng.random()).unwrap().without_noise();
        let log = profile_application(&app, &ladder, 2, &SimRng::new(i)).unwrap();
        if build_call_graph(&log).is_ok_and(|g| &g == app.graph()) {
            recovered += 1;
        }
        let samples = extract_samples(&log).unwrap();
        let profiles = build_profiles(&samples, &ladder, Percentile::new(90.0).unwrap()).unwrap();
        // a mixed configuration, not one of the profiled uniform ones
        let mut config = MemoryConfiguration::new();
        for f in app.graph().functions() {
            config.set(f, ladder.rungs()[rng.random_range(0..ladder.len())]);
        }
        let estimate = estimate_time(app.graph(), &config, &profiles).unwrap();
        let run = run_load(&app, &config, 1, &SimRng::new(i)).unwrap();
        let (_, segments) = run.traces().next().unwrap();
        worst = worst.max((TraceLog::root_of(segments).duration() - estimate).abs());
    }
    Line {
        id: 8,
        name: "round trip and zero-jitter consistency",
        pass: recovered == apps && worst <= 1e-3,
        detail: format!("{recovered}/{apps} graphs recovered; largest |simulated - estimate| {worst:.3e} s (<= 1 ms)"),
    }
}

fn main() -> ExitCode {
    let mut lines = criteria_1_2();
    lines.extend(criteria_3_to_6());
    lines.push(criterion_7());
    lines.push(criterion_8());
    if report(&lines) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
