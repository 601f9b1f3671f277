use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memtune_core::perf::read_profile_table;
use memtune_core::trace::parse_manual_graph;
use memtune_core::{estimate_cost, estimate_time, CostModel, FunctionId, MemoryConfiguration, MemorySize};
use serde_json::Value;

const GRAPH: &str = r#"{"kind":"sequence","children":[
  {"kind":"function","name":"f0"},
  {"kind":"parallel","children":[{"kind":"function","name":"f1"},{"kind":"function","name":"f2"}]}
]}"#;

const PROFILES: &str = "function,memory_mb,alpha,representative_s,sample_count
f0,128,95.0,2.0,10
f0,256,95.0,1.1,10
f0,512,95.0,0.7,10
f0,1024,95.0,0.6,10
f1,128,95.0,1.5,10
f1,256,95.0,0.8,10
f1,512,95.0,0.5,10
f1,1024,95.0,0.45,10
f2,128,95.0,0.3,10
f2,256,95.0,0.3,10
f2,512,95.0,0.3,10
f2,1024,95.0,0.3,10
";

fn memtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memtune")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    memtune(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let graph = dir.join("three.json");
    let profiles = dir.join("three.csv");
    fs::write(&graph, GRAPH).unwrap();
    fs::write(&profiles, PROFILES).unwrap();
    (graph, profiles)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn brute_force_min_cost_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, profiles) = fixture(dir.path());
    let out = dir.path().join("bf.json");
    let status = code(&[
        "optimize", "--graph", p(&graph), "--profiles", p(&profiles), "--slo", "1.8",
        "--objective", "min-cost", "--algorithm", "brute", "--out", p(&out),
    ]);
    assert_eq!(status, 0);

    let g = parse_manual_graph(GRAPH).unwrap();
    let profs = read_profile_table(PROFILES.as_bytes()).unwrap();
    let model = CostModel::default();
    let sizes = [128u32, 256, 512, 1024];
    let mut best = f64::INFINITY;
    for a in sizes {
        for b in sizes {
            for c in sizes {
                let config: MemoryConfiguration = [("f0", a), ("f1", b), ("f2", c)]
                    .into_iter()
                    .map(|(f, m)| (FunctionId::new(f).unwrap(), MemorySize::new(m).unwrap()))
                    .collect();
                if estimate_time(&g, &config, &profs).unwrap() <= 1.8 {
                    best = best.min(estimate_cost(&g, &config, &profs, &model).unwrap());
                }
            }
        }
    }
    let record = json(&out);
    assert_eq!(record["record"], "result");
    assert_eq!(record["evaluations"], 64);
    assert_eq!(record["estimated_cost"].as_f64().unwrap(), best);
    assert_eq!(record["config"]["f2"], 128);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, profiles) = fixture(dir.path());
    let out = dir.path().join("r.json");
    let opt = |slo: &str, extra: &[&str]| {
        let mut args = vec!["optimize", "--graph", p(&graph), "--profiles", p(&profiles), "--slo", slo, "--out", p(&out)];
        args.extend_from_slice(extra);
        code(&args)
    };
    assert_eq!(opt("2.0", &[]), 0);
    assert_eq!(opt("0.5", &[]), 4);
    // empty configuration is still written
    assert_eq!(json(&out)["config"], Value::Null);
    assert_eq!(opt("-1", &[]), 2);
    assert_eq!(code(&["generate-app", "--shape", "chain", "--functions", "0", "--out", p(&dir.path().join("x.json"))]), 2);
    assert_eq!(code(&["profile", "--app", p(&dir.path().join("missing.json")), "--out", p(&dir.path().join("x.csv"))]), 2);
    assert_eq!(code(&["no-such-command"]), 2);

    // 20 functions x 5 rungs is over the brute-force guard
    let app = dir.path().join("chain.json");
    let table = dir.path().join("chain.csv");
    assert_eq!(code(&["generate-app", "--shape", "chain", "--functions", "20", "--out", p(&app)]), 0);
    assert_eq!(code(&["profile", "--app", p(&app), "--requests", "5", "--out", p(&table)]), 0);
    let brute = |extra: &[&str]| {
        let mut args = vec!["optimize", "--app", p(&app), "--profiles", p(&table), "--slo", "100", "--algorithm", "brute", "--out", p(&out)];
        args.extend_from_slice(extra);
        code(&args)
    };
    assert_eq!(brute(&[]), 5);
}

#[test]
fn empty_results_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["report", "--results", p(dir.path()), "--out", p(&dir.path().join("r.md"))]), 2);
}

fn flow(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let app = dir.join("app.json");
    let table = dir.join("profiles.csv");
    let traces = dir.join("traces.ndjson");
    let results = dir.join("results");
    fs::create_dir(&results).unwrap();
    let result = results.join("result.json");
    let validation = results.join("validation.json");
    let report = dir.join("report.md");
    let csv = dir.join("report.csv");
    assert_eq!(code(&["generate-app", "--shape", "paper6", "--seed", "3", "--out", p(&app)]), 0);
    assert_eq!(
        code(&["profile", "--app", p(&app), "--ladder", "128,512,1024", "--requests", "20", "--seed", "3", "--out", p(&table), "--traces-out", p(&traces)]),
        0
    );
    assert_eq!(
        code(&["optimize", "--app", p(&app), "--profiles", p(&table), "--slo", "3.0", "--objective", "min-cost", "--out", p(&result)]),
        0
    );
    assert_eq!(code(&["validate", "--app", p(&app), "--config", p(&result), "--requests", "30", "--out", p(&validation)]), 0);
    assert_eq!(code(&["report", "--results", p(&results), "--out", p(&report)]), 0);
    assert_eq!(code(&["report", "--results", p(&results), "--out", p(&csv)]), 0);

    let v = json(&validation);
    assert_eq!(v["record"], "validation");
    assert_eq!(v["requests"], 30);
    let conformance = v["conformance"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&conformance));
    assert!(fs::read_to_string(&report).unwrap().contains("paper6"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);

    [app, table, traces, result, validation, report, csv]
        .iter()
        .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(f).unwrap()))
        .collect()
}

#[test]
fn end_to_end_flow_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = flow(a.path());
    let second = flow(b.path());
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        assert!(x == y, "{name} differs between runs");
    }
}
