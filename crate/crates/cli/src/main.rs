use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use memtune_core::perf::{read_profile_table, write_profile_table, common_ladder, AlphaSelection, DEFAULT_REQUESTS_PER_LEVEL};
use memtune_core::pipeline::profile_app;
use memtune_core::report::{build_rows, load_records, render_csv, render_markdown, wall_time_ratios, Record, ResultRecord, ValidationRecord};
use memtune_core::search::DEFAULT_BRUTE_FORCE_LIMIT;
use memtune_core::sim::{generate_app, validate_config, Shape, SimApp, SimRng, DEFAULT_VALIDATION_REQUESTS};
use memtune_core::trace::load_manual_graph;
use memtune_core::{CallGraph, CostModel, MemoryLadder, Objective, Search, SearchError, SloSpec, DEFAULT_GAMMA};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid flags, unreadable input, or config/app mismatch
  3  simulation or profiling failure
  4  no configuration meets the SLO
  5  brute-force search space exceeds the guard (use --force)";

#[derive(Parser)]
#[command(name = "memtune", version, about = "Memory configuration search for serverless applications", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic application spec.
    GenerateApp {
        #[arg(long)]
        shape: String,
        /// Function count for chain and random shapes.
        #[arg(long, default_value_t = 10)]
        functions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Profile an application at every ladder memory and write a profile table.
    Profile {
        #[arg(long)]
        app: PathBuf,
        /// Comma-separated memory sizes in MB.
        #[arg(long, value_delimiter = ',', default_values_t = [128u32, 256, 512, 1024, 2048])]
        ladder: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_REQUESTS_PER_LEVEL)]
        requests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the raw profiling traces.
        #[arg(long)]
        traces_out: Option<PathBuf>,
    },
    /// Search a memory configuration meeting an SLO.
    Optimize {
        #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
        app: Option<PathBuf>,
        /// Hand-written call graph instead of an app spec.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        profiles: PathBuf,
        /// Latency objective in seconds.
        #[arg(long)]
        slo: f64,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Feasible)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Slam)]
        algorithm: AlgorithmArg,
        /// Price per GB-second in USD.
        #[arg(long)]
        cost_rate: Option<f64>,
        /// Run brute force whatever the search space size.
        #[arg(long)]
        force: bool,
        /// Record search wall time in the result file.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a result's configuration against the simulator.
    Validate {
        #[arg(long)]
        app: PathBuf,
        /// Result file written by `optimize`.
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the SLO stored in the result.
        #[arg(long)]
        slo: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_VALIDATION_REQUESTS)]
        requests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate result and validation records from a directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Output file; `.csv` writes CSV, anything else markdown.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Feasible,
    MinCost,
    MinTime,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Slam,
    Brute,
}

enum Failure {
    Usage(anyhow::Error),
    Simulation(anyhow::Error),
    Infeasible,
    Guard(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Infeasible => 4,
            Failure::Guard(_) => 5,
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn write_json(path: &Path, record: &Record) -> Outcome {
    let text = serde_json::to_string_pretty(record).map_err(usage)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())).map_err(usage)
}

fn load_app(path: &Path) -> Result<SimApp, Failure> {
    SimApp::load(path).with_context(|| format!("loading app {}", path.display())).map_err(usage)
}

fn generate(shape: &str, functions: usize, seed: u64, out: &Path) -> Outcome {
    let shape: Shape = shape.parse().map_err(usage)?;
    let app = generate_app(functions, shape, seed).map_err(usage)?;
    app.save(out).map_err(usage)?;
    println!("wrote {} ({} functions) to {}", app.name(), app.graph().len(), out.display());
    Ok(())
}

fn profile(app: &Path, ladder: &[u32], requests: usize, seed: u64, out: &Path, traces_out: Option<&Path>) -> Outcome {
    let app = load_app(app)?;
    let ladder = MemoryLadder::from_megabytes(ladder, None).map_err(usage)?;
    let selection = AlphaSelection { seed, ..AlphaSelection::default() };
    let profiled = profile_app(&app, &ladder, requests, &SimRng::new(seed), &selection)
        .map_err(|e| Failure::Simulation(e.into()))?;
    let mut buf = Vec::new();
    write_profile_table(&profiled.profiles, &mut buf).map_err(usage)?;
    fs::write(out, buf).with_context(|| format!("writing {}", out.display())).map_err(usage)?;
    if let Some(path) = traces_out {
        fs::write(path, profiled.log.to_ndjson()).with_context(|| format!("writing {}", path.display())).map_err(usage)?;
    }
    for score in &profiled.scores {
        println!("alpha {:>5}: mse {:.6e}", score.alpha.value(), score.mse);
    }
    println!("chosen alpha: {}", profiled.alpha.value());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    app: Option<&Path>,
    graph: Option<&Path>,
    profiles: &Path,
    slo: f64,
    objective: ObjectiveArg,
    gamma: f64,
    algorithm: AlgorithmArg,
    cost_rate: Option<f64>,
    force: bool,
    timing: bool,
    out: &Path,
) -> Outcome {
    let (name, graph): (String, CallGraph) = match (app, graph) {
        (Some(path), _) => {
            let app = load_app(path)?;
            (app.name().to_string(), app.graph().clone())
        }
        (None, Some(path)) => {
            let graph = load_manual_graph(path).with_context(|| format!("loading graph {}", path.display())).map_err(usage)?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (stem, graph)
        }
        (None, None) => return Err(usage(anyhow!("one of --app or --graph is required"))),
    };
    let text = fs::File::open(profiles).with_context(|| format!("opening {}", profiles.display())).map_err(usage)?;
    let profiles = read_profile_table(text).map_err(usage)?;
    let ladder = common_ladder(&profiles).ok_or_else(|| usage(anyhow!("profiles do not share one memory ladder")))?;
    let cost_model = match cost_rate {
        Some(rate) => CostModel::new(rate, CostModel::default().billing_granularity_ms).map_err(usage)?,
        None => CostModel::default(),
    };
    let slo = SloSpec::new(slo).map_err(usage)?;
    let objective = match objective {
        ObjectiveArg::Feasible => Objective::Feasible,
        ObjectiveArg::MinCost => Objective::MinCost,
        ObjectiveArg::MinTime => Objective::min_time(gamma).map_err(usage)?,
    };
    let search = Search::new(&graph, &profiles, &ladder, &cost_model).map_err(usage)?;
    let result = match algorithm {
        AlgorithmArg::Slam => search.optimize(&slo, objective),
        AlgorithmArg::Brute => search.brute_force(&slo, objective, (!force).then_some(DEFAULT_BRUTE_FORCE_LIMIT)),
    }
    .map_err(|e| match e {
        SearchError::SearchSpaceTooLarge { .. } => Failure::Guard(e.into()),
        other => usage(other),
    })?;
    let record = ResultRecord::new(name, &result, timing);
    write_json(out, &Record::Result(record))?;
    match (&result.config, result.estimated_time, result.estimated_cost) {
        (Some(config), Some(time), Some(cost)) => {
            println!("{} ({}): estimated time {time:.4} s, cost {cost:.6e} USD", result.algorithm, objective.name());
            for (f, m) in config.iter() {
                println!("  {f}: {m}");
            }
            Ok(())
        }
        _ => {
            println!("{} ({}): no configuration meets the SLO of {} s; empty configuration written", result.algorithm, objective.name(), slo.slo_seconds);
            Err(Failure::Infeasible)
        }
    }
}

fn validate(app: &Path, config: &Path, slo: Option<f64>, requests: usize, seed: u64, out: &Path) -> Outcome {
    let app = load_app(app)?;
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display())).map_err(usage)?;
    let result = match serde_json::from_str::<Record>(&text).with_context(|| format!("parsing {}", config.display())).map_err(usage)? {
        Record::Result(r) => r,
        Record::Validation(_) => return Err(usage(anyhow!("{} is a validation record, not a result", config.display()))),
    };
    let memory = result.config.clone().ok_or_else(|| usage(anyhow!("result holds no configuration to validate")))?;
    let expected = app.graph().functions();
    let given: Vec<_> = memory.iter().map(|(f, _)| f.clone()).collect();
    if given != expected {
        return Err(usage(anyhow!("configuration functions do not match the application's")));
    }
    let slo = SloSpec::new(slo.unwrap_or(result.slo_seconds)).map_err(usage)?;
    let report = validate_config(&app, &memory, &slo, requests, &SimRng::new(seed)).map_err(|e| Failure::Simulation(e.into()))?;
    let record = ValidationRecord::new(&result, &report);
    write_json(out, &Record::Validation(record.clone()))?;
    println!("conformance: {:.1}% of {} requests within {} s", 100.0 * report.conformance, report.requests, slo.slo_seconds);
    if let Some(lat) = report.latency {
        println!("latency: min {:.4} median {:.4} p95 {:.4} max {:.4}", lat.min, lat.median, lat.p95, lat.max);
    }
    if let Some(acc) = record.estimation_accuracy {
        println!("estimation accuracy: {acc:.2}%");
    }
    Ok(())
}

fn report(results: &Path, out: &Path) -> Outcome {
    let records = load_records(results).map_err(usage)?;
    let rows = build_rows(&records);
    let text = if out.extension().is_some_and(|e| e == "csv") { render_csv(&rows).map_err(usage)? } else { render_markdown(&rows) };
    fs::write(out, text).with_context(|| format!("writing {}", out.display())).map_err(usage)?;
    println!("{} rows written to {}", rows.len(), out.display());
    for (app, objective, ratio) in wall_time_ratios(&rows) {
        println!("brute-force / slam-slo wall time on {app} ({objective}): {ratio:.1}x");
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::GenerateApp { shape, functions, seed, out } => generate(&shape, functions, seed, &out),
        Command::Profile { app, ladder, requests, seed, out, traces_out } => {
            profile(&app, &ladder, requests, seed, &out, traces_out.as_deref())
        }
        Command::Optimize { app, graph, profiles, slo, objective, gamma, algorithm, cost_rate, force, timing, out } => optimize(
            app.as_deref(),
            graph.as_deref(),
            &profiles,
            slo,
            objective,
            gamma,
            algorithm,
            cost_rate,
            force,
            timing,
            &out,
        ),
        Command::Validate { app, config, slo, requests, seed, out } => validate(&app, &config, slo, requests, seed, &out),
        Command::Report { results, out } => report(&results, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(e) | Failure::Simulation(e) | Failure::Guard(e) => eprintln!("error: {e:#}"),
                Failure::Infeasible => {}
            }
            ExitCode::from(failure.code())
        }
    }
}
