//! `aid`: run AID against direct solves, benchmark grids and generate
//! instances.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aid_core::data::{write_instance_bundle, SyntheticSpec};
use aid_core::harness::{
    run_benchmark, run_problem, write_benchmark, write_solve_report, BenchmarkConfig,
    BenchmarkGrid, ClusterCount, InstanceSource, ProblemKind, RunConfig, SolveReport,
    BENCHMARK_SUMMARY_SCHEMA, EXPERIMENT_ROW_SCHEMA, SOLVE_REPORT_SCHEMA,
};
use aid_core::AidConfig;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(
    name = "aid",
    version,
    about = "Aggregate-and-iterative-disaggregate L1 fitting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run AID (and the direct solver) on one instance and write a JSON report.
    Solve(SolveArgs),
    /// Run AID and the direct solver over a grid of generated instances.
    Benchmark(BenchmarkArgs),
    /// Write a generated instance as CSV files plus a JSON manifest.
    Generate(GenerateArgs),
    /// Print one of the published report schemas.
    Schema {
        #[arg(value_enum)]
        kind: SchemaKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    Solve,
    Row,
    Summary,
}

#[derive(Args)]
struct SolverArgs {
    /// lad, subset, sphere, l1pca or hyperplane.
    #[arg(long)]
    problem: String,
    /// Relative gap at which AID stops early.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Residuals at or above minus this value count as nonnegative.
    #[arg(long, default_value_t = 1e-9)]
    eps_sign: f64,
    /// Iteration budget (defaults to the number of rows).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Initial cluster count, or "auto" for ceil(n/100) clamped to [2, n].
    #[arg(long, default_value = "auto")]
    k0: String,
    /// Seed for the initial clustering (and base instance seed in benchmarks).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subset size (subset) or component count (l1pca).
    #[arg(long)]
    p: Option<usize>,
    /// Bound on the squared coefficient norm (sphere).
    #[arg(long, default_value_t = aid_core::harness::DEFAULT_RADIUS_SQ)]
    radius: f64,
    /// Certification tolerance of the sphere solver.
    #[arg(long, default_value_t = aid_core::problems::DEFAULT_SPHERE_TOL)]
    sphere_tol: f64,
    /// Enumeration budget for subset or l1pca.
    #[arg(long)]
    cap: Option<u64>,
    /// Skip the direct full-data solve.
    #[arg(long)]
    no_direct: bool,
}

impl SolverArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let problem: ProblemKind = self.problem.parse()?;
        let mut cfg = RunConfig::new(problem);
        cfg.aid = AidConfig {
            tol: self.tol,
            eps_sign: self.eps_sign,
            max_iters: self.max_iters,
        };
        cfg.k0 = self.k0.parse::<ClusterCount>()?;
        cfg.seed = self.seed;
        cfg.params.p = self.p;
        cfg.params.radius_sq = self.radius;
        cfg.params.sphere_tol = self.sphere_tol;
        if let Some(cap) = self.cap {
            cfg.params.subset_cap = cap;
            cfg.params.pca_cap = cap;
        }
        cfg.direct = !self.no_direct;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Inline JSON spec, spec or manifest JSON file, or CSV file.
    #[arg(long)]
    instance: String,
    /// The CSV instance has a header row.
    #[arg(long)]
    header: bool,
    /// Standardize feature columns before solving.
    #[arg(long)]
    standardize: bool,
    /// Report path (defaults to <out-dir>/<problem>-report.json).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "AID_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Inline JSON or a file: a list of cells, {"cells": [...]}, or
    /// {"n": [...], "m": [...], "p": [...]}.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSON Lines output (defaults to <out-dir>/<problem>-benchmark.jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "AID_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Also write a CSV table next to the JSON Lines file.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Inline JSON spec or a spec file.
    #[arg(long)]
    spec: String,
    /// Output directory (defaults to <out-dir>/instance).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "AID_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

fn inline_or_file(arg: &str) -> Result<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let cfg = args.solver.run_config()?;
    let source = InstanceSource::parse(&args.instance, args.header)?;
    let mut data = source.load(cfg.problem).context("loading instance")?;
    if args.standardize {
        data = data.standardized()?;
    }
    let run = run_problem(&cfg, &data).with_context(|| format!("solving {}", cfg.problem))?;
    let out = args
        .out
        .unwrap_or_else(|| args.out_dir.join(format!("{}-report.json", cfg.problem)));
    let report = SolveReport::new(source, cfg, run);
    write_solve_report(&report, &out).with_context(|| format!("writing {}", out.display()))?;

    let aid = &report.aid;
    println!(
        "{} n={} m={} objective={:.10e} T={} r_agg={:.4} gap={:.3e} termination={:?}",
        report.problem,
        report.n,
        report.m,
        aid.objective,
        aid.iterations,
        aid.r_agg,
        aid.final_gap,
        aid.termination
    );
    if let Some(direct) = &report.direct {
        println!(
            "direct objective={:.10e} delta={}",
            direct.objective,
            report
                .delta
                .map_or("undefined".into(), |d| format!("{d:.3e}"))
        );
    }
    if let Some(err) = &report.direct_error {
        println!("direct skipped: {err}");
    }
    println!("report: {}", out.display());
    Ok(if aid.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

fn benchmark(args: BenchmarkArgs) -> Result<ExitCode> {
    let run = args.solver.run_config()?;
    let grid = BenchmarkGrid::parse(&inline_or_file(&args.grid)?)?;
    let problem = run.problem;
    let cfg = BenchmarkConfig {
        run,
        grid,
        reps: args.reps,
        jobs: args.jobs,
    };
    let outcome = run_benchmark(&cfg)?;
    let out = args
        .out
        .unwrap_or_else(|| args.out_dir.join(format!("{problem}-benchmark.jsonl")));
    let files = write_benchmark(&outcome, &out, args.csv)?;

    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
    println!("cell      n    m   p  done  T      r_agg       delta       rho");
    for agg in &outcome.aggregates {
        println!(
            "{:<4} {:>6} {:>4} {:>3} {:>5}  {:<6} {:<11} {:<11} {}",
            agg.cell,
            agg.n,
            agg.m,
            agg.p.map_or("-".into(), |p| p.to_string()),
            agg.completed,
            agg.mean
                .iterations
                .map_or("-".into(), |t| format!("{t:.1}")),
            fmt(agg.mean.r_agg),
            fmt(agg.mean.delta),
            fmt(agg.mean.rho),
        );
    }
    if outcome.summary.failures > 0 {
        println!(
            "{} of {} runs failed; see the error column",
            outcome.summary.failures,
            outcome.rows.len()
        );
    }
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let spec: SyntheticSpec =
        serde_json::from_str(&inline_or_file(&args.spec)?).context("parsing spec")?;
    let dir = args.out.unwrap_or_else(|| args.out_dir.join("instance"));
    let manifest = write_instance_bundle(&spec, Path::new(&dir))?;
    println!("wrote {}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Generate(args) => generate(args),
        Command::Schema { kind } => {
            let schema = match kind {
                SchemaKind::Solve => SOLVE_REPORT_SCHEMA,
                SchemaKind::Row => EXPERIMENT_ROW_SCHEMA,
                SchemaKind::Summary => BENCHMARK_SUMMARY_SCHEMA,
            };
            print!("{schema}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err
        .chain()
        .find_map(|e| e.downcast_ref::<aid_core::Error>());
    match core {
        Some(e) if e.is_budget() => EXIT_BUDGET,
        Some(e) if e.is_input() => EXIT_INPUT,
        None if err
            .chain()
            .any(|e| e.is::<std::io::Error>() || e.is::<serde_json::Error>()) =>
        {
            EXIT_INPUT
        }
        _ => EXIT_OTHER,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
