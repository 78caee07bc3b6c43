use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{check_metrics, validate_against, write_json};
use super::run::{run_problem, AidSummary, RunConfig};
use super::{InstanceSource, ProblemKind, BENCHMARK_SUMMARY_SCHEMA, EXPERIMENT_ROW_SCHEMA};
use crate::data::{InstanceKind, SyntheticSpec};
use crate::error::{Error, Result};

/// One parameter cell of a benchmark grid. `p` is the subset size or PCA
/// component count; unset fields take the `SyntheticSpec` defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub informative_p: Option<usize>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub kind: Option<InstanceKind>,
}

impl GridCell {
    /// L1-PCA cells default to PCA-style data; subset cells default to a
    /// true support of size `p`.
    pub fn spec(&self, problem: ProblemKind, p: Option<usize>, seed: u64) -> SyntheticSpec {
        let kind = self.kind.unwrap_or(match problem {
            ProblemKind::L1pca => InstanceKind::PcaSample,
            _ => InstanceKind::Regression,
        });
        let informative_p = self.informative_p.or(match (problem, kind) {
            (ProblemKind::Subset, InstanceKind::Regression) => p.map(|p| p.min(self.m)),
            _ => None,
        });
        let mut spec = SyntheticSpec::regression(self.n, self.m, 0, seed);
        spec.kind = kind;
        spec.informative_p = informative_p;
        if let Some(sigma) = self.noise_sigma {
            spec.noise_sigma = sigma;
        }
        spec
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridInput {
    Cells(Vec<GridCell>),
    Wrapped {
        cells: Vec<GridCell>,
    },
    Product {
        n: Vec<usize>,
        m: Vec<usize>,
        #[serde(default)]
        p: Vec<usize>,
        #[serde(default)]
        informative_p: Option<usize>,
        #[serde(default)]
        noise_sigma: Option<f64>,
        #[serde(default)]
        kind: Option<InstanceKind>,
    },
}

/// Benchmark cells in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkGrid {
    pub cells: Vec<GridCell>,
}

impl BenchmarkGrid {
    /// Accepts a list of cells, `{"cells": [...]}`, or a Cartesian product
    /// `{"n": [...], "m": [...], "p": [...]}` (n outermost, p innermost).
    pub fn parse(json: &str) -> Result<Self> {
        let cells = match serde_json::from_str::<GridInput>(json)? {
            GridInput::Cells(cells) | GridInput::Wrapped { cells } => cells,
            GridInput::Product {
                n,
                m,
                p,
                informative_p,
                noise_sigma,
                kind,
            } => {
                let ps: Vec<Option<usize>> = if p.is_empty() {
                    vec![None]
                } else {
                    p.into_iter().map(Some).collect()
                };
                let mut cells = Vec::new();
                for &n in &n {
                    for &m in &m {
                        for &p in &ps {
                            cells.push(GridCell {
                                n,
                                m,
                                p,
                                informative_p,
                                noise_sigma,
                                kind,
                            });
                        }
                    }
                }
                cells
            }
        };
        if cells.is_empty() {
            return Err(Error::InvalidArgument("benchmark grid has no cells".into()));
        }
        Ok(BenchmarkGrid { cells })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkConfig {
    /// Problem, parameters and AID settings shared by all cells. Its seed is
    /// the base seed: repetition `r` uses `seed + r` for both the instance
    /// and the initial clustering.
    pub run: RunConfig,
    pub grid: BenchmarkGrid,
    pub reps: usize,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub objective: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AidMetrics {
    #[serde(flatten)]
    pub summary: AidSummary,
    pub wall_time_s: f64,
}

/// One (cell, repetition) run. Failures are recorded in `error` rather than
/// aborting the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub row_type: String,
    pub cell: usize,
    pub rep: usize,
    pub problem: ProblemKind,
    pub spec: SyntheticSpec,
    pub p: Option<usize>,
    pub direct: Option<RunMetrics>,
    pub direct_error: Option<String>,
    pub aid: Option<AidMetrics>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
    pub error: Option<String>,
}

impl ExperimentResult {
    fn check(&self) -> Result<()> {
        check_metrics(
            self.problem,
            self.direct
                .as_ref()
                .map(|d| (d.objective, Some(d.wall_time_s))),
            self.aid
                .as_ref()
                .map(|a| (a.summary.objective, a.wall_time_s)),
            self.delta,
            self.rho,
        )
    }
}

/// Means over the completed members of a cell; `None` where no member
/// has the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub direct_objective: Option<f64>,
    pub direct_wall_time_s: Option<f64>,
    pub aid_objective: Option<f64>,
    pub aid_wall_time_s: Option<f64>,
    #[serde(rename = "T")]
    pub iterations: Option<f64>,
    pub r_agg: Option<f64>,
    pub final_gap: Option<f64>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub row_type: String,
    pub cell: usize,
    pub problem: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub p: Option<usize>,
    pub reps: usize,
    pub completed: usize,
    pub failures: usize,
    pub mean: CellMeans,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

impl AggregateRow {
    fn from_rows(
        cell: usize,
        grid_cell: &GridCell,
        problem: ProblemKind,
        rows: &[&ExperimentResult],
    ) -> Self {
        let direct = || rows.iter().map(|r| r.direct.as_ref());
        let aid = || rows.iter().map(|r| r.aid.as_ref());
        AggregateRow {
            row_type: "aggregate".into(),
            cell,
            problem,
            n: grid_cell.n,
            m: grid_cell.m,
            p: rows.first().and_then(|r| r.p),
            reps: rows.len(),
            completed: rows.iter().filter(|r| r.error.is_none()).count(),
            failures: rows.iter().filter(|r| r.error.is_some()).count(),
            mean: CellMeans {
                direct_objective: mean(direct().map(|d| d.map(|d| d.objective))),
                direct_wall_time_s: mean(direct().map(|d| d.map(|d| d.wall_time_s))),
                aid_objective: mean(aid().map(|a| a.map(|a| a.summary.objective))),
                aid_wall_time_s: mean(aid().map(|a| a.map(|a| a.wall_time_s))),
                iterations: mean(aid().map(|a| a.map(|a| a.summary.iterations as f64))),
                r_agg: mean(aid().map(|a| a.map(|a| a.summary.r_agg))),
                final_gap: mean(aid().map(|a| a.map(|a| a.summary.final_gap))),
                rho: mean(rows.iter().map(|r| r.rho)),
                delta: mean(rows.iter().map(|r| r.delta)),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub schema_version: u32,
    pub problem: ProblemKind,
    pub reps: usize,
    pub jobs: usize,
    pub seed: u64,
    pub config: RunConfig,
    pub cells: Vec<GridCell>,
    pub rows: usize,
    pub failures: usize,
    pub aggregates: Vec<AggregateRow>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    /// Ordered by cell, then repetition.
    pub rows: Vec<ExperimentResult>,
    pub aggregates: Vec<AggregateRow>,
    pub summary: BenchmarkSummary,
}

fn run_one(cfg: &BenchmarkConfig, cell: usize, rep: usize) -> ExperimentResult {
    let grid_cell = &cfg.grid.cells[cell];
    let problem = cfg.run.problem;
    let mut run_cfg = cfg.run.clone();
    if grid_cell.p.is_some() {
        run_cfg.params.p = grid_cell.p;
    }
    run_cfg.seed = cfg.run.seed.wrapping_add(rep as u64);
    let p = run_cfg.params.resolved_p(problem);
    let spec = grid_cell.spec(problem, p, run_cfg.seed);
    let mut row = ExperimentResult {
        row_type: "instance".into(),
        cell,
        rep,
        problem,
        spec: spec.clone(),
        p,
        direct: None,
        direct_error: None,
        aid: None,
        rho: None,
        delta: None,
        error: None,
    };
    let outcome = InstanceSource::Spec { spec }
        .load(problem)
        .and_then(|data| run_problem(&run_cfg, &data));
    match outcome {
        Ok(run) => {
            row.direct = run
                .direct_objective
                .zip(run.timings.direct_wall_time_s)
                .map(|(objective, wall_time_s)| RunMetrics {
                    objective,
                    wall_time_s,
                });
            row.direct_error = run.direct_error;
            row.aid = Some(AidMetrics {
                summary: run.aid,
                wall_time_s: run.timings.aid_wall_time_s,
            });
            row.rho = run.timings.rho;
            row.delta = run.delta;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every (cell, repetition) pair on a pool of `jobs` threads. Row
/// order and content do not depend on the pool width.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome> {
    if cfg.reps == 0 || cfg.jobs == 0 {
        return Err(Error::InvalidArgument(
            "reps and jobs must be at least 1".into(),
        ));
    }
    if cfg.grid.cells.is_empty() {
        return Err(Error::InvalidArgument("benchmark grid has no cells".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..cfg.grid.cells.len())
        .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let rows: Vec<ExperimentResult> =
        pool.install(|| tasks.par_iter().map(|&(c, r)| run_one(cfg, c, r)).collect());

    let aggregates: Vec<AggregateRow> = cfg
        .grid
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let members: Vec<&ExperimentResult> = rows.iter().filter(|r| r.cell == c).collect();
            AggregateRow::from_rows(c, cell, cfg.run.problem, &members)
        })
        .collect();
    let summary = BenchmarkSummary {
        schema_version: 1,
        problem: cfg.run.problem,
        reps: cfg.reps,
        jobs: cfg.jobs,
        seed: cfg.run.seed,
        config: cfg.run.clone(),
        cells: cfg.grid.cells.clone(),
        rows: rows.len(),
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        aggregates: aggregates.clone(),
    };
    Ok(BenchmarkOutcome {
        rows,
        aggregates,
        summary,
    })
}

/// Flat table row for the CSV export.
#[derive(Serialize)]
struct CsvRow {
    row_type: &'static str,
    cell: usize,
    rep: Option<usize>,
    n: usize,
    m: usize,
    p: Option<usize>,
    seed: Option<u64>,
    direct_objective: Option<f64>,
    direct_wall_time_s: Option<f64>,
    aid_objective: Option<f64>,
    aid_wall_time_s: Option<f64>,
    #[serde(rename = "T")]
    iterations: Option<f64>,
    r_agg: Option<f64>,
    final_gap: Option<f64>,
    rho: Option<f64>,
    delta: Option<f64>,
    error: Option<String>,
}

fn csv_rows(outcome: &BenchmarkOutcome) -> impl Iterator<Item = CsvRow> + '_ {
    let instance = outcome.rows.iter().map(|r| CsvRow {
        row_type: "instance",
        cell: r.cell,
        rep: Some(r.rep),
        n: r.spec.n,
        m: r.spec.m,
        p: r.p,
        seed: Some(r.spec.seed),
        direct_objective: r.direct.as_ref().map(|d| d.objective),
        direct_wall_time_s: r.direct.as_ref().map(|d| d.wall_time_s),
        aid_objective: r.aid.as_ref().map(|a| a.summary.objective),
        aid_wall_time_s: r.aid.as_ref().map(|a| a.wall_time_s),
        iterations: r.aid.as_ref().map(|a| a.summary.iterations as f64),
        r_agg: r.aid.as_ref().map(|a| a.summary.r_agg),
        final_gap: r.aid.as_ref().map(|a| a.summary.final_gap),
        rho: r.rho,
        delta: r.delta,
        error: r.error.clone(),
    });
    let aggregate = outcome.aggregates.iter().map(|a| CsvRow {
        row_type: "aggregate",
        cell: a.cell,
        rep: None,
        n: a.n,
        m: a.m,
        p: a.p,
        seed: None,
        direct_objective: a.mean.direct_objective,
        direct_wall_time_s: a.mean.direct_wall_time_s,
        aid_objective: a.mean.aid_objective,
        aid_wall_time_s: a.mean.aid_wall_time_s,
        iterations: a.mean.iterations,
        r_agg: a.mean.r_agg,
        final_gap: a.mean.final_gap,
        rho: a.mean.rho,
        delta: a.mean.delta,
        error: None,
    });
    instance.chain(aggregate)
}

/// Writes the JSON Lines rows (instances, then one aggregate per cell) to
/// `out`, the summary to `<out>.summary.json` and, if asked, a CSV table to
/// `<out>.csv`. Every row is validated and re-checked before writing.
pub fn write_benchmark(outcome: &BenchmarkOutcome, out: &Path, csv: bool) -> Result<Vec<PathBuf>> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut lines = BufWriter::new(File::create(out)?);
    for row in &outcome.rows {
        row.check()?;
        let value = serde_json::to_value(row)?;
        validate_against(EXPERIMENT_ROW_SCHEMA, &value)?;
        writeln!(lines, "{}", serde_json::to_string(&value)?)?;
    }
    for (c, agg) in outcome.aggregates.iter().enumerate() {
        let members: Vec<&ExperimentResult> = outcome.rows.iter().filter(|r| r.cell == c).collect();
        let recomputed =
            AggregateRow::from_rows(c, &outcome.summary.cells[c], agg.problem, &members);
        if &recomputed != agg {
            return Err(Error::Internal(format!(
                "aggregate row {c} differs from its members"
            )));
        }
        let value = serde_json::to_value(agg)?;
        validate_against(EXPERIMENT_ROW_SCHEMA, &value)?;
        writeln!(lines, "{}", serde_json::to_string(&value)?)?;
    }
    lines.flush()?;

    let summary_path = out.with_extension("summary.json");
    let summary = serde_json::to_value(&outcome.summary)?;
    validate_against(BENCHMARK_SUMMARY_SCHEMA, &summary)?;
    write_json(&summary, &summary_path)?;
    let mut written = vec![out.to_path_buf(), summary_path];

    if csv {
        let csv_path = out.with_extension("csv");
        let mut wtr =
            csv::Writer::from_path(&csv_path).map_err(|e| Error::CsvFormat(e.to_string()))?;
        for row in csv_rows(outcome) {
            wtr.serialize(row)
                .map_err(|e| Error::CsvFormat(e.to_string()))?;
        }
        wtr.flush()?;
        written.push(csv_path);
    }
    Ok(written)
}
