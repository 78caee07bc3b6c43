use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::run::{delta, AidSummary, ProblemRun, RunConfig, Timings};
use super::{InstanceSource, ProblemKind};
use crate::aid::{check_trace, IterationRecord, Sense};
use crate::error::{Error, Result};

pub const SOLVE_REPORT_SCHEMA: &str = include_str!("../../schemas/solve_report.schema.json");
pub const EXPERIMENT_ROW_SCHEMA: &str = include_str!("../../schemas/experiment_row.schema.json");
pub const BENCHMARK_SUMMARY_SCHEMA: &str =
    include_str!("../../schemas/benchmark_summary.schema.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectResult {
    pub objective: f64,
    pub solution: Value,
}

/// The JSON document written by `aid solve`. Everything except `timings`
/// is a deterministic function of the instance and the configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub problem: ProblemKind,
    pub instance: InstanceSource,
    pub n: usize,
    pub m: usize,
    pub config: RunConfig,
    pub aid: AidSummary,
    pub trace: Value,
    pub direct: Option<DirectResult>,
    pub direct_error: Option<String>,
    pub delta: Option<f64>,
    pub timings: Timings,
}

impl SolveReport {
    pub fn new(instance: InstanceSource, config: RunConfig, run: ProblemRun) -> Self {
        SolveReport {
            schema_version: 1,
            problem: run.problem,
            instance,
            n: run.n,
            m: run.m,
            config,
            aid: run.aid,
            trace: run.trace,
            direct: run
                .direct_objective
                .zip(run.direct_solution)
                .map(|(objective, solution)| DirectResult {
                    objective,
                    solution,
                }),
            direct_error: run.direct_error,
            delta: run.delta,
            timings: run.timings,
        }
    }
}

/// Validates `value` against a JSON Schema document.
pub fn validate_against(schema: &str, value: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(schema)?;
    jsonschema::validate(&schema, value).map_err(|e| Error::Schema(e.to_string()))
}

#[derive(Deserialize)]
struct TraceView {
    sense: Sense,
    iterations: Vec<IterationRecord>,
    #[serde(rename = "T")]
    final_iteration: usize,
}

fn check_trace_value(trace: &Value) -> Result<Vec<TraceView>> {
    let views: Vec<TraceView> = match trace.get("regressions") {
        Some(regressions) => serde_json::from_value(regressions.clone())?,
        None => vec![serde_json::from_value(trace.clone())?],
    };
    for view in &views {
        check_trace(view.sense, &view.iterations)?;
        if view.iterations.len() != view.final_iteration {
            return Err(Error::Internal("trace length differs from T".into()));
        }
    }
    Ok(views)
}

pub(super) fn check_metrics(
    problem: ProblemKind,
    direct: Option<(f64, Option<f64>)>,
    aid: Option<(f64, f64)>,
    reported_delta: Option<f64>,
    reported_rho: Option<f64>,
) -> Result<()> {
    let expected_delta = direct
        .zip(aid)
        .and_then(|((eb, _), (ea, _))| delta(problem, eb, ea));
    if reported_delta != expected_delta {
        return Err(Error::Internal(format!(
            "delta {reported_delta:?} does not match its objectives ({expected_delta:?})"
        )));
    }
    let expected_rho = match (direct, aid) {
        (Some((_, Some(td))), Some((_, ta))) if td > 0.0 => Some(ta / td),
        _ => None,
    };
    if reported_rho != expected_rho {
        return Err(Error::Internal(format!(
            "rho {reported_rho:?} does not match its wall times ({expected_rho:?})"
        )));
    }
    Ok(())
}

/// Re-derives the checkable facts of a serialized solve report: trace
/// invariants, `T`, delta and rho.
pub fn check_report_invariants(report: &Value) -> Result<()> {
    let parsed: ParsedReport = serde_json::from_value(report.clone())?;
    let views = check_trace_value(&parsed.trace)?;
    if parsed.problem != ProblemKind::Hyperplane
        && views[0].final_iteration != parsed.aid.iterations
    {
        return Err(Error::Internal("summary T differs from the trace".into()));
    }
    check_metrics(
        parsed.problem,
        parsed
            .direct
            .map(|d| (d.objective, parsed.timings.direct_wall_time_s)),
        Some((parsed.aid.objective, parsed.timings.aid_wall_time_s)),
        parsed.delta,
        parsed.timings.rho,
    )
}

#[derive(Deserialize)]
struct ParsedReport {
    problem: ProblemKind,
    aid: AidSummary,
    trace: Value,
    direct: Option<DirectResult>,
    delta: Option<f64>,
    timings: Timings,
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Validates the report against the published schema, re-checks its
/// invariants, then writes it.
pub fn write_solve_report(report: &SolveReport, path: &Path) -> Result<()> {
    let value = serde_json::to_value(report)?;
    validate_against(SOLVE_REPORT_SCHEMA, &value)?;
    check_report_invariants(&value)?;
    write_json(&value, path)
}
