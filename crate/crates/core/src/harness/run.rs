use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ClusterCount, ProblemData, ProblemKind, ProblemParams};
use crate::aid::{
    run_aid, AggregatedInstance, AidConfig, AidReport, ProblemDefinition, Sense, Termination,
};
use crate::clustering::{initial_partition, FeatureSource, InitialClusterConfig};
use crate::error::{Error, Result};
use crate::linalg::{l1_norm, DataMatrix};
use crate::problems::{
    solve_best_fit_hyperplane, solve_best_fit_hyperplane_with, LadProblem, PcaProblem,
    RegressionSolution, SphereProblem, SubsetProblem,
};

/// Everything needed to run one problem on one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub params: ProblemParams,
    pub aid: AidConfig,
    pub k0: ClusterCount,
    /// Seeds the initial clustering.
    pub seed: u64,
    /// Overrides the per-problem feature construction for clustering.
    pub features: Option<FeatureSource>,
    /// Also solve the full problem directly for comparison.
    pub direct: bool,
}

impl RunConfig {
    pub fn new(problem: ProblemKind) -> Self {
        RunConfig {
            problem,
            params: ProblemParams::default(),
            aid: AidConfig::default(),
            k0: ClusterCount::Auto,
            seed: 0,
            features: None,
            direct: true,
        }
    }
}

/// Clustering features used when none are configured. Regression problems
/// cluster on residuals of a few cheap LAD fits, L1-PCA on the L2 principal
/// projection.
pub fn default_feature_source(problem: ProblemKind, m: usize, p: Option<usize>) -> FeatureSource {
    let half = (m / 2).max(1);
    match problem {
        ProblemKind::Lad | ProblemKind::Hyperplane => FeatureSource::Residuals {
            model_count: 5,
            subset_size: half,
        },
        ProblemKind::Subset => FeatureSource::Residuals {
            model_count: 5,
            subset_size: p.unwrap_or(half).clamp(1, m),
        },
        ProblemKind::Sphere => FeatureSource::Residuals {
            model_count: ((0.1 * m as f64).round() as usize).max(1),
            subset_size: half,
        },
        ProblemKind::L1pca => FeatureSource::PcaProjection {
            p: p.unwrap_or(1).clamp(1, m),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AidSummary {
    pub objective: f64,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub r_agg: f64,
    pub final_gap: f64,
    pub initial_cluster_count: usize,
    pub final_cluster_count: usize,
    pub termination: Termination,
    pub converged: bool,
}

impl AidSummary {
    fn from_report<S>(report: &AidReport<S>, initial_cluster_count: usize) -> Self {
        AidSummary {
            objective: report.objective,
            iterations: report.final_iteration,
            r_agg: report.r_agg,
            final_gap: report.final_gap,
            initial_cluster_count,
            final_cluster_count: report.final_cluster_count,
            termination: report.termination,
            converged: report.converged,
        }
    }
}

/// Wall-clock seconds around the solver calls only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub aid_wall_time_s: f64,
    pub direct_wall_time_s: Option<f64>,
    /// AID time over direct time.
    pub rho: Option<f64>,
}

/// Result of one AID run plus the optional direct solve.
#[derive(Debug, Clone)]
pub struct ProblemRun {
    pub problem: ProblemKind,
    pub sense: Sense,
    pub n: usize,
    pub m: usize,
    pub aid: AidSummary,
    /// The full AID report (for the hyperplane fit: the fit and one report
    /// per coordinate regression).
    pub trace: Value,
    pub direct_objective: Option<f64>,
    pub direct_solution: Option<Value>,
    /// Why the direct solve was skipped, if it hit a budget.
    pub direct_error: Option<String>,
    pub delta: Option<f64>,
    pub timings: Timings,
}

/// Relative objective difference between the direct (`e_b`) and AID
/// (`e_a`) results. Subset selection divides by the smaller value, since
/// either side may be the better one there. `None` when undefined.
pub fn delta(problem: ProblemKind, e_b: f64, e_a: f64) -> Option<f64> {
    let diff = (e_b - e_a).abs();
    if diff == 0.0 {
        return Some(0.0);
    }
    let denom = match problem {
        ProblemKind::Subset => e_b.min(e_a),
        _ => e_b,
    };
    (denom > 0.0).then(|| diff / denom)
}

fn rho(aid: f64, direct: Option<f64>) -> Option<f64> {
    direct.filter(|d| *d > 0.0).map(|d| aid / d)
}

struct DirectOutcome {
    objective: Option<f64>,
    solution: Option<Value>,
    wall_time: Option<f64>,
    error: Option<String>,
}

impl DirectOutcome {
    fn skipped() -> Self {
        DirectOutcome {
            objective: None,
            solution: None,
            wall_time: None,
            error: None,
        }
    }

    /// Budget errors are recorded; anything else aborts the run.
    fn capture<S: Serialize>(run: impl FnOnce() -> Result<(S, f64)>) -> Result<Self> {
        let clock = Instant::now();
        match run() {
            Ok((solution, objective)) => Ok(DirectOutcome {
                wall_time: Some(clock.elapsed().as_secs_f64()),
                objective: Some(objective),
                solution: Some(serde_json::to_value(&solution)?),
                error: None,
            }),
            Err(e) if e.is_budget() => Ok(DirectOutcome {
                error: Some(e.to_string()),
                ..DirectOutcome::skipped()
            }),
            Err(e) => Err(e),
        }
    }
}

/// Runs AID (and, if configured, the direct solve) for `cfg.problem`.
pub fn run_problem(cfg: &RunConfig, data: &ProblemData) -> Result<ProblemRun> {
    let p = cfg.params.resolved_p(cfg.problem);
    let target = || {
        data.b.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("problem {} needs a target", cfg.problem))
        })
    };
    match cfg.problem {
        ProblemKind::Lad => run_generic(cfg, &LadProblem, target()?, &data.a),
        ProblemKind::Subset => {
            let problem = SubsetProblem {
                p: p.expect("subset has a default p"),
                cap: cfg.params.subset_cap,
            };
            run_generic(cfg, &problem, target()?, &data.a)
        }
        ProblemKind::Sphere => {
            let problem = SphereProblem {
                radius_sq: cfg.params.radius_sq,
                tol: cfg.params.sphere_tol,
            };
            run_generic(cfg, &problem, target()?, &data.a)
        }
        ProblemKind::L1pca => {
            let problem = PcaProblem {
                p: p.expect("l1pca has a default p"),
                cap: cfg.params.pca_cap,
            };
            run_generic(cfg, &problem, &problem.target(data.a.rows()), &data.a)
        }
        ProblemKind::Hyperplane => run_hyperplane(cfg, &data.a),
    }
}

fn run_generic<P: ProblemDefinition>(
    cfg: &RunConfig,
    problem: &P,
    b: &DataMatrix,
    a: &DataMatrix,
) -> Result<ProblemRun> {
    let (n, m) = a.shape();
    let features = cfg.features.clone().unwrap_or_else(|| {
        default_feature_source(cfg.problem, m, cfg.params.resolved_p(cfg.problem))
    });
    let cluster_config = InitialClusterConfig {
        target_cluster_count: cfg.k0.resolve(n)?,
        feature_source: features,
        seed: cfg.seed,
    };

    let clock = Instant::now();
    let initial = initial_partition(b, a, &cluster_config)?;
    let report = run_aid(b, a, problem, &initial, &cfg.aid)?;
    let aid_time = clock.elapsed().as_secs_f64();
    report.check_invariants()?;

    // The direct objective is measured exactly like AID's: on the original
    // rows, from the returned solution.
    let direct = if cfg.direct {
        DirectOutcome::capture(|| {
            let sol = problem.solve_weighted(&AggregatedInstance::unit(b.clone(), a.clone())?)?;
            let objective = l1_norm(&b.sub(&problem.apply(&sol, a)?)?);
            Ok((sol, objective))
        })?
    } else {
        DirectOutcome::skipped()
    };
    let aid = AidSummary::from_report(&report, initial.len());
    Ok(assemble(
        cfg.problem,
        problem.sense(),
        (n, m),
        aid,
        serde_json::to_value(&report)?,
        aid_time,
        direct,
    ))
}

fn run_hyperplane(cfg: &RunConfig, a: &DataMatrix) -> Result<ProblemRun> {
    let (n, m) = a.shape();
    let k = cfg.k0.resolve(n)?;
    let mut regressions: Vec<(AidReport<RegressionSolution>, usize)> = Vec::new();

    let clock = Instant::now();
    let fit = solve_best_fit_hyperplane_with(a, |design, target| {
        let b = DataMatrix::column_vector(target)?;
        let features = cfg.features.clone().unwrap_or_else(|| {
            default_feature_source(ProblemKind::Hyperplane, design.cols(), None)
        });
        let config = InitialClusterConfig {
            target_cluster_count: k,
            feature_source: features,
            seed: cfg.seed,
        };
        let initial = initial_partition(&b, design, &config)?;
        let report = run_aid(&b, design, &LadProblem, &initial, &cfg.aid)?;
        report.check_invariants()?;
        // The hyperplane choice compares original-data errors, not the
        // aggregated bound stored in the solution.
        let solution = RegressionSolution {
            coefficients: report.solution.coefficients.clone(),
            objective: report.objective,
        };
        regressions.push((report, initial.len()));
        Ok(solution)
    })?;
    let aid_time = clock.elapsed().as_secs_f64();

    let (winner, k0) = &regressions[fit.response];
    let mut aid = AidSummary::from_report(winner, *k0);
    aid.objective = fit.objective;
    aid.converged = regressions.iter().all(|(r, _)| r.converged);
    let reports: Vec<&AidReport<RegressionSolution>> = regressions.iter().map(|(r, _)| r).collect();
    let trace = json!({ "fit": fit, "regressions": reports });

    let direct = if cfg.direct {
        DirectOutcome::capture(|| {
            let fit = solve_best_fit_hyperplane(a)?;
            let objective = fit.objective;
            Ok((fit, objective))
        })?
    } else {
        DirectOutcome::skipped()
    };
    Ok(assemble(
        ProblemKind::Hyperplane,
        Sense::Minimize,
        (n, m),
        aid,
        trace,
        aid_time,
        direct,
    ))
}

fn assemble(
    problem: ProblemKind,
    sense: Sense,
    (n, m): (usize, usize),
    aid: AidSummary,
    trace: Value,
    aid_time: f64,
    direct: DirectOutcome,
) -> ProblemRun {
    ProblemRun {
        problem,
        sense,
        n,
        m,
        delta: direct
            .objective
            .and_then(|eb| delta(problem, eb, aid.objective)),
        aid,
        trace,
        direct_objective: direct.objective,
        direct_solution: direct.solution,
        direct_error: direct.error,
        timings: Timings {
            aid_wall_time_s: aid_time,
            direct_wall_time_s: direct.wall_time,
            rho: rho(aid_time, direct.wall_time),
        },
    }
}
