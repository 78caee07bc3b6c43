//! Exact solvers for the weighted aggregated problems AID needs, wrapped as
//! [`ProblemDefinition`](crate::aid::ProblemDefinition)s.

mod hyperplane;
mod lad;
mod pca;
mod sphere;
mod subset;

pub use hyperplane::{solve_best_fit_hyperplane, solve_best_fit_hyperplane_with, HyperplaneFit};
pub use lad::{
    solve_lad_split_formulation, solve_weighted_lad, weighted_l1_objective, weighted_lad,
    LadProblem, RegressionSolution,
};
pub use pca::{
    solve_l1pca_exact, solve_weighted_l1pca, weighted_to_unweighted_pca, PcaProblem, PcaSolution,
    DEFAULT_PCA_CAP,
};
pub use sphere::{solve_sphere_lad, SphereProblem, SphereSolution, DEFAULT_SPHERE_TOL};
pub use subset::{solve_subset_selection, SubsetProblem, SubsetSolution, DEFAULT_SUBSET_CAP};

use crate::aid::AggregatedInstance;
use crate::error::{Error, Result};

/// The single target column of a regression-type instance.
pub(crate) fn single_target(agg: &AggregatedInstance) -> Result<Vec<f64>> {
    if agg.b_agg.cols() != 1 {
        return Err(Error::InvalidArgument(format!(
            "regression needs exactly one target column, got {}",
            agg.b_agg.cols()
        )));
    }
    Ok(agg.b_agg.column(0))
}
