//! Newton iteration for single problems and for whole clusters.

mod algorithm;
mod cluster;
mod equation;
mod report;
mod single;

pub use algorithm::{
    algorithm_one, column_residuals, solve_anchors, solve_cluster_equation, standard_newton_sweep,
    ClusterResult, ClusterSolver, ClusterStepOptions, RunOptions, RunOutcome, SweepOutcome,
};
pub use cluster::{assemble_cluster_rhs, assemble_global, build_cluster_newton_equation, cluster_newton_update};
pub(crate) use cluster::cluster_terms;
pub use equation::{EquationTerm, MatrixEquationSpec, RightFactor};
pub use report::{NewtonReport, ReportRow};
pub use single::{newton_iterate, newton_solve_single, NewtonOptions, NewtonOutcome};
