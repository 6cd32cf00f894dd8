use lrnewton::clustering::{linspace, ParameterGrid};
use lrnewton::model::{generate_synthetic, ParametricSystem, SyntheticConfig};
use lrnewton::newton::{
    algorithm_one, newton_solve_single, standard_newton_sweep, ClusterSolver, ClusterStepOptions, NewtonOptions,
    RunOptions,
};

fn system() -> ParametricSystem {
    generate_synthetic(&SyntheticConfig {
        seed: 17,
        dim: 40,
        density: 0.1,
        nonlinear_scale: 0.05,
        ..SyntheticConfig::default()
    })
}

fn grid(sys: &ParametricSystem) -> ParameterGrid {
    ParameterGrid::two_parameter(linspace(0.9, 1.1, 6), linspace(0.9, 1.1, 4), sys.reference).unwrap()
}

fn options(clusters: usize, solver: ClusterSolver) -> RunOptions {
    RunOptions {
        clusters,
        newton: NewtonOptions {
            tol: 1e-10,
            max_steps: 30,
        },
        step: ClusterStepOptions {
            solver,
            ..ClusterStepOptions::default()
        },
        chaining: true,
    }
}

#[test]
fn newton_converges_quadratically() {
    let sys = system();
    let p = grid(&sys).point(7).unwrap();
    let out = newton_solve_single(&sys, &p, &sys.b_d, &NewtonOptions { tol: 1e-12, max_steps: 30 }).unwrap();
    assert!(out.steps <= 8, "{} steps", out.steps);
    let h = &out.history;
    let n = h.len();
    // the last contraction is much faster than linear
    assert!(h[n - 1] <= 1e-2 * h[n - 2] || h[n - 1] <= 1e-14);
}

#[test]
fn linear_instance_is_solved_exactly_by_one_cluster_step() {
    let sys = system().linearized_copy();
    let run = algorithm_one(&sys, &grid(&sys), &options(3, ClusterSolver::Dense)).unwrap();
    assert!(run.report.max_residual() <= 1e-10, "{:e}", run.report.max_residual());
}

#[test]
fn singleton_clusters_reproduce_the_anchor_solutions() {
    let sys = system();
    let g = grid(&sys);
    let run = algorithm_one(&sys, &g, &options(g.len(), ClusterSolver::Dense)).unwrap();
    // with K = m every cluster is its own anchor, already converged
    assert!(run.report.max_residual() <= 1e-10);
}

#[test]
fn clustered_sweep_uses_fewer_newton_steps_than_standard_sweep() {
    let sys = system();
    let g = grid(&sys);
    let opts = options(4, ClusterSolver::Gmrest);
    let run = algorithm_one(&sys, &g, &opts).unwrap();
    let base = standard_newton_sweep(&sys, &g, &opts.newton, true).unwrap();
    assert!(run.report.total_steps() < base.report.total_steps());
    assert!(run.report.max_residual() <= 1e-3);
    assert_eq!(run.report.rows.len(), g.len());
}
