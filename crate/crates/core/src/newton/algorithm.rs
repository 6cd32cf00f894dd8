//! The clustered sweep: one converged anchor per cluster, then a single
//! low-rank Newton step for all cluster members at once.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::cluster::{build_cluster_newton_equation, cluster_newton_update};
use super::equation::MatrixEquationSpec;
use super::report::{NewtonReport, ReportRow};
use super::single::{newton_solve_single, NewtonOptions, NewtonOutcome};
use crate::clustering::{split_clusters, Cluster, ParameterGrid, ParameterPoint};
use crate::error::{Error, Result};
use crate::linalg::LuFactorization;
use crate::lowrank::LowRankMatrix;
use crate::model::ParametricSystem;
use crate::solvers::{
    chebyshevt, gmrest, ChebyshevParams, LeftPreconditioner, MeanPreconditioner, SolveOutcome,
    SolverOptions, TraceRow,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterSolver {
    Gmrest,
    Chebyshev(ChebyshevParams),
    /// Column-by-column sparse LU; exact up to roundoff, for reference runs.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStepOptions {
    pub solver: ClusterSolver,
    pub solver_opts: SolverOptions,
    /// Attempt a second chord step with the full-rank residual as right-hand side.
    pub second_step: bool,
}

impl Default for ClusterStepOptions {
    fn default() -> Self {
        ClusterStepOptions {
            solver: ClusterSolver::Gmrest,
            solver_opts: SolverOptions::default(),
            second_step: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub clusters: usize,
    pub newton: NewtonOptions,
    pub step: ClusterStepOptions,
    /// Start each anchor solve from the previous anchor instead of `b_D`.
    pub chaining: bool,
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub cluster: Cluster,
    pub anchor: Vec<f64>,
    pub x: LowRankMatrix,
    pub solve: SolveOutcome,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Global approximation, one column per grid ordinal.
    pub x: LowRankMatrix,
    pub report: NewtonReport,
    pub clusters: Vec<ClusterResult>,
}

impl RunOutcome {
    /// `(cluster, iteration, residual, rank)` rows of all solver traces.
    pub fn trace_rows(&self) -> Vec<(usize, TraceRow)> {
        self.clusters
            .iter()
            .flat_map(|c| c.solve.trace.iter().map(move |t| (c.cluster.index + 1, *t)))
            .collect()
    }
}

/// Solves a cluster equation with the configured method.
pub fn solve_cluster_equation<P: LeftPreconditioner + ?Sized>(
    spec: &MatrixEquationSpec,
    precond: &P,
    step: &ClusterStepOptions,
) -> Result<SolveOutcome> {
    match step.solver {
        ClusterSolver::Gmrest => gmrest(spec, precond, &step.solver_opts),
        ClusterSolver::Chebyshev(params) => chebyshevt(spec, precond, &params, &step.solver_opts),
        ClusterSolver::Dense => dense_solve(spec),
    }
}

fn dense_solve(spec: &MatrixEquationSpec) -> Result<SolveOutcome> {
    let (m, n) = spec.shape();
    let rhs = spec.rhs().to_dense();
    let mut x = DMatrix::zeros(m, n);
    for j in 0..n {
        let lu = LuFactorization::factor(&spec.column_operator(j)?)?;
        let col = lu.solve(rhs.column(j).as_slice())?;
        x.column_mut(j).copy_from_slice(&col);
    }
    Ok(SolveOutcome {
        x: LowRankMatrix::from_dense(&x),
        iterations: n,
        converged: true,
        residual: 0.0,
        stagnated: false,
        trace: Vec::new(),
    })
}

/// Anchor solves in cluster order, chaining initial guesses if requested.
pub fn solve_anchors(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    clusters: &[Cluster],
    newton: &NewtonOptions,
    chaining: bool,
) -> Result<Vec<NewtonOutcome>> {
    let mut out: Vec<NewtonOutcome> = Vec::with_capacity(clusters.len());
    for c in clusters {
        let p = grid.point(c.upper_median())?;
        let guess = match out.last() {
            Some(prev) if chaining => prev.x.clone(),
            _ => sys.b_d.clone(),
        };
        let anchor = newton_solve_single(sys, &p, &guess, newton).map_err(|e| Error::AnchorFailed {
            cluster: c.index + 1,
            source: Box::new(e),
        })?;
        out.push(anchor);
    }
    Ok(out)
}

/// Relative residual of every column of `x` at its parameters.
pub fn column_residuals(
    sys: &ParametricSystem,
    x: &LowRankMatrix,
    pts: &[ParameterPoint],
) -> Result<Vec<f64>> {
    pts.iter()
        .enumerate()
        .map(|(j, p)| Ok(sys.relative_residual(&x.column(j)?, p)))
        .collect()
}

fn cluster_step(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    cluster: &Cluster,
    anchor: &[f64],
    step: &ClusterStepOptions,
) -> Result<ClusterResult> {
    let pts = cluster.points(grid)?;
    let anchor_p = grid.point(cluster.upper_median())?;
    let spec = build_cluster_newton_equation(sys, anchor, &anchor_p, &pts)?;
    let precond = MeanPreconditioner::for_cluster(sys, anchor, &pts)?;
    let mut solve = solve_cluster_equation(&spec, &precond, step)?;
    let mut x = cluster_newton_update(anchor, &solve.x)?;
    if step.second_step {
        // the residual of the updated block is no longer of low rank
        let mut r = DMatrix::zeros(sys.dim(), pts.len());
        for (j, p) in pts.iter().enumerate() {
            r.column_mut(j).copy_from_slice(&sys.residual(&x.column(j)?, p));
        }
        let spec2 = spec.with_rhs(LowRankMatrix::from_dense(&r))?;
        let second = solve_cluster_equation(&spec2, &precond, step)?;
        x = x.add(&second.x)?;
        solve = SolveOutcome {
            iterations: solve.iterations + second.iterations,
            converged: solve.converged && second.converged,
            stagnated: solve.stagnated || second.stagnated,
            trace: [solve.trace, second.trace].concat(),
            ..second
        };
    }
    if !solve.converged {
        log::warn!(
            "cluster {}: inner solve stopped at relative residual {:.3e}",
            cluster.index + 1,
            solve.residual
        );
    }
    Ok(ClusterResult {
        cluster: cluster.clone(),
        anchor: anchor.to_vec(),
        x,
        solve,
    })
}

/// Clustered low-rank Newton sweep over the whole grid.
///
/// Anchors are solved sequentially (each may start from the previous one);
/// the cluster matrix equations are independent and solved in parallel.
/// Results are ordered by cluster regardless of completion order.
pub fn algorithm_one(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let clusters = split_clusters(grid, opts.clusters)?;
    let anchors = solve_anchors(sys, grid, &clusters, &opts.newton, opts.chaining)?;
    let results: Vec<ClusterResult> = clusters
        .par_iter()
        .zip(anchors.par_iter())
        .map(|(c, a)| cluster_step(sys, grid, c, &a.x, &opts.step))
        .collect::<Result<_>>()?;

    let mut report = NewtonReport {
        anchor_steps: anchors.iter().map(|a| a.steps).sum(),
        cluster_steps: clusters.len() * if opts.step.second_step { 2 } else { 1 },
        ..NewtonReport::default()
    };
    for res in &results {
        let pts = res.cluster.points(grid)?;
        let residuals = column_residuals(sys, &res.x, &pts)?;
        for (off, col) in res.cluster.columns.clone().enumerate() {
            report.rows.push(ReportRow {
                p: col + 1,
                index: grid.multi_index_of(col)?,
                rel_residual: residuals[off],
                cluster: res.cluster.index + 1,
                method: "cluster".into(),
            });
        }
        report.solver_iterations.push(res.solve.iterations);
        report.ranks.push(res.x.rank());
        if !res.solve.converged {
            report.flagged_clusters.push(res.cluster.index + 1);
        }
    }
    let blocks: Vec<LowRankMatrix> = results.iter().map(|r| r.x.clone()).collect();
    let x = LowRankMatrix::hcat(&blocks)?;
    report.wall_time = start.elapsed();
    Ok(RunOutcome {
        x,
        report,
        clusters: results,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Converged state per grid column; `None` where Newton failed.
    pub columns: Vec<Option<Vec<f64>>>,
    pub report: NewtonReport,
}

/// Independent Newton solves for every grid column in little-endian order.
///
/// With `warm_start`, each solve starts from the previous solution; after a
/// failure the next solve starts from `b_D` again.
pub fn standard_newton_sweep(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    newton: &NewtonOptions,
    warm_start: bool,
) -> Result<SweepOutcome> {
    let start = Instant::now();
    let mut columns = Vec::with_capacity(grid.len());
    let mut report = NewtonReport::default();
    let mut guess = sys.b_d.clone();
    for col in 0..grid.len() {
        let p = grid.point(col)?;
        let (rel, method, x) = match newton_solve_single(sys, &p, &guess, newton) {
            Ok(out) => {
                report.anchor_steps += out.steps;
                let rel = sys.relative_residual(&out.x, &p);
                guess = if warm_start { out.x.clone() } else { sys.b_d.clone() };
                (rel, "standard", Some(out.x))
            }
            Err(Error::NewtonNotConverged { steps, residual }) => {
                log::warn!("standard Newton failed at ordinal {}", col + 1);
                report.anchor_steps += steps;
                guess = sys.b_d.clone();
                let base = sys.residual_norm(&sys.b_d, &p);
                (residual / base, "standard-failed", None)
            }
            Err(e) => return Err(e),
        };
        report.rows.push(ReportRow {
            p: col + 1,
            index: grid.multi_index_of(col)?,
            rel_residual: rel,
            cluster: 0,
            method: method.into(),
        });
        columns.push(x);
    }
    report.wall_time = start.elapsed();
    Ok(SweepOutcome { columns, report })
}
