//! θ-scheme time stepping, per problem and per cluster.
//!
//! With mass operator `M(ρ) = ρ·A_t^f + ρ_s·A_t^s`, the residual at time
//! `tᵢ` for a trial state `x` is
//!
//! ```text
//! r(x) = Θ(bᵢ − g(x)) + (I−Θ)(bᵢ₋₁ − g(x_prev)) + M/Δt·(x_prev − x)
//! ```
//!
//! and Newton solves `(M/Δt + Θ·A(x))·s = r(x)`. `Θ` is `θ` on rows that
//! carry mass and `1` on massless rows, which are always implicit.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::clustering::{split_clusters, Cluster, ParameterGrid, ParameterPoint};
use crate::error::{Error, Result};
use crate::linalg::{norm2, SparseMatrix};
use crate::lowrank::LowRankMatrix;
use crate::model::ParametricSystem;
use crate::newton::{
    algorithm_one, assemble_cluster_rhs, cluster_newton_update, cluster_terms, newton_iterate,
    newton_solve_single, solve_cluster_equation, ClusterStepOptions, EquationTerm,
    MatrixEquationSpec, NewtonOptions, RightFactor, RunOptions,
};
use crate::solvers::{mean_point, MeanPreconditioner};

/// Right-hand side data `b(t)`.
pub type Forcing<'a> = dyn Fn(f64) -> Vec<f64> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    /// Number of steps `w`; nodes are `tᵢ = i·Δt`, `i = 0..=w`.
    pub steps: usize,
    pub theta: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize, theta: f64) -> Result<Self> {
        if steps == 0 || !(t_final > 0.0) || !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidConfig(format!(
                "time grid needs T > 0, w >= 1 and theta in [0, 1], got T = {t_final}, w = {steps}, theta = {theta}"
            )));
        }
        Ok(TimeGrid {
            t_final,
            steps,
            theta,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }
}

/// Per-row weights `Θ`.
pub fn theta_weights(sys: &ParametricSystem, theta: f64) -> Vec<f64> {
    sys.implicit_rows()
        .into_iter()
        .map(|implicit| if implicit { 1.0 } else { theta })
        .collect()
}

/// Data shared by all Newton steps at one time level for one parameter.
struct StepData<'a> {
    sys: &'a ParametricSystem,
    p: ParameterPoint,
    weights: Vec<f64>,
    mass_dt: SparseMatrix,
    b_cur: &'a [f64],
    /// `(I−Θ)(bᵢ₋₁ − g(x_prev)) + M/Δt·x_prev`
    fixed: Vec<f64>,
}

impl<'a> StepData<'a> {
    fn new(
        sys: &'a ParametricSystem,
        p: &ParameterPoint,
        x_prev: &[f64],
        b_prev: &[f64],
        b_cur: &'a [f64],
        tg: &TimeGrid,
    ) -> Self {
        let weights = theta_weights(sys, tg.theta);
        let mass_dt = sys.mass(p.rho).scale(1.0 / tg.dt());
        let g_prev = sys.apply(x_prev, p);
        let mx = mass_dt.mul_vec(x_prev);
        let fixed = (0..sys.dim())
            .map(|i| (1.0 - weights[i]) * (b_prev[i] - g_prev[i]) + mx[i])
            .collect();
        StepData {
            sys,
            p: *p,
            weights,
            mass_dt,
            b_cur,
            fixed,
        }
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let g = self.sys.apply(x, &self.p);
        let mx = self.mass_dt.mul_vec(x);
        (0..x.len())
            .map(|i| self.weights[i] * (self.b_cur[i] - g[i]) + self.fixed[i] - mx[i])
            .collect()
    }

    fn operator(&self, x: &[f64]) -> SparseMatrix {
        let a = self.sys.jacobian(x, &self.p).scale_rows(&self.weights);
        self.mass_dt.add(&a).expect("same dimension")
    }
}

/// Residual of the θ-step equation at `x`.
pub fn theta_residual(
    sys: &ParametricSystem,
    p: &ParameterPoint,
    x: &[f64],
    x_prev: &[f64],
    b_prev: &[f64],
    b_cur: &[f64],
    tg: &TimeGrid,
) -> Vec<f64> {
    StepData::new(sys, p, x_prev, b_prev, b_cur, tg).residual(x)
}

/// Left operator `M/Δt + Θ·A(x; p)` of the θ-step Newton equation.
pub fn theta_operator(sys: &ParametricSystem, p: &ParameterPoint, x: &[f64], tg: &TimeGrid) -> SparseMatrix {
    let weights = theta_weights(sys, tg.theta);
    sys.mass(p.rho)
        .scale(1.0 / tg.dt())
        .add(&sys.jacobian(x, p).scale_rows(&weights))
        .expect("same dimension")
}

/// Newton iteration for the state at `tᵢ`, started from `x_prev`; stops at
/// `‖r‖₂ ≤ ε_N`.
pub fn theta_step_single(
    sys: &ParametricSystem,
    p: &ParameterPoint,
    x_prev: &[f64],
    b_prev: &[f64],
    b_cur: &[f64],
    tg: &TimeGrid,
    newton: &NewtonOptions,
) -> Result<Vec<f64>> {
    let data = StepData::new(sys, p, x_prev, b_prev, b_cur, tg);
    let out = newton_iterate(x_prev, newton, |x| data.residual(x), |x| data.operator(x))?;
    Ok(out.x)
}

/// States `x(t₀), …, x(t_w)` of one parameter combination.
pub fn theta_trajectory_single(
    sys: &ParametricSystem,
    p: &ParameterPoint,
    x0: &[f64],
    tg: &TimeGrid,
    newton: &NewtonOptions,
    forcing: &Forcing,
) -> Result<Vec<Vec<f64>>> {
    let mut states = vec![x0.to_vec()];
    let mut b_prev = forcing(0.0);
    for i in 1..=tg.steps {
        let b_cur = forcing(tg.time(i));
        let x = theta_step_single(sys, p, states.last().unwrap(), &b_prev, &b_cur, tg, newton)
            .map_err(|e| Error::TimeStepFailed {
                step: i,
                source: Box::new(e),
            })?;
        states.push(x);
        b_prev = b_cur;
    }
    Ok(states)
}

/// How the previous-time residual term of the cluster right-hand side is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsMode {
    /// Column-by-column evaluation of `g(X_prev; pⱼ)`; full rank.
    Exact,
    /// Evaluation at the previous anchor only; rank at most 3 (or 5).
    #[default]
    Approximated,
}

fn scale_rows_lr(x: &LowRankMatrix, w: &[f64]) -> Result<LowRankMatrix> {
    x.map_left(|u| {
        let mut u = u.clone();
        for (i, wi) in w.iter().enumerate() {
            u.row_mut(i).scale_mut(*wi);
        }
        Ok(u)
    })
}

/// `(b − b_D)⊗1 + (b_D − g(x̃; pⱼ))ⱼ`, i.e. columns `b − g(x̃; pⱼ)`.
fn shifted_cluster_rhs(
    sys: &ParametricSystem,
    b: &[f64],
    x_anchor: &[f64],
    anchor: &ParameterPoint,
    pts: &[ParameterPoint],
) -> Result<LowRankMatrix> {
    let base = assemble_cluster_rhs(sys, x_anchor, anchor, pts)?;
    let db: Vec<f64> = b.iter().zip(&sys.b_d).map(|(a, c)| a - c).collect();
    if db.iter().all(|v| *v == 0.0) {
        return Ok(base);
    }
    base.add(&LowRankMatrix::from_outer(&db, &vec![1.0; pts.len()]))
}

/// Inputs of one cluster time step.
pub struct ClusterTimeStep<'a> {
    pub pts: &'a [ParameterPoint],
    /// Parameters of the anchor.
    pub anchor: ParameterPoint,
    /// Anchor state at `tᵢ` (converged θ-step).
    pub x_anchor: &'a [f64],
    /// Anchor state at `tᵢ₋₁`; used by [`RhsMode::Approximated`].
    pub x_anchor_prev: &'a [f64],
    /// Cluster states at `tᵢ₋₁`.
    pub x_prev: &'a LowRankMatrix,
    pub b_prev: &'a [f64],
    pub b_cur: &'a [f64],
}

/// The matrix equation `M/Δt·S·D + Θ·F(S, x̃) = B` of one cluster time step.
pub fn build_theta_cluster_equation(
    sys: &ParametricSystem,
    step: &ClusterTimeStep,
    tg: &TimeGrid,
    mode: RhsMode,
) -> Result<MatrixEquationSpec> {
    let pts = step.pts;
    let n = pts.len();
    let weights = theta_weights(sys, tg.theta);
    let implicit: Vec<f64> = weights.iter().map(|w| 1.0 - w).collect();
    let dt = tg.dt();
    let rho: Vec<f64> = pts.iter().map(|p| p.rho).collect();
    let four = pts
        .iter()
        .any(|p| p.lambda != sys.reference.lambda || p.rho != sys.reference.rho);
    let d = crate::clustering::diagonals_of(pts, sys.reference);

    let mut terms = vec![
        EquationTerm::new("M_f/dt D_rho", sys.mass_fluid.scale(1.0 / dt), RightFactor::Diagonal(rho.clone())),
        EquationTerm::new("rho_s M_s/dt", sys.mass_solid.scale(sys.rho_s / dt), RightFactor::Identity),
    ];
    for t in cluster_terms(sys, &d, four, |q| q.jacobian(step.x_anchor)) {
        terms.push(EquationTerm {
            left: t.left.scale_rows(&weights),
            ..t
        });
    }

    let cur = shifted_cluster_rhs(sys, step.b_cur, step.x_anchor, &step.anchor, pts)?;
    let prev = match mode {
        RhsMode::Approximated => {
            shifted_cluster_rhs(sys, step.b_prev, step.x_anchor_prev, &step.anchor, pts)?
        }
        RhsMode::Exact => {
            let mut r = DMatrix::zeros(sys.dim(), n);
            for (j, p) in pts.iter().enumerate() {
                let g = sys.apply(&step.x_prev.column(j)?, p);
                for i in 0..sys.dim() {
                    r[(i, j)] = step.b_prev[i] - g[i];
                }
            }
            LowRankMatrix::from_dense(&r)
        }
    };
    let diff = step
        .x_prev
        .sub(&LowRankMatrix::from_outer(step.x_anchor, &vec![1.0; n]))?;
    let mass_diff = LowRankMatrix::linear_combination(&[
        (1.0 / dt, &diff.apply_operator(&sys.mass_fluid, Some(&rho))?),
        (sys.rho_s / dt, &diff.apply_operator(&sys.mass_solid, None)?),
    ])?;
    let rhs = LowRankMatrix::linear_combination(&[
        (1.0, &scale_rows_lr(&cur, &weights)?),
        (1.0, &scale_rows_lr(&prev, &implicit)?),
        (1.0, &mass_diff),
    ])?
    .recompress(n);
    MatrixEquationSpec::new(terms, rhs)
}

/// One cluster time step; returns `X(tᵢ) = x̃⊗1 + S` and the inner solve outcome.
pub fn theta_cluster_step(
    sys: &ParametricSystem,
    step: &ClusterTimeStep,
    tg: &TimeGrid,
    mode: RhsMode,
    opts: &ClusterStepOptions,
) -> Result<(LowRankMatrix, crate::solvers::SolveOutcome)> {
    let spec = build_theta_cluster_equation(sys, step, tg, mode)?;
    let pm = mean_point(step.pts, sys.reference);
    let precond = MeanPreconditioner::from_matrix(&theta_operator(sys, &pm, step.x_anchor, tg))?;
    let solve = solve_cluster_equation(&spec, &precond, opts)?;
    let x = cluster_newton_update(step.x_anchor, &solve.x)?;
    Ok((x, solve))
}

/// Where the trajectories start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    #[default]
    Dirichlet,
    /// Clustered stationary solve with the same options.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    /// 1-based ordinal.
    pub p: usize,
    /// `‖r(x)‖₂ / ‖r(b_D)‖₂` of the θ-step residual against the previous
    /// cluster state.
    pub rel_residual: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub rows: Vec<TrajectoryRow>,
    /// States at `t_w`, one column per ordinal.
    pub x: LowRankMatrix,
    pub anchor_steps: usize,
    /// `(step, cluster)` pairs whose inner solve did not converge.
    pub flagged: Vec<(usize, usize)>,
}

impl TrajectoryOutcome {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,p,rel_residual\n");
        for r in &self.rows {
            writeln!(out, "{},{},{:.6e}", r.step, r.p, r.rel_residual).unwrap();
        }
        out
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_residual).fold(0.0, f64::max)
    }
}

struct ClusterTrajectory {
    rows: Vec<TrajectoryRow>,
    x: LowRankMatrix,
    anchor_steps: usize,
    flagged: Vec<usize>,
}

fn cluster_trajectory(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    cluster: &Cluster,
    start: (&[f64], &LowRankMatrix),
    tg: &TimeGrid,
    opts: &RunOptions,
    mode: RhsMode,
    forcing: &Forcing,
) -> Result<ClusterTrajectory> {
    let pts = cluster.points(grid)?;
    let anchor = grid.point(cluster.upper_median())?;
    let mut x_anchor_prev = start.0.to_vec();
    let mut x_prev = start.1.clone();
    let mut b_prev = forcing(0.0);
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    let mut anchor_steps = 0;
    for i in 1..=tg.steps {
        let b_cur = forcing(tg.time(i));
        let data = StepData::new(sys, &anchor, &x_anchor_prev, &b_prev, &b_cur, tg);
        let fail = |e| Error::TimeStepFailed {
            step: i,
            source: Box::new(Error::AnchorFailed {
                cluster: cluster.index + 1,
                source: Box::new(e),
            }),
        };
        let out = newton_iterate(&x_anchor_prev, &opts.newton, |x| data.residual(x), |x| data.operator(x))
            .map_err(fail)?;
        anchor_steps += out.steps;
        let step = ClusterTimeStep {
            pts: &pts,
            anchor,
            x_anchor: &out.x,
            x_anchor_prev: &x_anchor_prev,
            x_prev: &x_prev,
            b_prev: &b_prev,
            b_cur: &b_cur,
        };
        let (x, solve) = theta_cluster_step(sys, &step, tg, mode, &opts.step)
            .map_err(|e| Error::TimeStepFailed {
                step: i,
                source: Box::new(e),
            })?;
        if !solve.converged {
            flagged.push(i);
        }
        for (j, p) in pts.iter().enumerate() {
            let prev_j = x_prev.column(j)?;
            let sd = StepData::new(sys, p, &prev_j, &b_prev, &b_cur, tg);
            let base = norm2(&sd.residual(&sys.b_d));
            let r = norm2(&sd.residual(&x.column(j)?));
            rows.push(TrajectoryRow {
                step: i,
                p: cluster.columns.start + j + 1,
                rel_residual: if base == 0.0 { r } else { r / base },
            });
        }
        x_anchor_prev = out.x;
        x_prev = x;
        b_prev = b_cur;
    }
    Ok(ClusterTrajectory {
        rows,
        x: x_prev,
        anchor_steps,
        flagged,
    })
}

/// Clustered θ-scheme over the whole grid. Clusters are independent in time
/// and run concurrently; each recomputes its anchor at every step.
pub fn theta_trajectory_clustered(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    tg: &TimeGrid,
    opts: &RunOptions,
    mode: RhsMode,
    initial: InitialState,
    forcing: &Forcing,
) -> Result<TrajectoryOutcome> {
    let clusters = split_clusters(grid, opts.clusters)?;
    let starts: Vec<(Vec<f64>, LowRankMatrix)> = match initial {
        InitialState::Dirichlet => clusters
            .iter()
            .map(|c| (sys.b_d.clone(), LowRankMatrix::from_outer(&sys.b_d, &vec![1.0; c.len()])))
            .collect(),
        InitialState::Stationary => algorithm_one(sys, grid, opts)?
            .clusters
            .into_iter()
            .map(|c| (c.anchor, c.x))
            .collect(),
    };
    let parts: Vec<ClusterTrajectory> = clusters
        .par_iter()
        .zip(starts.par_iter())
        .map(|(c, (xa, x0))| cluster_trajectory(sys, grid, c, (xa, x0), tg, opts, mode, forcing))
        .collect::<Result<_>>()?;

    let mut rows: Vec<TrajectoryRow> = parts.iter().flat_map(|p| p.rows.iter().copied()).collect();
    rows.sort_by_key(|r| (r.step, r.p));
    let flagged = parts
        .iter()
        .zip(&clusters)
        .flat_map(|(p, c)| p.flagged.iter().map(move |&s| (s, c.index + 1)))
        .collect();
    let blocks: Vec<LowRankMatrix> = parts.iter().map(|p| p.x.clone()).collect();
    Ok(TrajectoryOutcome {
        rows,
        x: LowRankMatrix::hcat(&blocks)?,
        anchor_steps: parts.iter().map(|p| p.anchor_steps).sum(),
        flagged,
    })
}

/// Stationary solution used as reference by trajectory checks.
pub fn stationary_solution(
    sys: &ParametricSystem,
    p: &ParameterPoint,
    newton: &NewtonOptions,
) -> Result<Vec<f64>> {
    Ok(newton_solve_single(sys, p, &sys.b_d, newton)?.x)
}
