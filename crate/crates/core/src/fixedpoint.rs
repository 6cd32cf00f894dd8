//! Fixed-point (Picard/Oseen) variant of the cluster step.
//!
//! Every nonlinear term is frozen at the anchor, `N(x) ≈ F_N(x̃)·x`, and the
//! cluster equation is solved for the states themselves:
//! `Σ Aᵢ·X·Dᵢ = b_D⊗(1,…,1)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::clustering::{diagonals_of, split_clusters, ParameterGrid, ParameterPoint};
use crate::error::Result;
use crate::lowrank::LowRankMatrix;
use crate::model::ParametricSystem;
use crate::newton::{
    build_cluster_newton_equation, cluster_newton_update, cluster_terms, column_residuals,
    solve_anchors, solve_cluster_equation, ClusterStepOptions, MatrixEquationSpec, NewtonOptions,
};
use crate::solvers::MeanPreconditioner;

/// The fixed-point equation for the members `pts` with coefficients frozen at `x̃`.
pub fn build_cluster_picard_equation(
    sys: &ParametricSystem,
    x_anchor: &[f64],
    pts: &[ParameterPoint],
) -> Result<MatrixEquationSpec> {
    let r = sys.reference;
    let four = pts.iter().any(|p| p.lambda != r.lambda || p.rho != r.rho);
    let d = diagonals_of(pts, r);
    let terms = cluster_terms(sys, &d, four, |q| q.picard(x_anchor));
    let rhs = LowRankMatrix::from_outer(&sys.b_d, &vec![1.0; pts.len()]);
    MatrixEquationSpec::new(terms, rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardRow {
    /// 1-based ordinal.
    pub p: usize,
    pub newton: f64,
    pub picard: f64,
    /// Residual of the shared anchor used as the approximation for `p`.
    pub anchor: f64,
}

#[derive(Debug, Clone)]
pub struct PicardComparison {
    pub rows: Vec<PicardRow>,
}

impl PicardComparison {
    pub fn max_newton(&self) -> f64 {
        self.rows.iter().map(|r| r.newton).fold(0.0, f64::max)
    }

    pub fn max_picard(&self) -> f64 {
        self.rows.iter().map(|r| r.picard).fold(0.0, f64::max)
    }

    /// `max picard / max newton`.
    pub fn ratio(&self) -> f64 {
        self.max_picard() / self.max_newton()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,rel_residual_newton,rel_residual_picard,rel_residual_anchor\n");
        for r in &self.rows {
            writeln!(out, "{},{:.6e},{:.6e},{:.6e}", r.p, r.newton, r.picard, r.anchor).unwrap();
        }
        out
    }
}

/// Runs the Newton and the fixed-point cluster step from the same anchors.
pub fn compare_newton_vs_picard(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    clusters: usize,
    newton: &NewtonOptions,
    step: &ClusterStepOptions,
) -> Result<PicardComparison> {
    let clusters = split_clusters(grid, clusters)?;
    let anchors = solve_anchors(sys, grid, &clusters, newton, true)?;
    let parts: Vec<Vec<PicardRow>> = clusters
        .par_iter()
        .zip(anchors.par_iter())
        .map(|(c, a)| {
            let pts = c.points(grid)?;
            let anchor_p = grid.point(c.upper_median())?;
            let x = &a.x;

            let spec = build_cluster_newton_equation(sys, x, &anchor_p, &pts)?;
            let pre = MeanPreconditioner::for_cluster(sys, x, &pts)?;
            let s = solve_cluster_equation(&spec, &pre, step)?;
            let xn = cluster_newton_update(x, &s.x)?;

            let spec = build_cluster_picard_equation(sys, x, &pts)?;
            let pre = MeanPreconditioner::for_cluster_picard(sys, x, &pts)?;
            let xp = solve_cluster_equation(&spec, &pre, step)?.x;

            let rn = column_residuals(sys, &xn, &pts)?;
            let rp = column_residuals(sys, &xp, &pts)?;
            Ok(pts
                .iter()
                .enumerate()
                .map(|(j, p)| PicardRow {
                    p: c.columns.start + j + 1,
                    newton: rn[j],
                    picard: rp[j],
                    anchor: sys.relative_residual(x, p),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(PicardComparison {
        rows: parts.into_iter().flatten().collect(),
    })
}
