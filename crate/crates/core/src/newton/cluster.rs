//! One Newton step for all members of a cluster as a matrix equation.
//!
//! With anchor state `x̃` and member parameters `pⱼ`, the stacked updates `S`
//! satisfy `Σ Aᵢ·S·Dᵢ = B` where column `j` of the left side is `A(x̃; pⱼ)·sⱼ`
//! and column `j` of `B` is `b_D − g(x̃; pⱼ)`.

use crate::clustering::{diagonals_of, ClusterDiagonals, ParameterPoint};
use crate::error::{Error, Result};
use crate::lowrank::LowRankMatrix;
use crate::model::ParametricSystem;

use super::equation::{EquationTerm, MatrixEquationSpec, RightFactor};
use nalgebra::DMatrix;

/// Whether λ and ρ vary across the members.
fn four_parameter(sys: &ParametricSystem, pts: &[ParameterPoint]) -> bool {
    let r = sys.reference;
    pts.iter().any(|p| p.lambda != r.lambda || p.rho != r.rho)
}

/// Right-hand side with columns `b_D − g(x̃; pⱼ)`, of rank at most 3 (μ, ν
/// varying) or 5 (μ, ν, λ, ρ varying).
///
/// The outer products are centred at the first member with the anchor
/// parameters `p̃`, i.e. `(b_D − g(x̃; p̃))⊗1 − Σ (term)⊗(dⱼ − d̃)`, which is
/// the same matrix as the uncentred form but avoids cancelling large
/// reference contributions when `x̃` is converged.
pub fn assemble_cluster_rhs(
    sys: &ParametricSystem,
    x_anchor: &[f64],
    anchor: &ParameterPoint,
    pts: &[ParameterPoint],
) -> Result<LowRankMatrix> {
    if x_anchor.len() != sys.dim() {
        return Err(Error::dim(format!(
            "anchor of length {} for system of dimension {}",
            x_anchor.len(),
            sys.dim()
        )));
    }
    let m = sys.dim();
    let n = pts.len();
    let r0 = sys.residual(x_anchor, anchor);
    let a1x = sys.a1.mul_vec(x_anchor);
    let a2x = sys.a2.mul_vec(x_anchor);
    let gm = sys.g_mu.eval(x_anchor);
    let mu_part: Vec<f64> = a1x.iter().zip(&gm).map(|(a, b)| a + b).collect();

    let mut left: Vec<Vec<f64>> = vec![r0];
    let mut right: Vec<Vec<f64>> = vec![vec![1.0; n]];
    left.push(mu_part.iter().map(|v| -v).collect());
    right.push(pts.iter().map(|p| p.mu - anchor.mu).collect());
    left.push(a2x.iter().map(|v| -v).collect());
    right.push(pts.iter().map(|p| p.nu * p.rho - anchor.nu * anchor.rho).collect());
    if pts.iter().any(|p| p.lambda != anchor.lambda || p.rho != anchor.rho) {
        let a3x = sys.a3.mul_vec(x_anchor);
        let gl = sys.g_lambda.eval(x_anchor);
        left.push(a3x.iter().zip(&gl).map(|(a, b)| -(a + b)).collect());
        right.push(pts.iter().map(|p| p.lambda - anchor.lambda).collect());
        left.push(sys.g_rho.eval(x_anchor).iter().map(|v| -v).collect());
        right.push(pts.iter().map(|p| p.rho - anchor.rho).collect());
    }
    let k = left.len();
    let u = DMatrix::from_fn(m, k, |i, j| left[j][i]);
    let v = DMatrix::from_fn(n, k, |i, j| right[j][i]);
    LowRankMatrix::new(u, v)
}

/// Left operator terms of the cluster step with linearization `lin`
/// (the Jacobians for Newton, the frozen-coefficient operators for Picard).
pub(crate) fn cluster_terms<F>(
    sys: &ParametricSystem,
    d: &ClusterDiagonals,
    four: bool,
    lin: F,
) -> Vec<EquationTerm>
where
    F: Fn(&crate::model::QuadraticForm) -> crate::linalg::SparseMatrix,
{
    let r = sys.reference;
    let diag = |v: &Vec<f64>| RightFactor::Diagonal(v.clone());
    let (jm, jl, jr) = (lin(&sys.g_mu), lin(&sys.g_lambda), lin(&sys.g_rho));
    if four {
        vec![
            EquationTerm::new("A0", sys.a0.clone(), RightFactor::Identity),
            EquationTerm::new("A1 D_mu-", sys.a1.clone(), diag(&d.mu_shift)),
            EquationTerm::new("A2 D_nurho-", sys.a2.clone(), diag(&d.nu_rho_shift)),
            EquationTerm::new("A3 D_lambda-", sys.a3.clone(), diag(&d.lambda_shift)),
            EquationTerm::new("J_mu D_mu", jm, diag(&d.mu)),
            EquationTerm::new("J_lambda D_lambda", jl, diag(&d.lambda)),
            EquationTerm::new("J_rho D_rho", jr, diag(&d.rho)),
        ]
    } else {
        vec![
            EquationTerm::new("A0", sys.a0.clone(), RightFactor::Identity),
            EquationTerm::new("A1 D_mu-", sys.a1.clone(), diag(&d.mu_shift)),
            EquationTerm::new("rho_f A2 D_nu-", sys.a2.scale(r.rho), diag(&d.nu_shift)),
            EquationTerm::new("J_mu D_mu", jm, diag(&d.mu)),
            EquationTerm::new("lambda_s J_lambda", jl.scale(r.lambda), RightFactor::Identity),
            EquationTerm::new("rho_f J_rho", jr.scale(r.rho), RightFactor::Identity),
        ]
    }
}

/// The Newton step on a cluster: `Σ Aᵢ·S·Dᵢ = B_k` with the Jacobian terms at `x̃`.
///
/// `anchor` are the parameters at which `x̃` was computed.
pub fn build_cluster_newton_equation(
    sys: &ParametricSystem,
    x_anchor: &[f64],
    anchor: &ParameterPoint,
    pts: &[ParameterPoint],
) -> Result<MatrixEquationSpec> {
    let four = four_parameter(sys, pts);
    let d = diagonals_of(pts, sys.reference);
    let terms = cluster_terms(sys, &d, four, |q| q.jacobian(x_anchor));
    let rhs = assemble_cluster_rhs(sys, x_anchor, anchor, pts)?;
    MatrixEquationSpec::new(terms, rhs)
}

/// `X = x̃⊗(1,…,1) + S`.
pub fn cluster_newton_update(x_anchor: &[f64], step: &LowRankMatrix) -> Result<LowRankMatrix> {
    if x_anchor.len() != step.nrows() {
        return Err(Error::dim(format!(
            "anchor of length {} for update with {} rows",
            x_anchor.len(),
            step.nrows()
        )));
    }
    LowRankMatrix::from_outer(x_anchor, &vec![1.0; step.ncols()]).add(step)
}

/// Global approximation `[X¹ | … | Xᴷ]`, columns in little-endian order.
pub fn assemble_global(blocks: &[LowRankMatrix]) -> Result<LowRankMatrix> {
    LowRankMatrix::hcat(blocks)
}
