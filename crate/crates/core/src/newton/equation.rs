//! Generalized Sylvester equations `Σ Aᵢ·X·Dᵢ = B` with sparse `Aᵢ` and diagonal `Dᵢ`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{diago_block, SparseMatrix};
use crate::lowrank::LowRankMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum RightFactor {
    Identity,
    /// Diagonal entries, one per column of `X`.
    Diagonal(Vec<f64>),
}

impl RightFactor {
    fn entry(&self, i: usize) -> f64 {
        match self {
            RightFactor::Identity => 1.0,
            RightFactor::Diagonal(d) => d[i],
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquationTerm {
    pub left: SparseMatrix,
    pub right: RightFactor,
    pub label: String,
}

impl EquationTerm {
    pub fn new(label: &str, left: SparseMatrix, right: RightFactor) -> Self {
        EquationTerm {
            left,
            right,
            label: label.to_string(),
        }
    }
}

/// Left operator `X ↦ Σ Aᵢ·X·Dᵢ` together with a low-rank right-hand side.
#[derive(Debug, Clone)]
pub struct MatrixEquationSpec {
    terms: Vec<EquationTerm>,
    rhs: LowRankMatrix,
    /// Sum of all left operators whose right factor is the identity.
    identity_part: SparseMatrix,
    /// Indices of the terms with a diagonal right factor.
    diagonal_terms: Vec<usize>,
}

impl MatrixEquationSpec {
    pub fn new(terms: Vec<EquationTerm>, rhs: LowRankMatrix) -> Result<Self> {
        let (m, n) = rhs.shape();
        if terms.is_empty() {
            return Err(Error::dim("matrix equation without terms"));
        }
        for t in &terms {
            if t.left.shape() != (m, m) {
                return Err(Error::dim(format!(
                    "term '{}' has a {}x{} left operator, expected {m}x{m}",
                    t.label,
                    t.left.nrows(),
                    t.left.ncols()
                )));
            }
            if let RightFactor::Diagonal(d) = &t.right {
                if d.len() != n {
                    return Err(Error::dim(format!(
                        "term '{}' has a diagonal of length {}, expected {n}",
                        t.label,
                        d.len()
                    )));
                }
            }
        }
        let ids: Vec<(f64, &SparseMatrix)> = terms
            .iter()
            .filter(|t| t.right == RightFactor::Identity)
            .map(|t| (1.0, &t.left))
            .collect();
        let identity_part = if ids.is_empty() {
            SparseMatrix::zeros(m, m)
        } else {
            SparseMatrix::linear_combination(&ids)?
        };
        let diagonal_terms = terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.right != RightFactor::Identity)
            .map(|(i, _)| i)
            .collect();
        Ok(MatrixEquationSpec {
            terms,
            rhs,
            identity_part,
            diagonal_terms,
        })
    }

    pub fn terms(&self) -> &[EquationTerm] {
        &self.terms
    }

    pub fn rhs(&self) -> &LowRankMatrix {
        &self.rhs
    }

    pub fn with_rhs(&self, rhs: LowRankMatrix) -> Result<Self> {
        if rhs.shape() != self.rhs.shape() {
            return Err(Error::dim(format!(
                "replacement right-hand side is {:?}, expected {:?}",
                rhs.shape(),
                self.rhs.shape()
            )));
        }
        Ok(MatrixEquationSpec {
            rhs,
            ..self.clone()
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.rhs.shape()
    }

    /// Left operator applied to a factored matrix, without truncation.
    /// Identity-right terms share one product, so the rank grows by a factor of
    /// `1 + #diagonal terms`.
    pub fn apply(&self, x: &LowRankMatrix) -> Result<LowRankMatrix> {
        if x.shape() != self.shape() {
            return Err(Error::dim(format!(
                "operand is {:?}, equation is {:?}",
                x.shape(),
                self.shape()
            )));
        }
        let mut parts = vec![x.apply_operator(&self.identity_part, None)?];
        for &i in &self.diagonal_terms {
            let t = &self.terms[i];
            if let RightFactor::Diagonal(d) = &t.right {
                parts.push(x.apply_operator(&t.left, Some(d))?);
            }
        }
        let refs: Vec<(f64, &LowRankMatrix)> = parts.iter().map(|p| (1.0, p)).collect();
        LowRankMatrix::linear_combination(&refs)
    }

    /// Left operator applied to a dense `M×n` matrix.
    pub fn apply_dense(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.shape() != self.shape() {
            return Err(Error::dim(format!(
                "operand is {:?}, equation is {:?}",
                x.shape(),
                self.shape()
            )));
        }
        let mut y = self.identity_part.mul_dense(x);
        for &i in &self.diagonal_terms {
            let t = &self.terms[i];
            let ax = t.left.mul_dense(x);
            for (j, mut col) in y.column_iter_mut().enumerate() {
                col.axpy(t.right.entry(j), &ax.column(j), 1.0);
            }
        }
        Ok(y)
    }

    /// The `M×M` block acting on column `i`: `Σ_t (D_t)_{ii}·A_t`.
    pub fn column_operator(&self, i: usize) -> Result<SparseMatrix> {
        if i >= self.shape().1 {
            return Err(Error::IndexOutOfRange(format!(
                "column {i} of equation with {} columns",
                self.shape().1
            )));
        }
        let refs: Vec<(f64, &SparseMatrix)> = self
            .terms
            .iter()
            .map(|t| (t.right.entry(i), &t.left))
            .collect();
        SparseMatrix::linear_combination(&refs)
    }

    /// The block-diagonal operator acting on `vec(X)`.
    pub fn vectorized_operator(&self) -> Result<SparseMatrix> {
        let blocks = (0..self.shape().1)
            .map(|i| self.column_operator(i))
            .collect::<Result<Vec<_>>>()?;
        diago_block(&blocks)
    }

    /// `B − L(X)` in factored form, without truncation.
    pub fn residual(&self, x: &LowRankMatrix) -> Result<LowRankMatrix> {
        self.rhs.sub(&self.apply(x)?)
    }
}
