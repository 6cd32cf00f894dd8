//! Quadratic nonlinearities `N(x) = C·Σ w·(Lx ⊙ Rx)`.
//!
//! Derivative and frozen-coefficient operators are assembled exactly:
//!
//! ```text
//! J(x) = C·Σ w·(diag(Rx)·L + diag(Lx)·R)      so J(x)·x = 2·N(x)
//! F(x) = C·Σ w·diag(Lx)·R                     so F(x)·x = N(x)
//! ```
//!
//! `F` freezes the left factor, which for `L = I` is the Oseen linearization of
//! a convection term `u·∂u`.

use crate::linalg::SparseMatrix;

#[derive(Debug, Clone)]
pub struct BilinearTerm {
    pub weight: f64,
    pub left: SparseMatrix,
    pub right: SparseMatrix,
}

#[derive(Debug, Clone)]
pub struct QuadraticForm {
    dim: usize,
    /// Applied after the products; identity when absent.
    output: Option<SparseMatrix>,
    terms: Vec<BilinearTerm>,
}

impl QuadraticForm {
    pub fn zero(dim: usize) -> Self {
        QuadraticForm {
            dim,
            output: None,
            terms: Vec::new(),
        }
    }

    /// # Panics
    /// If the operator shapes are not all `dim × dim`.
    pub fn new(dim: usize, output: Option<SparseMatrix>, terms: Vec<BilinearTerm>) -> Self {
        let square = |a: &SparseMatrix| a.shape() == (dim, dim);
        assert!(output.as_ref().is_none_or(square), "output operator shape");
        assert!(
            terms.iter().all(|t| square(&t.left) && square(&t.right)),
            "bilinear factor shape"
        );
        QuadraticForm { dim, output, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }

    pub fn terms(&self) -> &[BilinearTerm] {
        &self.terms
    }

    fn finish_vec(&self, y: Vec<f64>) -> Vec<f64> {
        match &self.output {
            Some(c) => c.mul_vec(&y),
            None => y,
        }
    }

    fn finish_mat(&self, a: SparseMatrix) -> SparseMatrix {
        match &self.output {
            Some(c) => c.matmul(&a).expect("shapes checked at construction"),
            None => a,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for t in &self.terms {
            let lx = t.left.mul_vec(x);
            let rx = t.right.mul_vec(x);
            for ((yi, l), r) in y.iter_mut().zip(lx).zip(rx) {
                *yi += t.weight * l * r;
            }
        }
        self.finish_vec(y)
    }

    /// Derivative `J(x)`.
    pub fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let mut parts = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            let lx = t.left.mul_vec(x);
            let rx = t.right.mul_vec(x);
            parts.push((t.weight, t.left.scale_rows(&rx)));
            parts.push((t.weight, t.right.scale_rows(&lx)));
        }
        self.combine(parts)
    }

    /// Frozen-coefficient operator `F(x)`.
    pub fn picard(&self, x: &[f64]) -> SparseMatrix {
        let parts = self
            .terms
            .iter()
            .map(|t| (t.weight, t.right.scale_rows(&t.left.mul_vec(x))))
            .collect();
        self.combine(parts)
    }

    fn combine(&self, parts: Vec<(f64, SparseMatrix)>) -> SparseMatrix {
        if parts.is_empty() {
            return SparseMatrix::zeros(self.dim, self.dim);
        }
        let refs: Vec<(f64, &SparseMatrix)> = parts.iter().map(|(w, a)| (*w, a)).collect();
        let sum = SparseMatrix::linear_combination(&refs).expect("shapes checked at construction");
        self.finish_mat(sum)
    }
}
