//! Sparse LU with partial pivoting (left-looking, Gilbert–Peierls).
//!
//! Column `j` of `L` and `U` is obtained from a sparse triangular solve with the
//! already-computed columns of `L`; the nonzero pattern of the solution is the
//! set of rows reachable from the pattern of `A[:, j]` in the graph of `L`, found
//! by depth-first search. The pivot is the largest remaining candidate.

use nalgebra::DMatrix;

use super::SparseMatrix;
use crate::error::{Error, Result};

/// Pivots with magnitude at or below `PIVOT_THRESHOLD · max|A|` are singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

const UNSET: usize = usize::MAX;

/// `P·A = L·U` with unit lower-triangular `L`.
///
/// Row indices of both factors refer to pivot positions. Read-only after
/// construction, so one factorization can serve concurrent solves.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    n: usize,
    /// Strictly lower part of `L`, column-wise.
    lower: SparseMatrix,
    /// Strictly upper part of `U`, column-wise.
    upper: SparseMatrix,
    diag: Vec<f64>,
    /// `pinv[i]` is the pivot position of original row `i`.
    pinv: Vec<usize>,
}

impl LuFactorization {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!(
                "LU of non-square {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let threshold = PIVOT_THRESHOLD * a.max_abs();

        let mut pinv = vec![UNSET; n];
        let mut l_ptr = vec![0usize];
        let mut l_rows: Vec<usize> = Vec::new();
        let mut l_vals: Vec<f64> = Vec::new();
        let mut u_trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut diag = vec![0.0; n];

        let mut x = vec![0.0; n];
        let mut mark = vec![UNSET; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for j in 0..n {
            // Symbolic: reach of A[:, j] through the columns of L built so far.
            pattern.clear();
            let (a_rows, a_vals) = a.column(j);
            for &start in a_rows {
                if mark[start] == j {
                    continue;
                }
                mark[start] = j;
                stack.push((start, 0));
                while let Some(top) = stack.last_mut() {
                    let node = top.0;
                    let k = pinv[node];
                    let children: &[usize] = if k == UNSET {
                        &[]
                    } else {
                        &l_rows[l_ptr[k]..l_ptr[k + 1]]
                    };
                    if top.1 < children.len() {
                        let child = children[top.1];
                        top.1 += 1;
                        if mark[child] != j {
                            mark[child] = j;
                            stack.push((child, 0));
                        }
                    } else {
                        stack.pop();
                        pattern.push(node);
                    }
                }
            }

            // Numeric: triangular solve in topological order.
            for &i in &pattern {
                x[i] = 0.0;
            }
            for (&i, &v) in a_rows.iter().zip(a_vals) {
                x[i] = v;
            }
            for &i in pattern.iter().rev() {
                let k = pinv[i];
                if k == UNSET {
                    continue;
                }
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                for p in l_ptr[k]..l_ptr[k + 1] {
                    x[l_rows[p]] -= l_vals[p] * xi;
                }
            }

            let mut pivot_row = UNSET;
            let mut pivot_mag = -1.0f64;
            for &i in &pattern {
                let k = pinv[i];
                if k == UNSET {
                    if x[i].abs() > pivot_mag {
                        pivot_mag = x[i].abs();
                        pivot_row = i;
                    }
                } else if x[i] != 0.0 {
                    u_trip.push((k, j, x[i]));
                }
            }
            if pivot_row == UNSET || pivot_mag <= threshold {
                return Err(Error::Singular {
                    stage: j,
                    pivot: pivot_mag.max(0.0),
                    threshold,
                });
            }
            let pivot = x[pivot_row];
            pinv[pivot_row] = j;
            diag[j] = pivot;
            for &i in &pattern {
                if pinv[i] == UNSET && x[i] != 0.0 {
                    l_rows.push(i);
                    l_vals.push(x[i] / pivot);
                }
            }
            l_ptr.push(l_rows.len());
        }

        let l_trip: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|k| (l_ptr[k]..l_ptr[k + 1]).map(move |p| (p, k)))
            .map(|(p, k)| (pinv[l_rows[p]], k, l_vals[p]))
            .collect();
        Ok(LuFactorization {
            n,
            lower: SparseMatrix::from_triplets(n, n, &l_trip)?,
            upper: SparseMatrix::from_triplets(n, n, &u_trip)?,
            diag,
            pinv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim(format!(
                "right-hand side of length {} for {}x{} factorization",
                b.len(),
                self.n,
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        self.solve_into(b, &mut y);
        Ok(y)
    }

    fn solve_into(&self, b: &[f64], y: &mut [f64]) {
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for k in 0..self.n {
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            let (rows, vals) = self.lower.column(k);
            for (&r, &v) in rows.iter().zip(vals) {
                y[r] -= v * yk;
            }
        }
        for k in (0..self.n).rev() {
            y[k] /= self.diag[k];
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            let (rows, vals) = self.upper.column(k);
            for (&r, &v) in rows.iter().zip(vals) {
                y[r] -= v * yk;
            }
        }
    }

    /// Solves `A·X = B` for every column of `B`.
    pub fn solve_dense(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.n {
            return Err(Error::dim(format!(
                "block with {} rows for {}x{} factorization",
                b.nrows(),
                self.n,
                self.n
            )));
        }
        let mut out = DMatrix::zeros(self.n, b.ncols());
        if self.n == 0 {
            return Ok(out);
        }
        for (bc, yc) in b
            .as_slice()
            .chunks(self.n)
            .zip(out.as_mut_slice().chunks_mut(self.n))
        {
            self.solve_into(bc, yc);
        }
        Ok(out)
    }

    /// Number of stored off-diagonal entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.lower.nnz() + self.upper.nnz()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
        r.sqrt() / b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let lu = LuFactorization::factor(&SparseMatrix::identity(5)).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.0, 7.5];
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let lu = LuFactorization::factor(&SparseMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert_eq!(lu.solve(&[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn random_diagonally_dominant_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 50;
        let mut trip = Vec::new();
        let mut rowsum = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(0.1) {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    rowsum[i] += v.abs();
                    trip.push((i, j, v));
                }
            }
        }
        for (i, s) in rowsum.iter().enumerate() {
            trip.push((i, i, s + 1.0));
        }
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = LuFactorization::factor(&a).unwrap().solve(&b).unwrap();
        assert!(residual(&a, &x, &b) <= 1e-10);
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a row swap
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = LuFactorization::factor(&a).unwrap().solve(&[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![4.0, 3.0]);
    }

    #[test]
    fn general_nonsymmetric_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 30;
        let dense = DMatrix::from_fn(n, n, |_, _| {
            if rng.random_bool(0.3) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        }) + DMatrix::identity(n, n) * 0.5;
        let a = SparseMatrix::from_dense(&dense, 0.0);
        let b = DMatrix::from_fn(n, 3, |i, j| (i + 2 * j) as f64);
        let ours = LuFactorization::factor(&a).unwrap().solve_dense(&b).unwrap();
        let oracle = dense.clone().lu().solve(&b).unwrap();
        assert!((ours - oracle).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn singular_matrix_reports_stage() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)]).unwrap();
        match LuFactorization::factor(&a) {
            Err(Error::Singular { stage, .. }) => assert_eq!(stage, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
        let dup = SparseMatrix::from_dense(
            &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            0.0,
        );
        assert!(matches!(
            LuFactorization::factor(&dup),
            Err(Error::Singular { stage: 1, .. })
        ));
    }
}
