use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse column matrix.
///
/// Row indices are strictly increasing within each column, so there are no
/// duplicate `(row, col)` pairs. Explicit zeros may be stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SparseMatrix {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange(format!(
                    "entry ({r}, {c}) outside {nrows}x{ncols} matrix"
                )));
            }
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }

        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for c in 0..ncols {
            order.clear();
            order.extend(counts[c]..counts[c + 1]);
            order.sort_by_key(|&k| rows[k]);
            for &k in &order {
                if row_idx.len() > col_ptr[c] && *row_idx.last().unwrap() == rows[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    row_idx.push(rows[k]);
                    values.push(vals[k]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Converts a dense matrix, keeping entries with `|a_ij| > drop_tol`.
    pub fn from_dense(a: &DMatrix<f64>, drop_tol: f64) -> Self {
        let (nrows, ncols) = a.shape();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = a[(i, j)];
                if v.abs() > drop_tol {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            a[(i, j)] += v;
        }
        a
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        match rows.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::dim(format!(
                "diagonal of non-square {}x{} matrix",
                self.nrows, self.ncols
            )));
        }
        Ok((0..self.nrows).map(|i| self.get(i, i)).collect())
    }

    /// `y = A·x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_acc(1.0, x, &mut y);
        y
    }

    /// `y += alpha·A·x`.
    pub fn mul_vec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "input length must equal column count");
        assert_eq!(y.len(), self.nrows, "output length must equal row count");
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let s = alpha * xj;
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * s;
            }
        }
    }

    /// Sparse times dense block, column by column.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols, "block row count must equal column count");
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        if self.nrows == 0 || self.ncols == 0 {
            return y;
        }
        let xs = x.as_slice().chunks(self.ncols);
        let ys = y.as_mut_slice().chunks_mut(self.nrows);
        for (xc, yc) in xs.zip(ys) {
            self.mul_vec_acc(1.0, xc, yc);
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trip).expect("transpose indices in range")
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `diag(d)·A`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for (v, &i) in out.values.iter_mut().zip(&self.row_idx) {
            *v *= d[i];
        }
        out
    }

    /// `A·diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.ncols);
        let mut out = self.clone();
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out.values[k] *= d[j];
            }
        }
        out
    }

    /// `Σ_k c_k·A_k` over matrices of identical shape.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::dim("empty linear combination"));
        };
        let (nrows, ncols) = first.shape();
        for (_, m) in terms {
            if m.shape() != (nrows, ncols) {
                return Err(Error::dim(format!(
                    "cannot combine {}x{} with {}x{}",
                    nrows, ncols, m.nrows, m.ncols
                )));
            }
        }
        let mut work = vec![0.0; nrows];
        let mut mark = vec![usize::MAX; nrows];
        let mut pattern = Vec::new();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..ncols {
            pattern.clear();
            for &(c, m) in terms {
                let (rows, vals) = m.column(j);
                for (&i, &v) in rows.iter().zip(vals) {
                    if mark[i] != j {
                        mark[i] = j;
                        work[i] = 0.0;
                        pattern.push(i);
                    }
                    work[i] += c * v;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(work[i]);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    /// Sparse product `A·B`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let nrows = self.nrows;
        let ncols = other.ncols;
        let mut work = vec![0.0; nrows];
        let mut mark = vec![usize::MAX; nrows];
        let mut pattern = Vec::new();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..ncols {
            pattern.clear();
            let (brows, bvals) = other.column(j);
            for (&k, &bv) in brows.iter().zip(bvals) {
                let (arows, avals) = self.column(k);
                for (&i, &av) in arows.iter().zip(avals) {
                    if mark[i] != j {
                        mark[i] = j;
                        work[i] = 0.0;
                        pattern.push(i);
                    }
                    work[i] += av * bv;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(work[i]);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }
}

/// Block-diagonal matrix `diago(A_1, …, A_m)` of size `Mm × Mm`.
pub fn diago_block(blocks: &[SparseMatrix]) -> Result<SparseMatrix> {
    let Some(first) = blocks.first() else {
        return Ok(SparseMatrix::zeros(0, 0));
    };
    let size = first.nrows();
    for (k, b) in blocks.iter().enumerate() {
        if !b.is_square() || b.nrows() != size {
            return Err(Error::dim(format!(
                "block {k} is {}x{}, expected {size}x{size}",
                b.nrows(),
                b.ncols()
            )));
        }
    }
    let n = size * blocks.len();
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for (k, b) in blocks.iter().enumerate() {
        let offset = k * size;
        for j in 0..size {
            let (rows, vals) = b.column(j);
            row_idx.extend(rows.iter().map(|&i| i + offset));
            values.extend_from_slice(vals);
            col_ptr.push(row_idx.len());
        }
    }
    Ok(SparseMatrix {
        nrows: n,
        ncols: n,
        col_ptr,
        row_idx,
        values,
    })
}
