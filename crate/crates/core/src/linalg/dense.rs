use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Stacks the columns of `x` into one vector of length `rows·cols`.
pub fn vec(x: &DMatrix<f64>) -> Vec<f64> {
    x.as_slice().to_vec()
}

/// Inverse of [`vec`]: reshapes a stacked vector into a `rows × cols` matrix.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::dim(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v))
}

/// The diagonal `(a_11, …, a_MM)` of a square matrix.
pub fn diag_extract(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(format!(
            "diagonal of non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok((0..a.nrows()).map(|i| a[(i, i)]).collect())
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Thin singular value decomposition `X = U·diag(σ)·Vᵀ`.
///
/// `u` is `M×k`, `v` is `n×k` with `k = min(M, n)`, and `singular_values` is
/// sorted non-increasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn thin_svd(x: &DMatrix<f64>) -> ThinSvd {
    let (m, n) = x.shape();
    let k = m.min(n);
    if k == 0 {
        return ThinSvd {
            u: DMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(n, 0),
        };
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut u_sorted = DMatrix::zeros(m, k);
    let mut v_sorted = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v_t.row(src).transpose());
        values.push(sigma[src].max(0.0));
    }
    ThinSvd {
        u: u_sorted,
        singular_values: values,
        v: v_sorted,
    }
}
