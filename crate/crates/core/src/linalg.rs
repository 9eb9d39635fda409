//! Small deterministic kernels on faer sparse matrices and columns.
//!
//! Products and reductions here run in a fixed serial order so that repeated
//! runs produce bit-identical results regardless of the global parallelism
//! setting.

use faer::prelude::*;
use faer::sparse::Triplet;

/// Owned columns are always contiguous.
pub(crate) fn col_slice(c: &Col<f64>) -> &[f64] {
    c.as_ref().try_as_col_major().expect("owned columns are contiguous").as_slice()
}

pub(crate) fn col_slice_mut(c: &mut Col<f64>) -> &mut [f64] {
    c.as_mut().try_as_col_major_mut().expect("owned columns are contiguous").as_slice_mut()
}

pub(crate) fn dot(a: &Col<f64>, b: &Col<f64>) -> f64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        acc += a[i] * b[i];
    }
    acc
}

/// `y = A x` by columns of the CSC storage.
pub(crate) fn spmv(a: &SparseColMat<usize, f64>, x: &Col<f64>) -> Col<f64> {
    debug_assert_eq!(a.ncols(), x.nrows());
    let mut y = Col::<f64>::zeros(a.nrows());
    spmv_add(a, x, &mut y);
    y
}

/// `y = A x` into an existing buffer.
pub(crate) fn spmv_into(a: &SparseColMat<usize, f64>, x: &Col<f64>, y: &mut Col<f64>) {
    y.as_mut().fill(0.0);
    spmv_add(a, x, y);
}

/// `y = A^T x` into an existing buffer (row gather per CSC column).
pub(crate) fn spmv_transpose_into(a: &SparseColMat<usize, f64>, x: &Col<f64>, y: &mut Col<f64>) {
    let col_ptr = a.col_ptr();
    let row_idx = a.row_idx();
    let val = a.val();
    let xs = col_slice(x);
    let ys = col_slice_mut(y);
    for (j, out) in ys.iter_mut().enumerate() {
        let mut acc = 0.0;
        for p in col_ptr[j]..col_ptr[j + 1] {
            acc += val[p] * xs[row_idx[p]];
        }
        *out = acc;
    }
}

/// `y += A x`.
pub(crate) fn spmv_add(a: &SparseColMat<usize, f64>, x: &Col<f64>, y: &mut Col<f64>) {
    let col_ptr = a.col_ptr();
    let row_idx = a.row_idx();
    let val = a.val();
    let xs = col_slice(x);
    let ys = col_slice_mut(y);
    for (j, &xj) in xs.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for p in col_ptr[j]..col_ptr[j + 1] {
            ys[row_idx[p]] += val[p] * xj;
        }
    }
}

/// `x^T A y` without a temporary.
pub(crate) fn quad_form(a: &SparseColMat<usize, f64>, x: &Col<f64>, y: &Col<f64>) -> f64 {
    let col_ptr = a.col_ptr();
    let row_idx = a.row_idx();
    let val = a.val();
    let xs = col_slice(x);
    let ys = col_slice(y);
    let mut acc = 0.0;
    for (j, &yj) in ys.iter().enumerate() {
        if yj == 0.0 {
            continue;
        }
        let mut col_acc = 0.0;
        for p in col_ptr[j]..col_ptr[j + 1] {
            col_acc += val[p] * xs[row_idx[p]];
        }
        acc += col_acc * yj;
    }
    acc
}

/// Appends `scale * A` to a triplet buffer.
pub(crate) fn push_scaled_triplets(
    buf: &mut Vec<Triplet<usize, usize, f64>>,
    a: &SparseColMat<usize, f64>,
    scale: f64,
) {
    let col_ptr = a.col_ptr();
    let row_idx = a.row_idx();
    let val = a.val();
    for j in 0..a.ncols() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            buf.push(Triplet::new(row_idx[p], j, scale * val[p]));
        }
    }
}

#[cfg(test)]
pub(crate) fn col_from_slice(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}
