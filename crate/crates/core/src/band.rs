//! Banded LU factorization for the Crank-Nicolson step systems.
//!
//! Row-major node numbering on the uniform criss-cross mesh gives every
//! step matrix bandwidth `n + 2`, so a band solver beats general sparse LU
//! on both factorization and triangular-solve cost. Factorization runs
//! without pivoting - the mass-dominated step matrices are close to
//! diagonally dominant - and reports failure on small pivots or excessive
//! element growth so that callers can fall back to a pivoted solver.
//!
//! Storage is LAPACK-style column-major band: entry `(i, j)` with
//! `-ku <= i - j <= kl` lives at `ab[j * ldab + (ku + i - j)]`, which keeps
//! every factorization and solve sweep contiguous in memory.

use faer::prelude::*;

#[derive(Clone, Debug)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        assert!(kl < n && ku < n, "bandwidths must be smaller than the dimension");
        let ldab = kl + ku + 1;
        Self { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "entry ({i}, {j}) outside the band");
        j * self.ldab + (self.ku + i - j)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.idx(i, j);
        self.ab[p] += v;
    }

    /// In-place LU without pivoting. Fails on a vanishing pivot or when the
    /// factor entries grow far beyond the input scale.
    pub fn factorize(mut self) -> Result<BandLu, BandError> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let input_scale = self.ab.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if input_scale == 0.0 {
            return Err(BandError::Singular(0));
        }
        let pivot_floor = input_scale * 1e-14 * f64::EPSILON.sqrt();
        let mut l_col = vec![0.0f64; kl];
        for j in 0..n {
            let diag = j * ldab + ku;
            let pivot = self.ab[diag];
            if !pivot.is_finite() || pivot.abs() <= pivot_floor {
                return Err(BandError::Singular(j));
            }
            let rows = kl.min(n - 1 - j);
            let cols = ku.min(n - 1 - j);
            // scale the subdiagonal of column j to multipliers
            for r in 0..rows {
                self.ab[diag + 1 + r] /= pivot;
                l_col[r] = self.ab[diag + 1 + r];
            }
            // rank-1 update of the trailing band, column by column
            for c in 1..=cols {
                let base = (j + c) * ldab + ku - c;
                let ujk = self.ab[base];
                if ujk == 0.0 {
                    continue;
                }
                let col = &mut self.ab[base + 1..base + 1 + rows];
                for (dst, &l) in col.iter_mut().zip(&l_col[..rows]) {
                    *dst -= l * ujk;
                }
            }
        }
        let growth = self.ab.iter().fold(0.0f64, |a, v| a.max(v.abs())) / input_scale;
        if !growth.is_finite() || growth > 1e8 {
            return Err(BandError::Growth(growth));
        }
        // split the factors into tight per-triangle arrays so each solve
        // phase streams only the bytes it uses
        let mut lower = vec![0.0f64; kl * n];
        let mut upper = vec![0.0f64; (ku + 1) * n];
        for j in 0..n {
            let col = j * ldab;
            lower[j * kl..(j + 1) * kl].copy_from_slice(&self.ab[col + ku + 1..col + ku + 1 + kl]);
            upper[j * (ku + 1)..(j + 1) * (ku + 1)].copy_from_slice(&self.ab[col..col + ku + 1]);
        }
        Ok(BandLu { n, kl, ku, lower, upper })
    }
}

#[derive(Debug)]
pub(crate) enum BandError {
    Singular(usize),
    Growth(f64),
}

impl std::fmt::Display for BandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandError::Singular(j) => write!(f, "vanishing pivot at column {j}"),
            BandError::Growth(g) => write!(f, "factor growth {g:.2e} exceeds the stability bound"),
        }
    }
}

/// Split factor storage: `lower` holds the `kl` subdiagonal multipliers of
/// each column (unit diagonal implicit), `upper` the diagonal and `ku`
/// superdiagonals, stored bottom-up so row `ku` of a column is the diagonal.
#[derive(Clone, Debug)]
pub(crate) struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut Col<f64>) {
        debug_assert_eq!(x.nrows(), self.n);
        self.solve_slice(crate::linalg::col_slice_mut(x));
    }

    fn solve_slice(&self, x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        // L x' = b (unit lower, column sweep)
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let rows = kl.min(n - 1 - j);
                let col = &self.lower[j * kl..j * kl + rows];
                let xs = &mut x[j + 1..j + rows + 1];
                for (dst, &l) in xs.iter_mut().zip(col) {
                    *dst -= l * xj;
                }
            }
        }
        // U x = x' (column-oriented back substitution)
        for j in (0..n).rev() {
            let above = ku.min(j);
            let diag = j * (ku + 1) + ku;
            let xj = x[j] / self.upper[diag];
            x[j] = xj;
            if xj != 0.0 {
                let col = &self.upper[diag - above..diag];
                let xs = &mut x[j - above..j];
                for (dst, &u) in xs.iter_mut().zip(col) {
                    *dst -= u * xj;
                }
            }
        }
    }

    /// Solves `A^T x = b` in place via `U^T L^T x = b`.
    pub fn solve_transpose_in_place(&self, x: &mut Col<f64>) {
        debug_assert_eq!(x.nrows(), self.n);
        self.solve_transpose_slice(crate::linalg::col_slice_mut(x));
    }

    fn solve_transpose_slice(&self, x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        // U^T z = b (lower triangular, gather along U's columns)
        for j in 0..n {
            let above = ku.min(j);
            let diag = j * (ku + 1) + ku;
            let col = &self.upper[diag - above..diag];
            let xs = &x[j - above..j];
            let acc: f64 = col.iter().zip(xs).map(|(&u, &v)| u * v).sum();
            x[j] = (x[j] - acc) / self.upper[diag];
        }
        // L^T x = z (unit upper triangular, gather along L's columns)
        for j in (0..n).rev() {
            let rows = kl.min(n - 1 - j);
            let col = &self.lower[j * kl..j * kl + rows];
            let xs = &x[j + 1..j + rows + 1];
            let acc: f64 = col.iter().zip(xs).map(|(&l, &v)| l * v).sum();
            x[j] -= acc;
        }
    }
}
