//! Discrete L2, first-order Sobolev, and dual Sobolev norms.
//!
//! With `M` the mass matrix and `K` the stiffness matrix, the energy
//! operator `A = nu K + M` realizes the first-order inner product. The dual
//! norm is its exact discrete counterpart via the Riesz map: for a nodal
//! vector `y` the dual datum is `f = M y` and
//! `||y||_dual = sqrt(f^T A^{-1} f)`. Since `K` is positive semidefinite the
//! spectrum of `A` relative to `M` sits above one, which yields the chain
//! `dual <= L2 <= energy` for every vector.

use crate::assembly::OperatorSet;
use crate::error::{numerical, Result};
use crate::linalg::{dot, quad_form, spmv};
use faer::prelude::*;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::Triplet;
use faer::Side;

pub struct NormContext {
    mass: SparseColMat<usize, f64>,
    a_op: SparseColMat<usize, f64>,
    chol: Llt<usize, f64>,
}

impl NormContext {
    pub fn new(ops: &OperatorSet) -> Result<Self> {
        let n = ops.n_nodes();
        let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
        crate::linalg::push_scaled_triplets(&mut trips, ops.stiffness(), ops.nu());
        crate::linalg::push_scaled_triplets(&mut trips, ops.mass(), 1.0);
        let a_op = SparseColMat::try_new_from_triplets(n, n, &trips)
            .expect("energy operator assembly");
        let chol = a_op
            .sp_cholesky(Side::Lower)
            .map_err(|e| numerical(format!("energy operator factorization failed: {e:?}")))?;
        Ok(Self { mass: ops.mass().clone(), a_op, chol })
    }

    pub fn n_nodes(&self) -> usize {
        self.mass.nrows()
    }

    /// `sqrt(y^T M y)`.
    pub fn h_norm(&self, y: &Col<f64>) -> f64 {
        quad_form(&self.mass, y, y).max(0.0).sqrt()
    }

    /// `sqrt(y^T (nu K + M) y)`.
    pub fn v_norm(&self, y: &Col<f64>) -> f64 {
        quad_form(&self.a_op, y, y).max(0.0).sqrt()
    }

    /// Dual norm of the functional represented by `y` against the L2
    /// pairing: `sqrt(f^T A^{-1} f)` with `f = M y`.
    pub fn vprime_norm(&self, y: &Col<f64>) -> f64 {
        let f = spmv(&self.mass, y);
        self.dual_norm(&f)
    }

    /// Dual norm of a raw dual datum `f` (a right-hand-side vector):
    /// `sqrt(f^T A^{-1} f)`.
    pub fn dual_norm(&self, f: &Col<f64>) -> f64 {
        let w = self.chol.solve(f);
        dot(f, &w).max(0.0).sqrt()
    }

    pub fn mass(&self) -> &SparseColMat<usize, f64> {
        &self.mass
    }

    pub fn energy_operator(&self) -> &SparseColMat<usize, f64> {
        &self.a_op
    }
}
