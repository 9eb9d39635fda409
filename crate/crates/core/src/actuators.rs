//! Point actuators entering through basis-function evaluation.
//!
//! A Dirac forcing supported at an interior point `x` pairs with the P1 test
//! functions as `<delta_x, phi_i> = phi_i(x)`, so its load vector holds the
//! barycentric coordinates of `x` in the containing element.

use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use faer::prelude::*;

/// Sparse load vector of a Dirac source at `point`: at most three entries,
/// each in `[0, 1]`, summing to one. Points on element boundaries resolve to
/// the lowest-index containing element.
pub fn dirac_load(mesh: &Mesh, point: [f64; 2]) -> Result<Vec<(usize, f64)>> {
    let (e, lam) = mesh
        .locate(point)
        .ok_or_else(|| invalid(format!("point ({}, {}) lies outside the domain", point[0], point[1])))?;
    let idx = mesh.elements()[e];
    let mut entries: Vec<(usize, f64)> = idx
        .iter()
        .zip(lam.iter())
        .filter(|(_, &l)| l > 0.0)
        .map(|(&i, &l)| (i, l))
        .collect();
    entries.sort_by_key(|(i, _)| *i);
    Ok(entries)
}

/// A family of pairwise distinct interior point actuators together with
/// their load vectors.
#[derive(Clone, Debug)]
pub struct ActuatorSet {
    points: Vec<[f64; 2]>,
    load_vectors: Vec<Vec<(usize, f64)>>,
    n_nodes: usize,
}

impl ActuatorSet {
    pub fn new(mesh: &Mesh, points: &[[f64; 2]]) -> Result<Self> {
        for (j, p) in points.iter().enumerate() {
            if !(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0) {
                return Err(invalid(format!(
                    "actuator {j} at ({}, {}) is not strictly interior",
                    p[0], p[1]
                )));
            }
            for (k, q) in points.iter().enumerate().take(j) {
                if p == q {
                    return Err(invalid(format!("actuators {k} and {j} coincide")));
                }
            }
        }
        let load_vectors = points
            .iter()
            .map(|&p| dirac_load(mesh, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points: points.to_vec(), load_vectors, n_nodes: mesh.n_nodes() })
    }

    /// Number of actuators `M`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn load_vector(&self, j: usize) -> &[(usize, f64)] {
        &self.load_vectors[j]
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Accumulates `sum_j u[j] d^j` into `rhs`.
    pub fn accumulate_forcing(&self, u: &[f64], rhs: &mut Col<f64>) {
        debug_assert_eq!(u.len(), self.points.len());
        for (j, load) in self.load_vectors.iter().enumerate() {
            let uj = u[j];
            if uj == 0.0 {
                continue;
            }
            for &(i, w) in load {
                rhs[i] += uj * w;
            }
        }
    }

    /// Writes `(d^j)^T p` for every channel into `out`.
    pub fn pair_with(&self, p: &Col<f64>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.points.len());
        for (j, load) in self.load_vectors.iter().enumerate() {
            out[j] = load.iter().map(|&(i, w)| w * p[i]).sum();
        }
    }
}
