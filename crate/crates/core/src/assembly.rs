//! P1 finite-element operators on the triangulated unit square.
//!
//! All matrices act on nodal coefficient vectors with the test index as the
//! row and the trial index as the column. The mass and stiffness matrices use
//! exact element integrals; the time-varying reaction-convection matrix uses
//! the three-point edge-midpoint quadrature rule, which integrates quadratics
//! exactly and is assembled fresh for every requested time.

use crate::coeffs::Coefficients;
use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use faer::prelude::*;
use faer::sparse::Triplet;
use std::sync::Arc;

/// Gradients of the three barycentric basis functions on an element, plus
/// its area: `grad phi_i = (b_i, c_i) / (2 area)`.
fn p1_geometry(v: &[[f64; 2]; 3]) -> ([f64; 3], [f64; 3], f64) {
    let b = [v[1][1] - v[2][1], v[2][1] - v[0][1], v[0][1] - v[1][1]];
    let c = [v[2][0] - v[1][0], v[0][0] - v[2][0], v[1][0] - v[0][0]];
    let area = 0.5 * (c[2] * b[1] - c[1] * b[2]);
    (b, c, area)
}

/// Consistent P1 mass matrix, `area/12 * [2 1 1; 1 2 1; 1 1 2]` per element.
pub fn assemble_mass(mesh: &Mesh) -> SparseColMat<usize, f64> {
    let n = mesh.n_nodes();
    let mut trips = Vec::with_capacity(9 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let idx = mesh.elements()[e];
        let area = mesh.element_area(e);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { area / 6.0 } else { area / 12.0 };
                trips.push(Triplet::new(idx[i], idx[j], w));
            }
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &trips).expect("mass assembly")
}

/// Stiffness matrix of the pure weak Laplacian with natural (Neumann)
/// boundary conditions; its kernel is spanned by the constant vector.
pub fn assemble_stiffness(mesh: &Mesh) -> SparseColMat<usize, f64> {
    let n = mesh.n_nodes();
    let mut trips = Vec::with_capacity(9 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let idx = mesh.elements()[e];
        let verts = mesh.element_vertices(e);
        let (b, c, area) = p1_geometry(&verts);
        for i in 0..3 {
            for j in 0..3 {
                trips.push(Triplet::new(idx[i], idx[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
            }
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &trips).expect("stiffness assembly")
}

/// Reaction-convection matrix at time `t`,
/// `C_ij = int a(t,.) phi_j phi_i + (b(t,.) . grad phi_j) phi_i`,
/// with the edge-midpoint quadrature rule. Generally nonsymmetric.
pub fn assemble_reaction_convection(
    mesh: &Mesh,
    coeffs: &Coefficients,
    t: f64,
) -> SparseColMat<usize, f64> {
    let n = mesh.n_nodes();
    let mut trips = Vec::with_capacity(9 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let idx = mesh.elements()[e];
        let verts = mesh.element_vertices(e);
        let (bg, cg, area) = p1_geometry(&verts);
        let w = area / 3.0;
        // quadrature point q is the midpoint of the edge opposite vertex q;
        // phi_i vanishes there for i == q and equals 1/2 otherwise
        let mids = [
            [0.5 * (verts[1][0] + verts[2][0]), 0.5 * (verts[1][1] + verts[2][1])],
            [0.5 * (verts[0][0] + verts[2][0]), 0.5 * (verts[0][1] + verts[2][1])],
            [0.5 * (verts[0][0] + verts[1][0]), 0.5 * (verts[0][1] + verts[1][1])],
        ];
        let mut local = [[0.0f64; 3]; 3];
        for (q, m) in mids.iter().enumerate() {
            let aq = (coeffs.a)(t, m[0], m[1]);
            let bq = (coeffs.b)(t, m[0], m[1]);
            for i in 0..3 {
                let phi_i = if i == q { 0.0 } else { 0.5 };
                if phi_i == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    let phi_j = if j == q { 0.0 } else { 0.5 };
                    let grad_j = [bg[j] / (2.0 * area), cg[j] / (2.0 * area)];
                    local[i][j] +=
                        w * phi_i * (aq * phi_j + bq[0] * grad_j[0] + bq[1] * grad_j[1]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                trips.push(Triplet::new(idx[i], idx[j], local[i][j]));
            }
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &trips).expect("reaction-convection assembly")
}

/// The assembled operators of the semidiscrete system
/// `M y' + (nu K + C(t)) y = B u(t)`.
#[derive(Clone)]
pub struct OperatorSet {
    mesh: Arc<Mesh>,
    nu: f64,
    coeffs: Coefficients,
    mass: SparseColMat<usize, f64>,
    stiffness: SparseColMat<usize, f64>,
}

impl OperatorSet {
    pub fn new(mesh: Arc<Mesh>, nu: f64, coeffs: Coefficients) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(invalid(format!("diffusion coefficient must be positive, got {nu}")));
        }
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh);
        Ok(Self { mesh, nu, coeffs, mass, stiffness })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn coeffs(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn mass(&self) -> &SparseColMat<usize, f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseColMat<usize, f64> {
        &self.stiffness
    }

    /// Assembles `C(t)`; depends on `t` only through the coefficient fields.
    pub fn reaction_convection(&self, t: f64) -> SparseColMat<usize, f64> {
        assemble_reaction_convection(&self.mesh, &self.coeffs, t)
    }
}
