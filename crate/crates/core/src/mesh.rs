//! Uniform criss-cross triangulation of the unit square.
//!
//! Every square cell of an `n x n` grid is split along its bottom-left to
//! top-right diagonal into two congruent triangles with counterclockwise
//! vertex ordering. Nodes are numbered row-major, `node(i, j) = j*(n+1) + i`
//! at coordinates `(i*h, j*h)` with `h = 1/n`; the two triangles of cell
//! `(i, j)` get element indices `2*(j*n + i)` (below the diagonal) and
//! `2*(j*n + i) + 1` (above it).

use crate::error::{invalid, Result};

#[derive(Clone, Debug)]
pub struct Mesh {
    n_cells_per_side: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds the uniform triangulation with `n >= 2` cells per side.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("mesh needs at least 2 cells per side, got {n}")));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                // lower triangle (below the bottom-left/top-right diagonal)
                elements.push([v00, v10, v11]);
                // upper triangle
                elements.push([v00, v11, v01]);
            }
        }
        Ok(Self { n_cells_per_side: n, nodes, elements })
    }

    pub fn n_cells_per_side(&self) -> usize {
        self.n_cells_per_side
    }

    /// Number of nodes, `(n+1)^2`.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of elements, `2 n^2`.
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    /// Vertex coordinates of element `e`.
    pub fn element_vertices(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[e];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area of element `e`; positive for counterclockwise ordering.
    pub fn element_area(&self, e: usize) -> f64 {
        let [p, q, r] = self.element_vertices(e);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Finds the lowest-index element containing `point` together with its
    /// barycentric coordinates. Points on shared edges therefore resolve to
    /// a reproducible element. Returns `None` when the point lies outside
    /// the closed unit square (up to a 1e-12 slack on the barycentric test).
    pub fn locate(&self, point: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const SLACK: f64 = 1e-12;
        for e in 0..self.elements.len() {
            let [p, q, r] = self.element_vertices(e);
            let area2 = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
            let l0 = ((q[0] - point[0]) * (r[1] - point[1])
                - (r[0] - point[0]) * (q[1] - point[1]))
                / area2;
            let l1 = ((r[0] - point[0]) * (p[1] - point[1])
                - (p[0] - point[0]) * (r[1] - point[1]))
                / area2;
            let l2 = 1.0 - l0 - l1;
            if l0 >= -SLACK && l1 >= -SLACK && l2 >= -SLACK {
                // clamp roundoff and renormalize so the coordinates sum to one
                let mut lam = [l0.clamp(0.0, 1.0), l1.clamp(0.0, 1.0), l2.clamp(0.0, 1.0)];
                let sum: f64 = lam.iter().sum();
                for l in &mut lam {
                    *l /= sum;
                }
                return Some((e, lam));
            }
        }
        None
    }
}
