//! Reaction and convection coefficient fields.

use crate::mesh::Mesh;
use std::f64::consts::PI;

/// Time-dependent coefficients of the reaction-convection part of the
/// dynamics: a scalar reaction field `a(t, x)` and a velocity field
/// `b(t, x)` that is tangential on the boundary of the unit square.
#[derive(Clone, Copy)]
pub struct Coefficients {
    pub a: fn(t: f64, x1: f64, x2: f64) -> f64,
    pub b: fn(t: f64, x1: f64, x2: f64) -> [f64; 2],
}

impl Coefficients {
    /// The benchmark fields driving the unstable test problem:
    /// `a(t,x) = -2 + (2 - x1) cos(pi x2) - 0.2 |sin(t + x2)|` and
    /// `b(t,x) = ( (t+2)/(t+1) x1 (x1 - 1) x2,  -(x1 - 1/2) x2 (x2 - 1) cos t )`.
    pub fn benchmark() -> Self {
        Self { a: benchmark_a, b: benchmark_b }
    }

    /// `a = 0`, `b = 0`; the dynamics reduce to the Neumann heat equation.
    pub fn zero() -> Self {
        Self { a: |_, _, _| 0.0, b: |_, _, _| [0.0, 0.0] }
    }
}

fn benchmark_a(t: f64, x1: f64, x2: f64) -> f64 {
    -2.0 + (2.0 - x1) * (PI * x2).cos() - 0.2 * (t + x2).sin().abs()
}

fn benchmark_b(t: f64, x1: f64, x2: f64) -> [f64; 2] {
    [
        (t + 2.0) / (t + 1.0) * x1 * (x1 - 1.0) * x2,
        -(x1 - 0.5) * x2 * (x2 - 1.0) * t.cos(),
    ]
}

/// Nodal interpolant of the benchmark initial state `x1 (1 + sin(2 x2))`.
pub fn benchmark_initial_state(mesh: &Mesh) -> Vec<f64> {
    mesh.interpolate(|x1, x2| x1 * (1.0 + (2.0 * x2).sin()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convection_value_at_center_at_time_zero() {
        let c = Coefficients::benchmark();
        let b = (c.b)(0.0, 0.5, 0.5);
        assert!((b[0] - (-0.25)).abs() < 1e-15);
        assert!(b[1].abs() < 1e-15);
    }

    #[test]
    fn convection_is_tangential_on_the_boundary() {
        let c = Coefficients::benchmark();
        for s in [0.0, 0.3, 0.77, 1.0] {
            for t in [0.0, 0.9, 4.4] {
                assert_eq!((c.b)(t, 0.0, s)[0], 0.0);
                assert_eq!((c.b)(t, 1.0, s)[0], 0.0);
                assert_eq!((c.b)(t, s, 0.0)[1], 0.0);
                assert_eq!((c.b)(t, s, 1.0)[1], 0.0);
            }
        }
    }

    #[test]
    fn reaction_at_center() {
        let c = Coefficients::benchmark();
        // a(0, 0.5, 0.5) = -2 + 1.5 cos(pi/2) - 0.2 |sin 0.5|
        let expect = -2.0 + 1.5 * (PI * 0.5).cos() - 0.2 * 0.5f64.sin().abs();
        assert!(((c.a)(0.0, 0.5, 0.5) - expect).abs() < 1e-15);
    }
}
