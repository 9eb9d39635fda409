//! Crank-Nicolson integration of the semidiscrete controlled system
//! `M y' + (nu K + C(t)) y = sum_j u_j(t) d^j`.
//!
//! Each step solves
//! `[M/dt + (nu K + C(t_mid))/2] y_{k+1} = [M/dt - (nu K + C(t_mid))/2] y_k + B u_k`
//! with the time-varying operator sampled once per step at the interval
//! midpoint. Controls are piecewise constant per step, so the forcing enters
//! with full weight. Systems are solved by sparse LU; the symbolic
//! factorization is computed once and reused, since every step shares the
//! mesh adjacency pattern.

use crate::actuators::ActuatorSet;
use crate::assembly::OperatorSet;
use crate::band::{BandLu, BandMatrix};
use crate::error::{invalid, numerical, Result};
use crate::linalg::push_scaled_triplets;
use crate::time::{ControlTrajectory, StateTrajectory, TimeGrid};
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::Triplet;

#[cfg(test)]
/// Builds the pair `(E_plus, E_minus)` of Crank-Nicolson step matrices for
/// the operator sampled at time `t_mid`.
pub(crate) fn cn_matrices(
    ops: &OperatorSet,
    t_mid: f64,
    dt: f64,
) -> (SparseColMat<usize, f64>, SparseColMat<usize, f64>) {
    let n = ops.n_nodes();
    let c = ops.reaction_convection(t_mid);
    let mut plus: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(3 * c.val().len());
    let mut minus: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(3 * c.val().len());
    for (buf, sign) in [(&mut plus, 1.0), (&mut minus, -1.0)] {
        push_scaled_triplets(buf, ops.mass(), 1.0 / dt);
        push_scaled_triplets(buf, ops.stiffness(), sign * ops.nu() / 2.0);
        push_scaled_triplets(buf, &c, sign / 2.0);
    }
    let e_plus = SparseColMat::try_new_from_triplets(n, n, &plus).expect("step matrix assembly");
    let e_minus = SparseColMat::try_new_from_triplets(n, n, &minus).expect("step matrix assembly");
    (e_plus, e_minus)
}

/// Factorization of one step's implicit matrix: banded LU on the mesh's
/// natural numbering, or pivoted sparse LU when the banded path reports an
/// unstable factorization.
pub(crate) enum StepFactor {
    Band(BandLu),
    Sparse(Lu<usize, f64>),
}

impl StepFactor {
    pub fn solve_in_place(&self, x: &mut Col<f64>) {
        match self {
            StepFactor::Band(lu) => lu.solve_in_place(x),
            StepFactor::Sparse(lu) => lu.solve_in_place(&mut *x),
        }
    }

    pub fn solve_transpose_in_place(&self, x: &mut Col<f64>) {
        match self {
            StepFactor::Band(lu) => lu.solve_transpose_in_place(x),
            StepFactor::Sparse(lu) => lu.solve_transpose_in_place(&mut *x),
        }
    }
}

/// One Crank-Nicolson step: the factored implicit matrix and the explicit
/// right-hand-side matrix.
pub(crate) struct CnStep {
    pub factor: StepFactor,
    pub e_minus: SparseColMat<usize, f64>,
}

fn add_csc_into_band(band: &mut BandMatrix, a: &SparseColMat<usize, f64>, scale: f64) {
    let col_ptr = a.col_ptr();
    let row_idx = a.row_idx();
    let val = a.val();
    for j in 0..a.ncols() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            band.add(row_idx[p], j, scale * val[p]);
        }
    }
}

/// Assembles and factorizes the step at midpoint time `t_mid`.
pub(crate) fn cn_step(ops: &OperatorSet, t_mid: f64, dt: f64) -> Result<CnStep> {
    let n = ops.n_nodes();
    let c = ops.reaction_convection(t_mid);
    let mut minus: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(3 * c.val().len());
    push_scaled_triplets(&mut minus, ops.mass(), 1.0 / dt);
    push_scaled_triplets(&mut minus, ops.stiffness(), -ops.nu() / 2.0);
    push_scaled_triplets(&mut minus, &c, -0.5);
    let e_minus =
        SparseColMat::try_new_from_triplets(n, n, &minus).expect("step matrix assembly");

    let bw = ops.mesh().n_cells_per_side() + 2;
    let mut band = BandMatrix::zeros(n, bw, bw);
    add_csc_into_band(&mut band, ops.mass(), 1.0 / dt);
    add_csc_into_band(&mut band, ops.stiffness(), ops.nu() / 2.0);
    add_csc_into_band(&mut band, &c, 0.5);
    let factor = match band.factorize() {
        Ok(lu) => StepFactor::Band(lu),
        Err(_) => {
            // pivoted fallback for step matrices the no-pivot path rejects
            let mut plus: Vec<Triplet<usize, usize, f64>> =
                Vec::with_capacity(3 * c.val().len());
            push_scaled_triplets(&mut plus, ops.mass(), 1.0 / dt);
            push_scaled_triplets(&mut plus, ops.stiffness(), ops.nu() / 2.0);
            push_scaled_triplets(&mut plus, &c, 0.5);
            let e_plus =
                SparseColMat::try_new_from_triplets(n, n, &plus).expect("step matrix assembly");
            let lu = e_plus
                .sp_lu()
                .map_err(|e| numerical(format!("step matrix factorization failed: {e:?}")))?;
            StepFactor::Sparse(lu)
        }
    };
    Ok(CnStep { factor, e_minus })
}

fn check_state(y0: &Col<f64>, n: usize) -> Result<()> {
    if y0.nrows() != n {
        return Err(invalid(format!(
            "initial state has {} entries, mesh has {n} nodes",
            y0.nrows()
        )));
    }
    if (0..y0.nrows()).any(|i| !y0[i].is_finite()) {
        return Err(invalid("initial state must be finite"));
    }
    Ok(())
}

/// Integrates the controlled system over the control's grid.
pub fn solve_forward(
    y0: &Col<f64>,
    u: &ControlTrajectory,
    ops: &OperatorSet,
    actuators: &ActuatorSet,
) -> Result<StateTrajectory> {
    let n = ops.n_nodes();
    check_state(y0, n)?;
    if u.n_channels() != actuators.len() {
        return Err(invalid(format!(
            "control has {} channels, actuator set has {}",
            u.n_channels(),
            actuators.len()
        )));
    }
    let grid = u.grid.clone();
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    states.push(y0.clone());
    let mut rhs = Col::<f64>::zeros(n);
    for k in 0..grid.n_steps {
        let step = cn_step(ops, grid.midpoint(k), grid.dt)?;
        crate::linalg::spmv_into(&step.e_minus, &states[k], &mut rhs);
        actuators.accumulate_forcing(u.step(k), &mut rhs);
        step.factor.solve_in_place(&mut rhs);
        states.push(rhs.clone());
    }
    Ok(StateTrajectory { grid, states })
}

/// Integrates the free dynamics (`u = 0`) over `grid`.
pub fn solve_uncontrolled(
    y0: &Col<f64>,
    ops: &OperatorSet,
    grid: TimeGrid,
) -> Result<StateTrajectory> {
    let mesh = ops.mesh().clone();
    let empty = ActuatorSet::new(&mesh, &[])?;
    let u = ControlTrajectory::zeros(grid, 0);
    solve_forward(y0, &u, ops, &empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{benchmark_initial_state, Coefficients};
    use crate::linalg::{col_from_slice, quad_form, spmv};
    use crate::mesh::Mesh;
    use crate::norms::NormContext;
    use std::sync::Arc;

    fn heat_ops(n: usize) -> OperatorSet {
        let mesh = Arc::new(Mesh::uniform(n).unwrap());
        OperatorSet::new(mesh, 0.1, Coefficients::zero()).unwrap()
    }

    #[test]
    fn constants_are_preserved_by_the_heat_equation() {
        let ops = heat_ops(4);
        let y0 = Col::from_fn(ops.n_nodes(), |_| 3.25);
        let grid = TimeGrid::new(0.0, 0.01, 20).unwrap();
        let traj = solve_uncontrolled(&y0, &ops, grid).unwrap();
        for y in &traj.states {
            for i in 0..y.nrows() {
                assert!((y[i] - 3.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_equation_mass_norm_is_nonincreasing() {
        let ops = heat_ops(6);
        let mesh = ops.mesh().clone();
        let y0 = col_from_slice(&mesh.interpolate(|x1, x2| (x1 - 0.3) * (x2 + 0.2) * x1));
        let grid = TimeGrid::new(0.0, 0.02, 30).unwrap();
        let traj = solve_uncontrolled(&y0, &ops, grid).unwrap();
        let mut prev = f64::INFINITY;
        for y in &traj.states {
            let norm = quad_form(ops.mass(), y, y).sqrt();
            assert!(norm <= prev * (1.0 + 1e-12));
            prev = norm;
        }
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let mesh = Arc::new(Mesh::uniform(4).unwrap());
        let ops = OperatorSet::new(mesh, 0.1, Coefficients::benchmark()).unwrap();
        let y0 = Col::zeros(ops.n_nodes());
        let grid = TimeGrid::new(0.0, 0.005, 10).unwrap();
        let traj = solve_uncontrolled(&y0, &ops, grid).unwrap();
        for y in &traj.states {
            for i in 0..y.nrows() {
                assert_eq!(y[i], 0.0);
            }
        }
    }

    #[test]
    fn single_step_satisfies_the_linear_system() {
        let ops = heat_ops(4);
        let mesh = ops.mesh().clone();
        let y0 = col_from_slice(&mesh.interpolate(|x1, x2| x1 + 0.5 * x2 * x2));
        let grid = TimeGrid::new(0.0, 0.01, 1).unwrap();
        let traj = solve_uncontrolled(&y0, &ops, grid.clone()).unwrap();
        let (e_plus, e_minus) = cn_matrices(&ops, grid.midpoint(0), grid.dt);
        let lhs = spmv(&e_plus, &traj.states[1]);
        let rhs = spmv(&e_minus, &traj.states[0]);
        let mut resid: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..lhs.nrows() {
            resid += (lhs[i] - rhs[i]).powi(2);
            scale += rhs[i].powi(2);
        }
        assert!(resid.sqrt() <= 1e-10 * scale.sqrt().max(1.0));
    }

    #[test]
    fn free_benchmark_dynamics_blow_up() {
        // the reaction field feeds energy in; over [0, 5] the dual norm
        // grows by many orders of magnitude even on a coarse mesh
        let mesh = Arc::new(Mesh::uniform(16).unwrap());
        let ops = OperatorSet::new(mesh.clone(), 0.1, Coefficients::benchmark()).unwrap();
        let norms = NormContext::new(&ops).unwrap();
        let y0 = col_from_slice(&benchmark_initial_state(&mesh));
        let grid = TimeGrid::new(0.0, 5e-3, 1000).unwrap();
        let traj = solve_uncontrolled(&y0, &ops, grid).unwrap();
        let start = norms.vprime_norm(&traj.states[0]);
        let end = norms.vprime_norm(traj.final_state());
        assert!(end >= 1e5, "final dual norm {end}");
        assert!(end > start * 1e4);
    }

    #[test]
    fn superposition_of_the_linear_scheme() {
        let mesh = Arc::new(Mesh::uniform(4).unwrap());
        let ops = OperatorSet::new(mesh.clone(), 0.1, Coefficients::benchmark()).unwrap();
        let acts =
            ActuatorSet::new(&mesh, &[[0.25, 0.25], [0.75, 0.5]]).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 8).unwrap();
        let y0 = col_from_slice(&mesh.interpolate(|x1, x2| x1 * x2 + 0.1));
        let mut u1 = ControlTrajectory::zeros(grid.clone(), 2);
        let mut u2 = ControlTrajectory::zeros(grid.clone(), 2);
        for k in 0..8 {
            u1.step_mut(k)[0] = (k as f64 * 0.3).sin();
            u2.step_mut(k)[1] = 0.5 - k as f64 * 0.1;
        }
        let sum = ControlTrajectory::from_values(
            grid.clone(),
            2,
            u1.values().iter().zip(u2.values()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let zero_u = ControlTrajectory::zeros(grid.clone(), 2);
        let zero_y = Col::zeros(ops.n_nodes());
        let t_sum = solve_forward(&y0, &sum, &ops, &acts).unwrap();
        let t_zero = solve_forward(&zero_y, &zero_u, &ops, &acts).unwrap();
        let t_a = solve_forward(&y0, &u1, &ops, &acts).unwrap();
        let t_b = solve_forward(&zero_y, &u2, &ops, &acts).unwrap();
        for k in 0..t_sum.states.len() {
            for i in 0..ops.n_nodes() {
                let lhs = t_sum.states[k][i] + t_zero.states[k][i];
                let rhs = t_a.states[k][i] + t_b.states[k][i];
                assert!((lhs - rhs).abs() < 1e-9, "node {i} step {k}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let mesh = Arc::new(Mesh::uniform(6).unwrap());
        let ops = OperatorSet::new(mesh.clone(), 0.1, Coefficients::benchmark()).unwrap();
        let y0 = col_from_slice(&benchmark_initial_state(&mesh));
        let grid = TimeGrid::new(0.0, 5e-3, 40).unwrap();
        let a = solve_uncontrolled(&y0, &ops, grid.clone()).unwrap();
        let b = solve_uncontrolled(&y0, &ops, grid).unwrap();
        for (ya, yb) in a.states.iter().zip(&b.states) {
            for i in 0..ya.nrows() {
                assert_eq!(ya[i].to_bits(), yb[i].to_bits());
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let ops = heat_ops(4);
        let y0 = Col::zeros(7);
        let grid = TimeGrid::new(0.0, 0.01, 2).unwrap();
        assert!(solve_uncontrolled(&y0, &ops, grid).is_err());
    }
}
