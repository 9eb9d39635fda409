//! Finite-horizon quadratic cost and its exact discrete gradient.
//!
//! The cost of a control `u` over a window is
//! `J(u) = 1/2 sum_k w_k dt ||y_k||_M^2 + beta/2 sum_k dt ||u_k||^2`,
//! with trapezoidal weights `w_k` on the state nodes and exact per-step
//! integration of the piecewise-constant control. The gradient is the
//! gradient of this fully discrete functional: the Crank-Nicolson recursion
//! is transposed step by step, reusing the factorizations of the forward
//! scheme, so directional derivatives match finite differences of the cost
//! to solver precision.
//!
//! Gradients are represented in the dt-weighted L2 inner product on control
//! space (the one the optimizer measures steps in): the channel-j, step-k
//! component is `beta u_{k,j} - (d^j)^T p_{k+1} / dt`.

use crate::actuators::ActuatorSet;
use crate::assembly::OperatorSet;
use crate::dynamics::CnStep;
use crate::error::{invalid, Result};
use crate::linalg::quad_form;
use crate::time::{steps_in, ControlTrajectory, StateTrajectory, TimeGrid};
use faer::prelude::*;

/// One finite-horizon problem: minimize the quadratic cost over controls on
/// `[t0, t0 + horizon]` starting from `y0`.
pub struct OcpInstance<'a> {
    pub t0: f64,
    pub horizon: f64,
    pub beta: f64,
    pub grid: TimeGrid,
    pub y0: Col<f64>,
    pub ops: &'a OperatorSet,
    pub actuators: &'a ActuatorSet,
}

impl<'a> OcpInstance<'a> {
    pub fn new(
        t0: f64,
        horizon: f64,
        dt: f64,
        beta: f64,
        y0: Col<f64>,
        ops: &'a OperatorSet,
        actuators: &'a ActuatorSet,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if !(beta > 0.0) {
            return Err(invalid(format!("control penalty must be positive, got {beta}")));
        }
        let n_steps = steps_in(horizon, dt)?;
        let grid = TimeGrid::new(t0, dt, n_steps)?;
        if y0.nrows() != ops.n_nodes() {
            return Err(invalid(format!(
                "initial state has {} entries, mesh has {} nodes",
                y0.nrows(),
                ops.n_nodes()
            )));
        }
        Ok(Self { t0, horizon, beta, grid, y0, ops, actuators })
    }

    /// Zero control on this instance's grid.
    pub fn zero_control(&self) -> ControlTrajectory {
        ControlTrajectory::zeros(self.grid.clone(), self.actuators.len())
    }

    fn check_control(&self, u: &ControlTrajectory) -> Result<()> {
        if u.grid != self.grid || u.n_channels() != self.actuators.len() {
            return Err(invalid("control does not match the instance grid and channel count"));
        }
        Ok(())
    }
}

/// Costates of the transposed recursion; `costates[k]` multiplies the step-k
/// constraint and drives the gradient entry of `u_k`. The terminal costate
/// carries only the trapezoidal weight of the final node (the window has no
/// terminal cost).
pub struct AdjointTrajectory {
    pub grid: TimeGrid,
    pub costates: Vec<Col<f64>>,
}

/// Per-step Crank-Nicolson matrices of one window, factorized once and
/// shared by every forward and adjoint sweep over that window.
pub struct WindowSolver<'a> {
    inst: &'a OcpInstance<'a>,
    steps: Vec<CnStep>,
}

impl<'a> WindowSolver<'a> {
    pub fn new(inst: &'a OcpInstance<'a>) -> Result<Self> {
        let grid = &inst.grid;
        let mut steps = Vec::with_capacity(grid.n_steps);
        for k in 0..grid.n_steps {
            steps.push(crate::dynamics::cn_step(inst.ops, grid.midpoint(k), grid.dt)?);
        }
        Ok(Self { inst, steps })
    }

    pub fn forward(&self, u: &ControlTrajectory) -> Result<StateTrajectory> {
        self.inst.check_control(u)?;
        let grid = self.inst.grid.clone();
        let mut states = Vec::with_capacity(grid.n_steps + 1);
        states.push(self.inst.y0.clone());
        let mut rhs = Col::<f64>::zeros(self.inst.y0.nrows());
        for k in 0..grid.n_steps {
            crate::linalg::spmv_into(&self.steps[k].e_minus, &states[k], &mut rhs);
            self.inst.actuators.accumulate_forcing(u.step(k), &mut rhs);
            self.steps[k].factor.solve_in_place(&mut rhs);
            states.push(rhs.clone());
        }
        Ok(StateTrajectory { grid, states })
    }

    /// Quadrature of the cost along an already computed trajectory.
    pub fn cost_of(&self, traj: &StateTrajectory, u: &ControlTrajectory) -> f64 {
        quadrature_cost(&traj.states, u, self.inst.ops.mass(), self.inst.beta)
    }

    pub fn eval_cost(&self, u: &ControlTrajectory) -> Result<(f64, StateTrajectory)> {
        let traj = self.forward(u)?;
        Ok((self.cost_of(&traj, u), traj))
    }

    /// Cost evaluation that abandons the sweep as soon as the cost provably
    /// exceeds `cap`. Every node adds a nonnegative amount, so a running
    /// lower bound (the quadrature with the current node treated as final)
    /// is monotone and the early exit never changes an accept decision.
    /// Returns the exact cost and trajectory when it is at most `cap`.
    pub fn eval_cost_capped(
        &self,
        u: &ControlTrajectory,
        cap: f64,
    ) -> Result<Option<(f64, StateTrajectory)>> {
        self.inst.check_control(u)?;
        let grid = self.inst.grid.clone();
        let dt = grid.dt;
        let beta = self.inst.beta;
        let mass = self.inst.ops.mass();
        let mut control_term = 0.0;
        for k in 0..u.n_steps() {
            control_term += dt * u.step(k).iter().map(|v| v * v).sum::<f64>();
        }
        let fixed = 0.5 * beta * control_term;

        let mut states = Vec::with_capacity(grid.n_steps + 1);
        states.push(self.inst.y0.clone());
        let q0 = quad_form(mass, &self.inst.y0, &self.inst.y0);
        let mut weighted_sum = 0.5 * q0;
        let mut last_q = q0;
        let mut rhs = Col::<f64>::zeros(self.inst.y0.nrows());
        for k in 0..grid.n_steps {
            crate::linalg::spmv_into(&self.steps[k].e_minus, &states[k], &mut rhs);
            self.inst.actuators.accumulate_forcing(u.step(k), &mut rhs);
            self.steps[k].factor.solve_in_place(&mut rhs);
            let q = quad_form(mass, &rhs, &rhs);
            weighted_sum += q;
            last_q = q;
            // lower bound: pretend node k+1 is the final (half-weight) node
            let bound = fixed + 0.5 * dt * (weighted_sum - 0.5 * q);
            if !bound.is_finite() || bound > cap {
                return Ok(None);
            }
            states.push(rhs.clone());
        }
        let cost = fixed + 0.5 * dt * (weighted_sum - 0.5 * last_q);
        if !cost.is_finite() || cost > cap {
            return Ok(None);
        }
        Ok(Some((cost, StateTrajectory { grid, states })))
    }

    /// Backward sweep of the transposed scheme along `traj`.
    pub fn adjoint(&self, traj: &StateTrajectory) -> AdjointTrajectory {
        let mut costates = vec![Col::<f64>::zeros(0); self.inst.grid.n_steps];
        self.backward_sweep(traj, |k, p| costates[k] = p.clone());
        AdjointTrajectory { grid: self.inst.grid.clone(), costates }
    }

    /// Runs the transposed recursion, handing each costate `p_{k+1}` to
    /// `visit(k, ...)` from the last step down to the first.
    fn backward_sweep(&self, traj: &StateTrajectory, mut visit: impl FnMut(usize, &Col<f64>)) {
        let n = self.inst.grid.n_steps;
        let dt = self.inst.grid.dt;
        let mass = self.inst.ops.mass();
        let nn = self.inst.y0.nrows();
        // terminal node carries half the trapezoidal weight
        let mut p = Col::<f64>::zeros(nn);
        crate::linalg::spmv_into(mass, &traj.states[n], &mut p);
        for i in 0..nn {
            p[i] *= -0.5 * dt;
        }
        self.steps[n - 1].factor.solve_transpose_in_place(&mut p);
        visit(n - 1, &p);
        let mut rhs = Col::<f64>::zeros(nn);
        let mut work = Col::<f64>::zeros(nn);
        for j in (1..n).rev() {
            crate::linalg::spmv_transpose_into(&self.steps[j].e_minus, &p, &mut rhs);
            crate::linalg::spmv_into(mass, &traj.states[j], &mut work);
            for i in 0..nn {
                rhs[i] -= dt * work[i];
            }
            self.steps[j - 1].factor.solve_transpose_in_place(&mut rhs);
            std::mem::swap(&mut p, &mut rhs);
            visit(j - 1, &p);
        }
    }

    /// Gradient in the dt-weighted L2 inner product, sharing the forward
    /// trajectory that produced the cost. The costates are consumed on the
    /// fly; only their pairings with the load vectors are kept.
    pub fn gradient_from(&self, u: &ControlTrajectory, traj: &StateTrajectory) -> ControlTrajectory {
        let m = self.inst.actuators.len();
        let dt = self.inst.grid.dt;
        let mut g = ControlTrajectory::zeros(self.inst.grid.clone(), m);
        let mut pairing = vec![0.0; m];
        self.backward_sweep(traj, |k, p| {
            self.inst.actuators.pair_with(p, &mut pairing);
            let gk = g.step_mut(k);
            let uk = u.step(k);
            for j in 0..m {
                gk[j] = self.inst.beta * uk[j] - pairing[j] / dt;
            }
        });
        g
    }

    pub fn cost_and_gradient(
        &self,
        u: &ControlTrajectory,
    ) -> Result<(f64, StateTrajectory, ControlTrajectory)> {
        let (cost, traj) = self.eval_cost(u)?;
        let grad = self.gradient_from(u, &traj);
        Ok((cost, traj, grad))
    }
}

/// Trapezoidal state term plus exact control term, shared by the window
/// solver and the receding-horizon cost accumulation.
pub(crate) fn quadrature_cost(
    states: &[Col<f64>],
    u: &ControlTrajectory,
    mass: &SparseColMat<usize, f64>,
    beta: f64,
) -> f64 {
    let n = u.n_steps();
    debug_assert_eq!(states.len(), n + 1);
    let dt = u.grid.dt;
    let mut state_term = 0.0;
    for (k, y) in states.iter().enumerate() {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        state_term += w * dt * quad_form(mass, y, y);
    }
    let mut control_term = 0.0;
    for k in 0..n {
        control_term += dt * u.step(k).iter().map(|v| v * v).sum::<f64>();
    }
    0.5 * state_term + 0.5 * beta * control_term
}

/// Evaluates the cost of `u`, returning the trajectory for reuse.
pub fn eval_cost(u: &ControlTrajectory, inst: &OcpInstance<'_>) -> Result<(f64, StateTrajectory)> {
    WindowSolver::new(inst)?.eval_cost(u)
}

/// Exact gradient of the discrete cost with respect to the per-step control
/// values, as the dt-weighted L2 representative.
pub fn gradient(u: &ControlTrajectory, inst: &OcpInstance<'_>) -> Result<ControlTrajectory> {
    let solver = WindowSolver::new(inst)?;
    let traj = solver.forward(u)?;
    Ok(solver.gradient_from(u, &traj))
}


#[cfg(test)]
mod bench {
    use super::*;
    use crate::actuators::ActuatorSet;
    use crate::assembly::OperatorSet;
    use crate::coeffs::{benchmark_initial_state, Coefficients};
    use crate::mesh::Mesh;
    use std::sync::Arc;
    use std::time::Instant;

    #[test]
    #[ignore]
    fn bench_window_sweeps() {
        let mesh = Arc::new(Mesh::uniform(32).unwrap());
        let ops = OperatorSet::new(mesh.clone(), 0.1, Coefficients::benchmark()).unwrap();
        let acts = ActuatorSet::new(
            &mesh,
            &[[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
        )
        .unwrap();
        let y0 = crate::linalg::col_from_slice(&benchmark_initial_state(&mesh));
        let inst = OcpInstance::new(0.0, 1.0, 5e-3, 5e-4, y0, &ops, &acts).unwrap();
        let t = Instant::now();
        let solver = WindowSolver::new(&inst).unwrap();
        println!("setup (200 assemblies + LU): {:?}", t.elapsed());
        let u = inst.zero_control();
        let t = Instant::now();
        let (_, traj) = solver.eval_cost(&u).unwrap();
        println!("forward + cost:              {:?}", t.elapsed());
        let t = Instant::now();
        let _g = solver.gradient_from(&u, &traj);
        println!("gradient (adjoint sweep):    {:?}", t.elapsed());
        let t = Instant::now();
        for _ in 0..10 {
            let _ = solver.eval_cost(&u).unwrap();
        }
        println!("10x forward + cost:          {:?}", t.elapsed());
    }
}
