//! Projected proximal-gradient solver for the finite-horizon problems.
//!
//! The admissible set constrains each time step of the control to at most
//! one nonzero channel. Its nearest-point projection keeps, per step, the
//! component with the largest magnitude (smallest index on ties) and zeros
//! the rest. The solver iterates
//! `u_{k+1} = proj(u_k - (1/alpha_k) grad F(u_k))`,
//! seeding `alpha_k` from a Barzilai-Borwein secant pair clipped to
//! configured bounds, then enlarging it by backtracking until the trial
//! passes a nonmonotone sufficient-decrease test against the largest of the
//! recent costs. All inner products and the termination residual
//! `alpha_k ||u_{k+1} - u_k||` use the dt-weighted L2 norm on control space.

use crate::error::{numerical, Result};
use crate::ocp::{OcpInstance, WindowSolver};
use crate::time::{ControlTrajectory, StateTrajectory};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerOptions {
    /// Termination threshold on `alpha_k ||u_{k+1} - u_k||`.
    pub tol: f64,
    pub max_iters: usize,
    /// Window length of the nonmonotone cost reference.
    pub ls_memory: usize,
    /// Backtracking factor in (0,1); each rejection scales the trial step
    /// by it.
    pub ls_shrink: f64,
    pub ls_sufficient_decrease: f64,
    pub bb_min: f64,
    pub bb_max: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iters: 500,
            ls_memory: 10,
            ls_shrink: 0.5,
            ls_sufficient_decrease: 1e-4,
            bb_min: 1e-8,
            bb_max: 1e8,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(crate::error::invalid(msg));
        if !(self.tol > 0.0) {
            return bad(format!("optimizer.tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("optimizer.max_iters must be at least 1".into());
        }
        if self.ls_memory == 0 {
            return bad("optimizer.ls_memory must be at least 1".into());
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return bad(format!("optimizer.ls_shrink must lie in (0,1), got {}", self.ls_shrink));
        }
        if !(self.ls_sufficient_decrease > 0.0 && self.ls_sufficient_decrease < 1.0) {
            return bad(format!(
                "optimizer.ls_sufficient_decrease must lie in (0,1), got {}",
                self.ls_sufficient_decrease
            ));
        }
        if !(self.bb_min > 0.0 && self.bb_max >= self.bb_min) {
            return bad(format!(
                "optimizer.bb bounds must satisfy 0 < bb_min <= bb_max, got [{}, {}]",
                self.bb_min, self.bb_max
            ));
        }
        Ok(())
    }
}

/// Which projection the inner iteration applies: the cardinality projection
/// for switching runs, or none for the unconstrained comparison runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Cardinality1,
    Identity,
}

/// Nearest point with at most one nonzero component: keeps the entry of
/// largest magnitude, breaking ties toward the smallest index. Idempotent
/// and never increases the Euclidean norm.
pub fn project_card1_in_place(v: &mut [f64]) {
    let mut max_abs = 0.0f64;
    for x in v.iter() {
        let a = x.abs();
        if a > max_abs {
            max_abs = a;
        }
    }
    if max_abs == 0.0 {
        return;
    }
    let keep = v.iter().position(|x| x.abs() == max_abs).expect("max attained");
    for (i, x) in v.iter_mut().enumerate() {
        if i != keep {
            *x = 0.0;
        }
    }
}

pub fn project_card1(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_card1_in_place(&mut out);
    out
}

/// Applies the cardinality projection independently at every time step.
pub fn project_control(u: &ControlTrajectory) -> ControlTrajectory {
    let mut out = u.clone();
    for k in 0..out.n_steps() {
        project_card1_in_place(out.step_mut(k));
    }
    out
}

fn apply_projection(u: &ControlTrajectory, projection: Projection) -> ControlTrajectory {
    match projection {
        Projection::Cardinality1 => project_control(u),
        Projection::Identity => u.clone(),
    }
}

#[derive(Clone, Debug)]
pub struct OcpSolution {
    pub control: ControlTrajectory,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One accepted iteration of the inner solver.
#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub alpha: f64,
    pub cost: f64,
    pub step_norm: f64,
    pub backtracks: usize,
    /// Nonmonotone reference the accepted cost was tested against.
    pub reference_cost: f64,
    pub max_cardinality: usize,
}

pub(crate) struct WindowOutcome {
    pub solution: OcpSolution,
    pub trajectory: StateTrajectory,
    pub trace: Vec<IterationTrace>,
}

/// Solves one window by projected proximal gradient, returning the
/// best-feasible iterate encountered.
pub fn solve_ocp(
    inst: &OcpInstance<'_>,
    u_init: ControlTrajectory,
    opts: &OptimizerOptions,
) -> Result<OcpSolution> {
    solve_window(inst, u_init, opts, Projection::Cardinality1).map(|o| o.solution)
}

/// Same iteration with the projection disabled (all actuators may act).
pub fn solve_ocp_unconstrained(
    inst: &OcpInstance<'_>,
    u_init: ControlTrajectory,
    opts: &OptimizerOptions,
) -> Result<OcpSolution> {
    solve_window(inst, u_init, opts, Projection::Identity).map(|o| o.solution)
}

/// Solver with the per-iteration trace exposed, for diagnostics and tests.
pub fn solve_ocp_traced(
    inst: &OcpInstance<'_>,
    u_init: ControlTrajectory,
    opts: &OptimizerOptions,
    projection: Projection,
) -> Result<(OcpSolution, Vec<IterationTrace>)> {
    solve_window(inst, u_init, opts, projection).map(|o| (o.solution, o.trace))
}

fn subtract(a: &ControlTrajectory, b: &ControlTrajectory) -> ControlTrajectory {
    ControlTrajectory::from_values(
        a.grid.clone(),
        a.n_channels(),
        a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect(),
    )
    .expect("difference of matching trajectories")
}

fn bb_alpha(ss: f64, sy: f64, yy: f64, fallback: f64) -> f64 {
    if sy > 0.0 && ss > 0.0 {
        let a = sy / ss;
        if a.is_finite() && a > 0.0 {
            return a;
        }
    }
    if sy > 0.0 && yy > 0.0 {
        let a = yy / sy;
        if a.is_finite() && a > 0.0 {
            return a;
        }
    }
    fallback
}

pub(crate) fn solve_window(
    inst: &OcpInstance<'_>,
    u_init: ControlTrajectory,
    opts: &OptimizerOptions,
    projection: Projection,
) -> Result<WindowOutcome> {
    opts.validate()?;
    let solver = WindowSolver::new(inst)?;
    let mut u = apply_projection(&u_init, projection);
    let (mut cost, mut traj) = solver.eval_cost(&u)?;
    if !cost.is_finite() {
        return Err(numerical(format!("cost at the initial iterate is {cost}")));
    }
    let mut grad = solver.gradient_from(&u, &traj);

    let mut best_cost = cost;
    let mut best_u = u.clone();
    let mut recent = std::collections::VecDeque::with_capacity(opts.ls_memory);
    recent.push_back(cost);

    let mut trace = Vec::new();
    let mut alpha_seed = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..opts.max_iters {
        let mut alpha = alpha_seed.clamp(opts.bb_min, opts.bb_max);
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut backtracks = 0usize;
        let accepted = loop {
            let trial_raw = ControlTrajectory::from_values(
                u.grid.clone(),
                u.n_channels(),
                u.values()
                    .iter()
                    .zip(grad.values())
                    .map(|(x, g)| x - g / alpha)
                    .collect(),
            );
            let trial_raw = match trial_raw {
                Ok(t) => t,
                Err(_) => {
                    // non-finite trial step: shrink and retry
                    alpha /= opts.ls_shrink;
                    backtracks += 1;
                    if alpha > opts.bb_max {
                        break None;
                    }
                    continue;
                }
            };
            let trial = apply_projection(&trial_raw, projection);
            let step = subtract(&trial, &u);
            let step_norm = step.norm_l2();
            let cap = reference - opts.ls_sufficient_decrease * alpha * step_norm * step_norm;
            if let Ok(Some((trial_cost, trial_traj))) = solver.eval_cost_capped(&trial, cap) {
                break Some((trial, trial_cost, trial_traj, step, step_norm));
            }
            alpha /= opts.ls_shrink;
            backtracks += 1;
            if alpha > opts.bb_max {
                break None;
            }
        };

        let Some((new_u, new_cost, new_traj, step, step_norm)) = accepted else {
            // no acceptable step within the stepsize bounds
            break;
        };
        iterations += 1;

        u = new_u;
        cost = new_cost;
        traj = new_traj;
        if recent.len() == opts.ls_memory {
            recent.pop_front();
        }
        recent.push_back(cost);
        if cost < best_cost {
            best_cost = cost;
            best_u = u.clone();
        }
        debug_assert!(
            projection == Projection::Identity || u.max_cardinality() <= 1,
            "projected iterate violates the cardinality constraint"
        );
        trace.push(IterationTrace {
            alpha,
            cost,
            step_norm,
            backtracks,
            reference_cost: reference,
            max_cardinality: u.max_cardinality(),
        });

        if alpha * step_norm <= opts.tol {
            converged = true;
            break;
        }

        let new_grad = solver.gradient_from(&u, &traj);
        let grad_diff = subtract(&new_grad, &grad);
        let ss = step.inner_l2(&step);
        let sy = step.inner_l2(&grad_diff);
        let yy = grad_diff.inner_l2(&grad_diff);
        alpha_seed = bb_alpha(ss, sy, yy, alpha);
        grad = new_grad;
    }

    // the last iterate's trajectory is at hand; recover the best one's if
    // a nonmonotone excursion left the loop elsewhere
    let trajectory = if cost == best_cost { traj } else { solver.forward(&best_u)? };
    Ok(WindowOutcome {
        solution: OcpSolution { control: best_u, cost: best_cost, iterations, converged },
        trajectory,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuators::ActuatorSet;
    use crate::assembly::OperatorSet;
    use crate::coeffs::Coefficients;
    use crate::mesh::Mesh;
    use crate::time::TimeGrid;
    use faer::prelude::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};
    use std::sync::Arc;

    #[test]
    fn projection_examples() {
        assert_eq!(project_card1(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(project_card1(&[3.0, -5.0, 2.0]), vec![0.0, -5.0, 0.0]);
        // tie on magnitude resolves to the smallest index
        assert_eq!(project_card1(&[2.0, -2.0, 1.0]), vec![2.0, 0.0, 0.0]);
    }

    /// Brute-force nearest point among all single-support truncations.
    fn nearest_single_support(v: &[f64]) -> Vec<f64> {
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let mut best = (norm2, vec![0.0; v.len()]); // zero vector
        for j in 0..v.len() {
            let dist = norm2 - v[j] * v[j];
            if dist < best.0 {
                let mut w = vec![0.0; v.len()];
                w[j] = v[j];
                best = (dist, w);
            }
        }
        best.1
    }

    proptest! {
        #[test]
        fn projection_matches_bruteforce_oracle(v in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
            let p = project_card1(&v);
            let oracle = nearest_single_support(&v);
            // distances agree always; supports agree when the max is unique
            let d_p: f64 = v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
            let d_o: f64 = v.iter().zip(&oracle).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!((d_p - d_o).abs() <= 1e-12 * (1.0 + d_o));
        }

        #[test]
        fn projection_is_idempotent_and_contractive(v in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
            let p = project_card1(&v);
            prop_assert_eq!(project_card1(&p), p.clone());
            let n_v: f64 = v.iter().map(|x| x * x).sum();
            let n_p: f64 = p.iter().map(|x| x * x).sum();
            prop_assert!(n_p <= n_v + 1e-15);
        }
    }

    #[test]
    fn per_step_projection_distance_is_minimal() {
        let grid = TimeGrid::new(0.0, 0.1, 6).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let mut u = ControlTrajectory::zeros(grid, 3);
        for v in u.values_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let p = project_control(&u);
        for k in 0..u.n_steps() {
            let oracle = nearest_single_support(u.step(k));
            let d_p: f64 =
                u.step(k).iter().zip(p.step(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            let d_o: f64 = u.step(k).iter().zip(&oracle).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(d_p <= d_o + 1e-15);
        }
        // feasible input stays untouched
        let again = project_control(&p);
        assert_eq!(again, p);
        // all-ones input keeps channel 0 everywhere
        let mut ones = ControlTrajectory::zeros(TimeGrid::new(0.0, 0.1, 4).unwrap(), 2);
        ones.values_mut().fill(1.0);
        let proj = project_control(&ones);
        for k in 0..proj.n_steps() {
            assert_eq!(proj.step(k), &[1.0, 0.0]);
        }
    }

    struct Fixture {
        ops: OperatorSet,
        acts: ActuatorSet,
    }

    fn fixture() -> Fixture {
        let mesh = Arc::new(Mesh::uniform(4).unwrap());
        let ops = OperatorSet::new(mesh.clone(), 0.1, Coefficients::benchmark()).unwrap();
        let acts = ActuatorSet::new(&mesh, &[[0.25, 0.25], [0.75, 0.5]]).unwrap();
        Fixture { ops, acts }
    }

    #[test]
    fn stationary_zero_problem_converges_immediately() {
        let f = fixture();
        let y0 = Col::zeros(f.ops.n_nodes());
        let inst = crate::ocp::OcpInstance::new(0.0, 0.08, 0.01, 5e-4, y0, &f.ops, &f.acts).unwrap();
        let sol = solve_ocp(&inst, inst.zero_control(), &OptimizerOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.cost, 0.0);
        assert!(sol.control.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solver_matches_exhaustive_support_search() {
        // tiny instance: enumerate every per-step support pattern and solve
        // the restricted quadratic exactly; the projected iteration must get
        // within 10% of that global optimum
        let f = fixture();
        let mesh = f.ops.mesh();
        let y0 = crate::linalg::col_from_slice(&mesh.interpolate(|x1, x2| x1 * (1.0 + x2)));
        let inst =
            crate::ocp::OcpInstance::new(0.0, 0.08, 0.01, 5e-4, y0, &f.ops, &f.acts).unwrap();
        let solver = crate::ocp::WindowSolver::new(&inst).unwrap();
        let n_steps = inst.grid.n_steps;
        let dt = inst.grid.dt;

        // Euclidean derivative of the cost in flat coordinates is dt * grad_l2
        let flat_grad = |u: &ControlTrajectory| -> Vec<f64> {
            let traj = solver.forward(u).unwrap();
            solver.gradient_from(u, &traj).values().iter().map(|g| g * dt).collect()
        };
        let dim = n_steps * 2;
        let zero = inst.zero_control();
        let (j0, _) = solver.eval_cost(&zero).unwrap();
        let g0 = flat_grad(&zero);
        // Hessian columns from gradient affinity
        let mut hess = vec![vec![0.0f64; dim]; dim];
        for c in 0..dim {
            let mut e = inst.zero_control();
            e.values_mut()[c] = 1.0;
            let ge = flat_grad(&e);
            for r in 0..dim {
                hess[r][c] = ge[r] - g0[r];
            }
        }

        let mut best = f64::INFINITY;
        for pattern in 0..(1usize << n_steps) {
            // active channel per step: bit k of pattern
            let active: Vec<usize> = (0..n_steps).map(|k| (pattern >> k) & 1).collect();
            let coords: Vec<usize> = (0..n_steps).map(|k| k * 2 + active[k]).collect();
            // solve H_sub x = -g0_sub by Gaussian elimination
            let m = coords.len();
            let mut a = vec![vec![0.0f64; m + 1]; m];
            for r in 0..m {
                for c in 0..m {
                    a[r][c] = hess[coords[r]][coords[c]];
                }
                a[r][m] = -g0[coords[r]];
            }
            for col in 0..m {
                let piv = (col..m)
                    .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                    .unwrap();
                a.swap(col, piv);
                let p = a[col][col];
                for r in 0..m {
                    if r != col && a[r][col] != 0.0 {
                        let fac = a[r][col] / p;
                        for c in col..=m {
                            a[r][c] -= fac * a[col][c];
                        }
                    }
                }
            }
            let mut u = inst.zero_control();
            for r in 0..m {
                u.values_mut()[coords[r]] = a[r][m] / a[r][r];
            }
            let (j, _) = solver.eval_cost(&u).unwrap();
            best = best.min(j);
        }
        assert!(best.is_finite() && best < j0);

        let sol = solve_ocp(&inst, inst.zero_control(), &OptimizerOptions::default()).unwrap();
        assert!(sol.cost >= best - 1e-9, "solver beat the global optimum: {} < {best}", sol.cost);
        assert!(sol.cost <= 1.10 * best, "solver cost {} vs oracle {best}", sol.cost);
        assert!(sol.control.max_cardinality() <= 1);
    }

    #[test]
    fn accepted_steps_satisfy_the_nonmonotone_contract() {
        let f = fixture();
        let mesh = f.ops.mesh();
        let y0 = crate::linalg::col_from_slice(&mesh.interpolate(|x1, x2| x1 * (1.0 + x2)));
        let inst =
            crate::ocp::OcpInstance::new(0.0, 0.08, 0.01, 5e-4, y0, &f.ops, &f.acts).unwrap();
        let opts = OptimizerOptions::default();
        let (sol, trace) =
            solve_ocp_traced(&inst, inst.zero_control(), &opts, Projection::Cardinality1).unwrap();
        assert!(!trace.is_empty());
        for it in &trace {
            assert!(
                it.cost
                    <= it.reference_cost
                        - opts.ls_sufficient_decrease * it.alpha * it.step_norm * it.step_norm
                        + 1e-12,
                "armijo contract violated: {it:?}"
            );
            assert!(it.max_cardinality <= 1);
        }
        assert!(sol.cost <= trace[0].reference_cost);
    }
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
    fn bench_first_window() {
        let mesh = Arc::new(Mesh::uniform(32).unwrap());
        let ops = OperatorSet::new(mesh.clone(), 0.1, Coefficients::benchmark()).unwrap();
        let acts = ActuatorSet::new(
            &mesh,
            &[[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
        )
        .unwrap();
        let y0 = crate::linalg::col_from_slice(&benchmark_initial_state(&mesh));
        let inst = crate::ocp::OcpInstance::new(0.0, 1.0, 5e-3, 5e-4, y0, &ops, &acts).unwrap();
        let t = Instant::now();
        let (sol, trace) = solve_ocp_traced(
            &inst,
            inst.zero_control(),
            &OptimizerOptions::default(),
            Projection::Cardinality1,
        )
        .unwrap();
        let backtracks: usize = trace.iter().map(|i| i.backtracks).sum();
        println!(
            "window0: iters={} backtracks={} cost={:.4e} converged={} time={:?}",
            sol.iterations,
            backtracks,
            sol.cost,
            sol.converged,
            t.elapsed()
        );
    }
}
