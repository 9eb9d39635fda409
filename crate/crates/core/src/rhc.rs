//! Receding-horizon driver.
//!
//! Starting from the initial state, the driver repeatedly solves the
//! finite-horizon problem on `[t, t + horizon]`, keeps the optimal control
//! on the first sampling interval `[t, t + delta)`, advances the state to
//! `t + delta` along the already computed optimal trajectory (no re-solve,
//! so window boundaries hand over the identical state vector), and warm
//! starts the next window from the previous optimum shifted by `delta`,
//! zero-padded and re-projected.

use crate::actuators::ActuatorSet;
use crate::assembly::OperatorSet;
use crate::coeffs::Coefficients;
use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use crate::norms::NormContext;
use crate::optimizer::{solve_window, OptimizerOptions, Projection};
use crate::time::{steps_in, ControlTrajectory, TimeGrid};
use faer::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Full description of one receding-horizon experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhcConfig {
    /// Cells per side of the uniform triangulation.
    pub mesh_n: usize,
    /// Diffusion coefficient.
    pub nu: f64,
    /// Control penalty in the window cost.
    pub beta: f64,
    /// Inner time step.
    pub dt: f64,
    /// Sampling time: the prefix of each window solution that is applied.
    pub delta: f64,
    /// Prediction horizon of each window.
    pub horizon: f64,
    /// Total simulated time.
    pub t_infinity: f64,
    /// Actuator coordinates (explicit; presets resolve to these).
    pub actuators: Vec<[f64; 2]>,
    pub optimizer: OptimizerOptions,
}

impl RhcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mesh_n < 2 {
            return Err(invalid(format!("mesh_n must be at least 2, got {}", self.mesh_n)));
        }
        if !(self.nu > 0.0) || !(self.beta > 0.0) {
            return Err(invalid(format!(
                "nu and beta must be positive, got nu={}, beta={}",
                self.nu, self.beta
            )));
        }
        if self.delta > self.horizon {
            return Err(invalid(format!(
                "sampling time {} exceeds the prediction horizon {}",
                self.delta, self.horizon
            )));
        }
        self.steps_per_delta()?;
        self.steps_per_horizon()?;
        self.n_windows()?;
        self.optimizer.validate()
    }

    pub fn steps_per_delta(&self) -> Result<usize> {
        steps_in(self.delta, self.dt)
            .map_err(|_| invalid(format!("delta {} is not a multiple of dt {}", self.delta, self.dt)))
    }

    pub fn steps_per_horizon(&self) -> Result<usize> {
        steps_in(self.horizon, self.dt).map_err(|_| {
            invalid(format!("horizon {} is not a multiple of dt {}", self.horizon, self.dt))
        })
    }

    pub fn n_windows(&self) -> Result<usize> {
        steps_in(self.t_infinity, self.delta).map_err(|_| {
            invalid(format!(
                "t_infinity {} is not a multiple of delta {}",
                self.t_infinity, self.delta
            ))
        })
    }

    /// Nodes of the full `[0, t_infinity]` grid.
    pub fn global_grid(&self) -> Result<TimeGrid> {
        let n = self.n_windows()? * self.steps_per_delta()?;
        TimeGrid::new(0.0, self.dt, n)
    }
}

/// Assembled operators for one configuration.
pub struct RhcContext {
    pub config: RhcConfig,
    pub mesh: Arc<Mesh>,
    pub ops: OperatorSet,
    pub actuators: ActuatorSet,
    pub norms: NormContext,
}

impl RhcContext {
    pub fn new(config: &RhcConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Arc::new(Mesh::uniform(config.mesh_n)?);
        let ops = OperatorSet::new(mesh.clone(), config.nu, Coefficients::benchmark())?;
        let actuators = ActuatorSet::new(&mesh, &config.actuators)?;
        let norms = NormContext::new(&ops)?;
        Ok(Self { config: config.clone(), mesh, ops, actuators, norms })
    }
}

/// Norms of the state at one time node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub h: f64,
    pub v: f64,
    pub vprime: f64,
}

/// Active actuator (if any) and signed magnitude on one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchSample {
    pub active: Option<usize>,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowDiagnostics {
    pub t_start: f64,
    pub iterations: usize,
    pub cost: f64,
    pub converged: bool,
}

/// Everything a run produces: the concatenated control, its switching path
/// (absent for unconstrained runs), per-node norm history, the accumulated
/// cost of the applied control over `[0, t_infinity]`, and per-window
/// solver diagnostics. `aborted` carries the failure message of a run that
/// stopped early; all data up to the failure is retained.
#[derive(Clone, Debug)]
pub struct RhcReport {
    pub control: ControlTrajectory,
    pub switching_path: Option<Vec<SwitchSample>>,
    pub norm_history: Vec<NormSample>,
    pub accumulated_cost: f64,
    pub window_diagnostics: Vec<WindowDiagnostics>,
    pub aborted: Option<String>,
}

impl RhcReport {
    pub fn final_norms(&self) -> NormSample {
        *self.norm_history.last().expect("norm history is never empty")
    }
}

/// Per-step switching pair of a feasible control: the index of the nonzero
/// channel and its signed value, or none on steps with no forcing.
pub fn extract_switching(u: &ControlTrajectory) -> Result<Vec<SwitchSample>> {
    let mut path = Vec::with_capacity(u.n_steps());
    for k in 0..u.n_steps() {
        let step = u.step(k);
        let mut sample = SwitchSample { active: None, value: 0.0 };
        for (j, &v) in step.iter().enumerate() {
            if v != 0.0 {
                if sample.active.is_some() {
                    return Err(invalid(format!(
                        "step {k} has more than one active channel"
                    )));
                }
                sample = SwitchSample { active: Some(j), value: v };
            }
        }
        path.push(sample);
    }
    Ok(path)
}

/// Runs the switching receding-horizon loop.
pub fn run_rhc(config: &RhcConfig, y0: &Col<f64>) -> Result<RhcReport> {
    let ctx = RhcContext::new(config)?;
    run_rhc_with_context(&ctx, y0)
}

pub fn run_rhc_with_context(ctx: &RhcContext, y0: &Col<f64>) -> Result<RhcReport> {
    drive(ctx, y0, Projection::Cardinality1)
}

/// The unconstrained comparison: the same pipeline with the projection
/// replaced by the identity, so all actuators may act simultaneously.
pub fn run_rhc_nonswitching(config: &RhcConfig, y0: &Col<f64>) -> Result<RhcReport> {
    let ctx = RhcContext::new(config)?;
    run_rhc_nonswitching_with_context(&ctx, y0)
}

pub fn run_rhc_nonswitching_with_context(ctx: &RhcContext, y0: &Col<f64>) -> Result<RhcReport> {
    drive(ctx, y0, Projection::Identity)
}

/// Free dynamics over `[0, t_infinity]` reported in the same shape: zero
/// control, no windows, cost of the uncontrolled trajectory.
pub fn run_free(ctx: &RhcContext, y0: &Col<f64>) -> Result<RhcReport> {
    let grid = ctx.config.global_grid()?;
    let traj = crate::dynamics::solve_uncontrolled(y0, &ctx.ops, grid.clone())?;
    let control = ControlTrajectory::zeros(grid, ctx.actuators.len());
    let norm_history = norm_series(&ctx.norms, &traj.states, &control.grid);
    let accumulated_cost =
        crate::ocp::quadrature_cost(&traj.states, &control, ctx.ops.mass(), ctx.config.beta);
    let switching_path = Some(extract_switching(&control)?);
    Ok(RhcReport {
        control,
        switching_path,
        norm_history,
        accumulated_cost,
        window_diagnostics: Vec::new(),
        aborted: None,
    })
}

fn norm_series(norms: &NormContext, states: &[Col<f64>], grid: &TimeGrid) -> Vec<NormSample> {
    states
        .iter()
        .enumerate()
        .map(|(k, y)| NormSample {
            t: grid.node(k),
            h: norms.h_norm(y),
            v: norms.v_norm(y),
            vprime: norms.vprime_norm(y),
        })
        .collect()
}

fn drive(ctx: &RhcContext, y0: &Col<f64>, projection: Projection) -> Result<RhcReport> {
    let config = &ctx.config;
    let m = ctx.actuators.len();
    if m == 0 {
        return Err(invalid("receding-horizon runs need at least one actuator"));
    }
    if y0.nrows() != ctx.ops.n_nodes() {
        return Err(invalid(format!(
            "initial state has {} entries, mesh has {} nodes",
            y0.nrows(),
            ctx.ops.n_nodes()
        )));
    }
    let n_delta = config.steps_per_delta()?;
    let n_horizon = config.steps_per_horizon()?;
    let n_windows = config.n_windows()?;
    let global = config.global_grid()?;

    let mut control = ControlTrajectory::zeros(global.clone(), m);
    let mut states: Vec<Col<f64>> = Vec::with_capacity(global.n_steps + 1);
    states.push(y0.clone());
    let mut diagnostics = Vec::with_capacity(n_windows);
    let mut warm: Option<ControlTrajectory> = None;
    let mut current = y0.clone();
    let mut aborted = None;

    for w in 0..n_windows {
        let start_step = w * n_delta;
        let t_start = global.node(start_step);
        let window_grid = TimeGrid::new(t_start, config.dt, n_horizon)?;
        let inst = crate::ocp::OcpInstance {
            t0: t_start,
            horizon: config.horizon,
            beta: config.beta,
            grid: window_grid.clone(),
            y0: current.clone(),
            ops: &ctx.ops,
            actuators: &ctx.actuators,
        };
        let u_init = match &warm {
            None => ControlTrajectory::zeros(window_grid.clone(), m),
            Some(prev) => shift_left(prev, n_delta, window_grid.clone()),
        };
        let outcome = match solve_window(&inst, u_init, &config.optimizer, projection) {
            Ok(o) => o,
            Err(e) => {
                aborted = Some(format!("window {w} at t = {t_start}: {e}"));
                break;
            }
        };
        // apply the prefix of the window optimum
        for k in 0..n_delta {
            control
                .step_mut(start_step + k)
                .copy_from_slice(outcome.solution.control.step(k));
        }
        // hand over the state along the optimal trajectory itself
        for k in 1..=n_delta {
            states.push(outcome.trajectory.states[k].clone());
        }
        current = outcome.trajectory.states[n_delta].clone();
        diagnostics.push(WindowDiagnostics {
            t_start,
            iterations: outcome.solution.iterations,
            cost: outcome.solution.cost,
            converged: outcome.solution.converged,
        });
        warm = Some(outcome.solution.control);
    }

    // on abort, truncate the control to the completed prefix
    let control = if aborted.is_some() {
        let done = states.len() - 1;
        let grid = TimeGrid { t0: 0.0, dt: config.dt, n_steps: done.max(1) };
        let mut truncated = ControlTrajectory::zeros(grid, m);
        for k in 0..done {
            truncated.step_mut(k).copy_from_slice(control.step(k));
        }
        truncated
    } else {
        control
    };

    let norm_history = norm_series(&ctx.norms, &states, &global);
    let accumulated_cost = if aborted.is_none() {
        crate::ocp::quadrature_cost(&states, &control, ctx.ops.mass(), config.beta)
    } else {
        f64::NAN
    };
    let switching_path = match projection {
        Projection::Cardinality1 => Some(extract_switching(&control)?),
        Projection::Identity => None,
    };
    Ok(RhcReport {
        control,
        switching_path,
        norm_history,
        accumulated_cost,
        window_diagnostics: diagnostics,
        aborted,
    })
}

/// Warm start: drop the first `n_delta` steps of the previous optimum,
/// zero-pad the tail, and re-project.
fn shift_left(prev: &ControlTrajectory, n_delta: usize, grid: TimeGrid) -> ControlTrajectory {
    let m = prev.n_channels();
    let mut out = ControlTrajectory::zeros(grid, m);
    for k in 0..out.n_steps() {
        let src = k + n_delta;
        if src < prev.n_steps() {
            out.step_mut(k).copy_from_slice(prev.step(src));
        }
    }
    out
}
