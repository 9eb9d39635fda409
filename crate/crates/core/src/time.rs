//! Time grids and the trajectories living on them.

use crate::error::{invalid, Result};
use faer::prelude::*;

/// Uniform time grid with nodes `t_k = t0 + k dt`, `k = 0..=n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("step size must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(invalid("time grid needs at least one step"));
        }
        Ok(Self { t0, dt, n_steps })
    }

    pub fn node(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Midpoint of step `k`, where the time-varying operator is sampled.
    pub fn midpoint(&self, k: usize) -> f64 {
        self.t0 + (k as f64 + 0.5) * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Rounds `span / step` to an integer step count, requiring the product to
/// match `span` to a 1e-12 relative tolerance.
pub fn steps_in(span: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !(span > 0.0) {
        return Err(invalid(format!("span {span} and step {step} must be positive")));
    }
    let ratio = span / step;
    let k = ratio.round();
    if k < 0.5 || (ratio - k).abs() > 1e-12 * ratio.abs().max(1.0) {
        return Err(invalid(format!("{span} is not an integer multiple of {step}")));
    }
    Ok(k as usize)
}

/// Piecewise-constant control values: channel `j` holds the value
/// `values[k * n_channels + j]` on the interval `[t_k, t_{k+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTrajectory {
    pub grid: TimeGrid,
    n_channels: usize,
    values: Vec<f64>,
}

impl ControlTrajectory {
    pub fn zeros(grid: TimeGrid, n_channels: usize) -> Self {
        let values = vec![0.0; grid.n_steps * n_channels];
        Self { grid, n_channels, values }
    }

    pub fn from_values(grid: TimeGrid, n_channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps * n_channels {
            return Err(invalid(format!(
                "control storage holds {} values, expected {} steps x {} channels",
                values.len(),
                grid.n_steps,
                n_channels
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("control values must be finite"));
        }
        Ok(Self { grid, n_channels, values })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_channels..(k + 1) * self.n_channels]
    }

    pub fn step_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.n_channels..(k + 1) * self.n_channels]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// dt-weighted L2 inner product over the horizon.
    pub fn inner_l2(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        self.grid.dt * dot
    }

    /// dt-weighted L2 norm over the horizon.
    pub fn norm_l2(&self) -> f64 {
        self.inner_l2(self).max(0.0).sqrt()
    }

    /// Largest per-step cardinality (number of nonzero channels).
    pub fn max_cardinality(&self) -> usize {
        (0..self.n_steps())
            .map(|k| self.step(k).iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap_or(0)
    }
}

/// States at every grid node; `states[0]` is the initial condition.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub grid: TimeGrid,
    pub states: Vec<Col<f64>>,
}

impl StateTrajectory {
    pub fn n_nodes(&self) -> usize {
        self.states.len()
    }

    pub fn final_state(&self) -> &Col<f64> {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}
