//! Crank-Nicolson solver for the boundary-controlled heat equation
//!
//!   dh/dt - mu d2h/dx2 = 0   on (0,T) x (0,1)
//!   h(t,0) = v_left(t),  h(t,1) = v_right(t)
//!
//! with strictly positive Dirichlet controls injected at the new time level.
//! Second order in space and time for smooth data, unconditionally stable.
//! The controls carry depth values directly; positivity is a validated
//! invariant, not an implicit convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::shallow_water::ControlSchedule;
use crate::tridiag;

/// Tolerance for the trace compatibility between the initial state and the
/// controls at t = 0.
pub const TRACE_TOL: f64 = 1e-8;

/// Well-posed boundary-controlled heat problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatProblem {
    mu: f64,
    h0: GridFunction,
    controls: ControlSchedule,
    time_grid: TimeGrid,
}

impl HeatProblem {
    pub fn new(
        mu: f64,
        h0: GridFunction,
        controls: ControlSchedule,
        time_grid: TimeGrid,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("diffusivity mu must be positive"));
        }
        if controls.time_grid() != time_grid {
            return Err(Error::invalid("controls use a different time grid"));
        }
        if h0.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("initial depth must be strictly positive"));
        }
        if !controls.strictly_positive() {
            return Err(Error::invalid("boundary controls must be strictly positive"));
        }
        let left_gap = (h0.left() - controls.left()[0]).abs();
        let right_gap = (h0.right() - controls.right()[0]).abs();
        if left_gap > TRACE_TOL || right_gap > TRACE_TOL {
            return Err(Error::IncompatibleControls {
                left_gap,
                right_gap,
                tol: TRACE_TOL,
            });
        }
        Ok(HeatProblem {
            mu,
            h0,
            controls,
            time_grid,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn initial(&self) -> &GridFunction {
        &self.h0
    }

    pub fn controls(&self) -> &ControlSchedule {
        &self.controls
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }
}

/// Heat trajectory: one snapshot per time node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatTrajectory {
    snapshots: Vec<GridFunction>,
    time_grid: TimeGrid,
    mu: f64,
}

impl HeatTrajectory {
    pub fn new(snapshots: Vec<GridFunction>, time_grid: TimeGrid, mu: f64) -> Result<Self> {
        if snapshots.len() != time_grid.n_nodes() {
            return Err(Error::invalid("snapshot count does not match time grid"));
        }
        Ok(HeatTrajectory {
            snapshots,
            time_grid,
            mu,
        })
    }

    pub fn snapshots(&self) -> &[GridFunction] {
        &self.snapshots
    }

    pub fn snapshot(&self, k: usize) -> &GridFunction {
        &self.snapshots[k]
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Crank-Nicolson time stepping with strongly imposed Dirichlet values.
pub fn solve_heat(problem: &HeatProblem) -> HeatTrajectory {
    let grid = problem.h0.grid();
    let n = grid.n_cells();
    let dx = grid.dx();
    let dt = problem.time_grid.dt();
    let beta = 0.5 * problem.mu * dt / (dx * dx);

    let interior = n - 1;
    let lower = vec![-beta; interior.saturating_sub(1)];
    let upper = vec![-beta; interior.saturating_sub(1)];
    let diag = vec![1.0 + 2.0 * beta; interior];

    let left = problem.controls.left();
    let right = problem.controls.right();
    let mut snapshots = Vec::with_capacity(problem.time_grid.n_nodes());
    snapshots.push(problem.h0.clone());

    let mut current: Vec<f64> = problem.h0.values().to_vec();
    for k in 0..problem.time_grid.n_steps() {
        let mut rhs = vec![0.0; interior];
        for i in 1..n {
            rhs[i - 1] =
                current[i] + beta * (current[i + 1] - 2.0 * current[i] + current[i - 1]);
        }
        rhs[0] += beta * left[k + 1];
        rhs[interior - 1] += beta * right[k + 1];
        let solution = tridiag::solve(&lower, &diag, &upper, &rhs);

        let mut next = vec![0.0; n + 1];
        next[0] = left[k + 1];
        next[1..n].copy_from_slice(&solution);
        next[n] = right[k + 1];
        snapshots.push(GridFunction::new(grid, next.clone()).expect("finite CN step"));
        current = next;
    }

    HeatTrajectory::new(snapshots, problem.time_grid, problem.mu).expect("consistent sizes")
}

/// Boundary fluxes `mu dh/dx` at x = 0 and x = 1 for every time node,
/// from second-order one-sided stencils.
pub fn boundary_flux(trajectory: &HeatTrajectory, mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = trajectory.snapshots[0].grid();
    if grid.n_cells() < 4 {
        return Err(Error::invalid("boundary flux needs at least four cells"));
    }
    let dx = grid.dx();
    let n = grid.n_cells();
    let mut at_left = Vec::with_capacity(trajectory.snapshots.len());
    let mut at_right = Vec::with_capacity(trajectory.snapshots.len());
    for snap in &trajectory.snapshots {
        let v = snap.values();
        at_left.push(mu * (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx));
        at_right.push(mu * (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dx));
    }
    Ok((at_left, at_right))
}

/// Last snapshot of the trajectory.
pub fn terminal_state(trajectory: &HeatTrajectory) -> &GridFunction {
    trajectory
        .snapshots
        .last()
        .expect("trajectory is never empty")
}
