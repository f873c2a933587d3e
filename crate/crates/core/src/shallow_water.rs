//! Finite-difference solver for the 1D viscous shallow water system with
//! friction on (0,1), controlled through the boundary velocities:
//!
//!   dh/dt + d(hu)/dx = 0
//!   d(hu)/dt + d(h u^2)/dx - d(mu h du/dx)/dx + (dh/dx)/Fr^2 + r h u = 0
//!   u(t,0) = v1(t),  u(t,1) = v2(t)
//!
//! The scheme discretizes the conservative form: mass advances with an
//! explicit second-order upwind flux, momentum with explicit advection,
//! pressure and friction and implicit diffusion (one tridiagonal solve per
//! step). No boundary condition is imposed on the depth; boundary cells use
//! one-sided fluxes built from the prescribed boundary velocities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{central_derivative, h1_norm, l2_norm, GridFunction, PhysicalParams, TimeGrid};
use crate::tridiag;

/// Floor used when the velocity scale of the CFL bound degenerates.
const CFL_VELOCITY_FLOOR: f64 = 1e-12;
/// Advective CFL safety factor; violations are errors, never silent clamps.
const CFL_SAFETY: f64 = 0.5;

/// Depth/velocity pair at one time instant. The depth must be strictly
/// positive at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SWState {
    h: GridFunction,
    u: GridFunction,
    time: f64,
}

impl SWState {
    pub fn new(h: GridFunction, u: GridFunction, time: f64) -> Result<Self> {
        if h.grid() != u.grid() {
            return Err(Error::invalid("depth and velocity grids differ"));
        }
        if let Some((node, &value)) = h.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::PositivityLoss {
                time_index: 0,
                node,
                value,
            });
        }
        Ok(SWState { h, u, time })
    }

    pub fn h(&self) -> &GridFunction {
        &self.h
    }

    pub fn u(&self) -> &GridFunction {
        &self.u
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Boundary control pair sampled on the nodes of a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    time_grid: TimeGrid,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(time_grid: TimeGrid, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if left.len() != time_grid.n_nodes() || right.len() != time_grid.n_nodes() {
            return Err(Error::invalid(
                "control sample counts do not match the time grid",
            ));
        }
        if !left.iter().chain(right.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("control values must be finite"));
        }
        Ok(ControlSchedule {
            time_grid,
            left,
            right,
        })
    }

    /// Sample a pair of closures on the time grid.
    pub fn from_fns(
        time_grid: TimeGrid,
        left: impl Fn(f64) -> f64,
        right: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let l = time_grid.nodes().map(&left).collect();
        let r = time_grid.nodes().map(&right).collect();
        ControlSchedule::new(time_grid, l, r)
    }

    pub fn constant(time_grid: TimeGrid, left: f64, right: f64) -> Result<Self> {
        ControlSchedule::new(
            time_grid,
            vec![left; time_grid.n_nodes()],
            vec![right; time_grid.n_nodes()],
        )
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    /// True when both controls are strictly positive at every sample.
    pub fn strictly_positive(&self) -> bool {
        self.left.iter().chain(self.right.iter()).all(|&v| v > 0.0)
    }
}

/// Solution trajectory: one state per time node plus the parameters used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SWTrajectory {
    states: Vec<SWState>,
    time_grid: TimeGrid,
    params: PhysicalParams,
    min_depth: f64,
}

impl SWTrajectory {
    pub fn new(states: Vec<SWState>, time_grid: TimeGrid, params: PhysicalParams) -> Result<Self> {
        if states.len() != time_grid.n_nodes() {
            return Err(Error::invalid("state count does not match the time grid"));
        }
        for pair in states.windows(2) {
            if pair[1].time() <= pair[0].time() {
                return Err(Error::invalid("trajectory times must increase strictly"));
            }
        }
        let min_depth = states
            .iter()
            .flat_map(|s| s.h().values().iter().copied())
            .fold(f64::INFINITY, f64::min);
        Ok(SWTrajectory {
            states,
            time_grid,
            params,
            min_depth,
        })
    }

    pub fn states(&self) -> &[SWState] {
        &self.states
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    pub fn params(&self) -> PhysicalParams {
        self.params
    }

    /// Smallest depth value observed anywhere in the trajectory.
    pub fn min_depth(&self) -> f64 {
        self.min_depth
    }

    pub fn terminal(&self) -> &SWState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Check the compatibility conditions `v1(0) = u0(0)` and `v2(0) = u0(1)`.
pub fn check_compatibility(u0: &GridFunction, controls: &ControlSchedule, tol: f64) -> bool {
    let left_gap = (controls.left()[0] - u0.left()).abs();
    let right_gap = (controls.right()[0] - u0.right()).abs();
    left_gap <= tol && right_gap <= tol
}

/// Central slope used by the second-order upwind reconstruction; one-sided
/// at the endpoints.
fn slopes(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    let mut s = vec![0.0; n];
    s[0] = (v[1] - v[0]) / dx;
    for i in 1..n - 1 {
        s[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    s[n - 1] = (v[n - 1] - v[n - 2]) / dx;
    s
}

/// Upwind face fluxes of `q` advected by the face velocities `(u_i+u_{i+1})/2`,
/// with linear reconstruction from the upwind side. `fluxes[i]` sits between
/// nodes `i` and `i+1`.
fn upwind_fluxes(q: &[f64], u: &[f64], dx: f64) -> Vec<f64> {
    let n = q.len();
    let sl = slopes(q, dx);
    (0..n - 1)
        .map(|i| {
            let uf = 0.5 * (u[i] + u[i + 1]);
            let qf = if uf >= 0.0 {
                q[i] + 0.5 * dx * sl[i]
            } else {
                q[i + 1] - 0.5 * dx * sl[i + 1]
            };
            uf * qf
        })
        .collect()
}

/// Advance one semi-implicit time step with Dirichlet velocity values
/// `left_u`, `right_u` imposed at the new time level.
pub fn step(
    state: &SWState,
    params: &PhysicalParams,
    dt: f64,
    left_u: f64,
    right_u: f64,
) -> Result<SWState> {
    let grid = state.h().grid();
    let dx = grid.dx();
    let n = grid.n_cells();
    let h = state.h().values();
    let u = state.u().values();

    let u_max = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let dt_max = CFL_SAFETY * dx / u_max.max(CFL_VELOCITY_FLOOR);
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, dt_max });
    }

    // Mass: explicit conservative update. Boundary cells have width dx/2 and
    // use the one-sided fluxes h*u built from the boundary velocities, so the
    // discrete total mass changes exactly by -dt*(F_right - F_left).
    let fluxes = upwind_fluxes(h, u, dx);
    let flux_left = h[0] * u[0];
    let flux_right = h[n] * u[n];
    let mut h_new = vec![0.0; n + 1];
    h_new[0] = h[0] - dt / (0.5 * dx) * (fluxes[0] - flux_left);
    for i in 1..n {
        h_new[i] = h[i] - dt / dx * (fluxes[i] - fluxes[i - 1]);
    }
    h_new[n] = h[n] - dt / (0.5 * dx) * (flux_right - fluxes[n - 1]);
    if let Some((node, &value)) = h_new.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::PositivityLoss {
            time_index: 0,
            node,
            value,
        });
    }

    // Momentum: explicit advection/pressure/friction, implicit diffusion
    // d(mu h du/dx)/dx with face depths from the updated h.
    let m: Vec<f64> = h.iter().zip(u).map(|(&hi, &ui)| hi * ui).collect();
    let adv_fluxes = upwind_fluxes(&m, u, dx);
    let mu = params.mu;
    let coeff = mu / (dx * dx);

    let interior = n - 1;
    let mut lower = vec![0.0; interior.saturating_sub(1)];
    let mut upper = vec![0.0; interior.saturating_sub(1)];
    let mut diag = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    for i in 1..n {
        let row = i - 1;
        let h_face_r = 0.5 * (h_new[i] + h_new[i + 1]);
        let h_face_l = 0.5 * (h_new[i - 1] + h_new[i]);
        let advection = (adv_fluxes[i] - adv_fluxes[i - 1]) / dx;
        let pressure = (h[i + 1] - h[i - 1]) / (2.0 * dx * params.fr * params.fr);
        let friction = params.r * h[i] * u[i];
        diag[row] = h_new[i] / dt + coeff * (h_face_r + h_face_l);
        if row > 0 {
            lower[row - 1] = -coeff * h_face_l;
        }
        if row < interior - 1 {
            upper[row] = -coeff * h_face_r;
        }
        rhs[row] = h[i] * u[i] / dt - advection - pressure - friction;
        if i == 1 {
            rhs[row] += coeff * h_face_l * left_u;
        }
        if i == n - 1 {
            rhs[row] += coeff * h_face_r * right_u;
        }
    }
    let u_interior = tridiag::solve(&lower, &diag, &upper, &rhs);

    let mut u_new = vec![0.0; n + 1];
    u_new[0] = left_u;
    u_new[1..n].copy_from_slice(&u_interior);
    u_new[n] = right_u;

    SWState::new(
        GridFunction::new(grid, h_new)?,
        GridFunction::new(grid, u_new)?,
        state.time() + dt,
    )
}

/// Run the initial-boundary-value problem over the whole time grid.
///
/// The controls must satisfy the compatibility conditions with `u0` at
/// tolerance 1e-8; step errors are reported with the failing time index.
pub fn simulate(
    h0: &GridFunction,
    u0: &GridFunction,
    controls: &ControlSchedule,
    params: &PhysicalParams,
    time_grid: &TimeGrid,
) -> Result<SWTrajectory> {
    if controls.time_grid() != *time_grid {
        return Err(Error::invalid("control schedule uses a different time grid"));
    }
    if !check_compatibility(u0, controls, 1e-8) {
        return Err(Error::IncompatibleControls {
            left_gap: (controls.left()[0] - u0.left()).abs(),
            right_gap: (controls.right()[0] - u0.right()).abs(),
            tol: 1e-8,
        });
    }
    let mut states = Vec::with_capacity(time_grid.n_nodes());
    states.push(SWState::new(h0.clone(), u0.clone(), 0.0)?);
    let dt = time_grid.dt();
    for k in 0..time_grid.n_steps() {
        let next = step(
            states.last().unwrap(),
            params,
            dt,
            controls.left()[k + 1],
            controls.right()[k + 1],
        )
        .map_err(|e| match e {
            Error::PositivityLoss { node, value, .. } => Error::PositivityLoss {
                time_index: k + 1,
                node,
                value,
            },
            other => other,
        })?;
        states.push(next);
    }
    SWTrajectory::new(states, *time_grid, *params)
}

/// Discrete L2 norm of the conservative momentum residual at each interior
/// time node, built from central differences in time and space. Used to
/// validate candidate exact solutions independently of the solver.
pub fn momentum_residual(trajectory: &SWTrajectory, params: &PhysicalParams) -> Result<Vec<f64>> {
    let states = trajectory.states();
    if states.len() < 3 {
        return Err(Error::invalid(
            "momentum residual needs at least three time nodes",
        ));
    }
    let dt = trajectory.time_grid().dt();
    let fr2 = params.fr * params.fr;
    let mut out = Vec::with_capacity(states.len() - 2);
    for k in 1..states.len() - 1 {
        let prev = &states[k - 1];
        let next = &states[k + 1];
        let cur = &states[k];

        let m_prev = prev.h().zip_with(prev.u(), |h, u| h * u)?;
        let m_next = next.h().zip_with(next.u(), |h, u| h * u)?;
        let dm_dt = m_next.zip_with(&m_prev, |a, b| (a - b) / (2.0 * dt))?;

        let adv = central_derivative(&cur.h().zip_with(cur.u(), |h, u| h * u * u)?)?;
        let du = central_derivative(cur.u())?;
        let diff = central_derivative(&cur.h().zip_with(&du, |h, d| params.mu * h * d)?)?;
        let press = central_derivative(cur.h())?.map(|v| v / fr2)?;
        let fric = cur.h().zip_with(cur.u(), |h, u| params.r * h * u)?;

        let residual = dm_dt
            .zip_with(&adv, |a, b| a + b)?
            .zip_with(&diff, |a, b| a - b)?
            .zip_with(&press, |a, b| a + b)?
            .zip_with(&fric, |a, b| a + b)?;
        out.push(l2_norm(&residual));
    }
    Ok(out)
}

/// Discrete surrogates of the solution-space norm components; purely
/// diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XtNormMonitor {
    /// sup over time of the H2 surrogate of the depth.
    pub sup_h_h2: f64,
    /// L2-in-time norm of the H2 surrogate of the velocity.
    pub u_l2_h2: f64,
    /// H1-in-time, L2-in-space norm of the velocity.
    pub u_h1_l2: f64,
}

/// H2 surrogate: H1 norm of the central derivative plus the H1 norm itself.
fn h2_surrogate(f: &GridFunction) -> f64 {
    let df = central_derivative(f).expect("monitor needs at least two cells");
    h1_norm(&df) + h1_norm(f)
}

/// Evaluate the solution-space norm surrogates along a trajectory.
pub fn xt_norm_monitor(trajectory: &SWTrajectory) -> XtNormMonitor {
    let states = trajectory.states();
    let dt = trajectory.time_grid().dt();

    let sup_h_h2 = states
        .iter()
        .map(|s| h2_surrogate(s.h()))
        .fold(0.0, f64::max);

    let u_h2_sq: Vec<f64> = states
        .iter()
        .map(|s| {
            let v = h2_surrogate(s.u());
            v * v
        })
        .collect();
    let u_l2_h2 = time_trapezoid(&u_h2_sq, dt).max(0.0).sqrt();

    let u_l2_sq: Vec<f64> = states
        .iter()
        .map(|s| {
            let v = l2_norm(s.u());
            v * v
        })
        .collect();
    let du_l2_sq: Vec<f64> = (0..states.len())
        .map(|k| {
            let du = time_derivative(states, k, dt);
            let v = l2_norm(&du);
            v * v
        })
        .collect();
    let u_h1_l2 = (time_trapezoid(&u_l2_sq, dt) + time_trapezoid(&du_l2_sq, dt))
        .max(0.0)
        .sqrt();

    XtNormMonitor {
        sup_h_h2,
        u_l2_h2,
        u_h1_l2,
    }
}

fn time_trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Time derivative of the velocity at node `k`: central in the interior,
/// second-order one-sided at the endpoints (first order when only two time
/// nodes exist).
fn time_derivative(states: &[SWState], k: usize, dt: f64) -> GridFunction {
    let m = states.len();
    if m == 2 {
        return states[1]
            .u()
            .zip_with(states[0].u(), |a, b| (a - b) / dt)
            .unwrap();
    }
    let combine = |a: &SWState, b: &SWState, c: &SWState, sign: f64| {
        // sign * (-3a + 4b - c) / (2 dt)
        let ab = a.u().zip_with(b.u(), |x, y| -3.0 * x + 4.0 * y).unwrap();
        ab.zip_with(c.u(), |x, y| sign * (x - y) / (2.0 * dt)).unwrap()
    };
    if k == 0 {
        combine(&states[0], &states[1], &states[2], 1.0)
    } else if k == m - 1 {
        combine(&states[m - 1], &states[m - 2], &states[m - 3], -1.0)
    } else {
        states[k + 1]
            .u()
            .zip_with(states[k - 1].u(), |a, b| (a - b) / (2.0 * dt))
            .unwrap()
    }
}
