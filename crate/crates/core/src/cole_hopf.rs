//! Log-depth transformation chain connecting the shallow water system to a
//! boundary-controlled heat equation.
//!
//! For depths solving dh/dt = mu d2h/dx2, the pair (h, -mu d(ln h)/dx) solves
//! the full conservative shallow water system exactly when r = 1/(mu Fr^2):
//! the friction and pressure terms cancel and the velocity decouples. This
//! module builds such quasi-solutions, maps velocities to log-depth
//! potentials and back, derives the reduced boundary controls, and verifies
//! the whole chain by comparing the reconstructed depth against a direct
//! heat solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    central_derivative, cumulative_trapezoid, l2_norm, trapezoid_integral, GridFunction,
    PhysicalParams, TimeGrid,
};
use crate::heat::{solve_heat, HeatProblem, HeatTrajectory};
use crate::shallow_water::{ControlSchedule, SWState, SWTrajectory};

/// Exponentiation overflow guard for log-depth values.
pub const POTENTIAL_BOUND: f64 = 700.0;

/// Log-depth field at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialState {
    w: GridFunction,
    time: f64,
}

impl PotentialState {
    pub fn new(w: GridFunction, time: f64) -> Result<Self> {
        if w.values().iter().any(|v| v.abs() > POTENTIAL_BOUND) {
            return Err(Error::invalid(format!(
                "log-depth exceeds the overflow guard {POTENTIAL_BOUND}"
            )));
        }
        Ok(PotentialState { w, time })
    }

    pub fn w(&self) -> &GridFunction {
        &self.w
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Reconstructed depth `exp(w)`.
    pub fn depth(&self) -> GridFunction {
        self.w.map(f64::exp).expect("guarded exponential")
    }
}

/// Reduced controls of the transformed problem: the bilinear source control,
/// the boundary log-controls, and the positive boundary depth controls
/// obtained by exponentiation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedControls {
    time_grid: TimeGrid,
    /// Source control driving the log-depth equation.
    pub source: Vec<f64>,
    /// Left boundary log-control; equals minus the running integral of the
    /// source on the heat-compatible branch.
    pub log_left: Vec<f64>,
    /// Right boundary log-control.
    pub log_right: Vec<f64>,
    /// Left boundary depth control, `exp(log_left)`.
    pub depth_left: Vec<f64>,
    /// Right boundary depth control, `exp(log_right)`.
    pub depth_right: Vec<f64>,
    /// True when `log_left` was derived from the source integral.
    pub heat_compatible: bool,
}

impl ReducedControls {
    /// Build the heat-compatible branch: the left log-control is the negated
    /// running integral of the source.
    pub fn from_source(
        time_grid: TimeGrid,
        source: Vec<f64>,
        log_right: Vec<f64>,
    ) -> Result<Self> {
        if source.len() != time_grid.n_nodes() || log_right.len() != time_grid.n_nodes() {
            return Err(Error::invalid("control series do not match the time grid"));
        }
        let log_left = accumulate_log_control(&source, time_grid.dt());
        for v in log_left.iter().chain(log_right.iter()) {
            if v.abs() > POTENTIAL_BOUND {
                return Err(Error::invalid("boundary log-control exceeds overflow guard"));
            }
        }
        let depth_left = log_left.iter().map(|&v| v.exp()).collect();
        let depth_right = log_right.iter().map(|&v| v.exp()).collect();
        Ok(ReducedControls {
            time_grid,
            source,
            log_left,
            log_right,
            depth_left,
            depth_right,
            heat_compatible: true,
        })
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    /// Positive boundary depth controls as a schedule for the heat solver.
    pub fn depth_schedule(&self) -> Result<ControlSchedule> {
        ControlSchedule::new(
            self.time_grid,
            self.depth_left.clone(),
            self.depth_right.clone(),
        )
    }
}

/// Map a velocity profile to the log-depth potential:
/// `w(x) = -(1/mu) * integral of u from 0 to x + boundary_value`, so that
/// `w(0)` equals `boundary_value` exactly.
pub fn velocity_to_potential(
    u: &GridFunction,
    mu: f64,
    boundary_value: f64,
) -> Result<GridFunction> {
    if mu <= 0.0 {
        return Err(Error::invalid("mu must be positive"));
    }
    let cumulative = cumulative_trapezoid(u.values(), u.grid().dx());
    let values: Vec<f64> = cumulative
        .iter()
        .map(|&c| -c / mu + boundary_value)
        .collect();
    GridFunction::new(u.grid(), values)
}

/// Source control value from the left velocity trace and the left velocity
/// gradient: `-v1^2/mu + du/dx(t,0)`.
pub fn source_control(left_velocity: f64, left_velocity_gradient: f64, mu: f64) -> f64 {
    -left_velocity * left_velocity / mu + left_velocity_gradient
}

/// Negated running trapezoid integral of the source control; starts at 0 and
/// is exact for constant inputs.
pub fn accumulate_log_control(source: &[f64], dt: f64) -> Vec<f64> {
    cumulative_trapezoid(source, dt)
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// Build the quasi-solution trajectory `(h, -mu d(ln h)/dx)` from a positive
/// heat trajectory. Requires the friction coupling `r = 1/(mu Fr^2)`.
pub fn quasi_solution(h_heat: &HeatTrajectory, params: &PhysicalParams) -> Result<SWTrajectory> {
    if !params.friction_coupled() {
        return Err(Error::invalid(
            "quasi-solution requires r = 1/(mu Fr^2); use PhysicalParams::coupled",
        ));
    }
    if (params.mu - h_heat.mu()).abs() > 1e-14 * params.mu.max(1.0) {
        return Err(Error::invalid("heat trajectory uses a different mu"));
    }
    let mut states = Vec::with_capacity(h_heat.snapshots().len());
    for (k, snap) in h_heat.snapshots().iter().enumerate() {
        if let Some((node, &value)) = snap.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::PositivityLoss {
                time_index: k,
                node,
                value,
            });
        }
        let log_h = snap.map(f64::ln)?;
        let u = central_derivative(&log_h)?.map(|v| -params.mu * v)?;
        states.push(SWState::new(snap.clone(), u, h_heat.time_grid().node(k))?);
    }
    SWTrajectory::new(states, h_heat.time_grid(), *params)
}

/// Boundary velocity traces of the quasi-solution, usable as controls for
/// the shallow water solver. Compatible with `u0 = -mu d(ln h0)/dx` by
/// construction.
pub fn quasi_controls(h_heat: &HeatTrajectory, mu: f64) -> Result<ControlSchedule> {
    let mut left = Vec::with_capacity(h_heat.snapshots().len());
    let mut right = Vec::with_capacity(h_heat.snapshots().len());
    for snap in h_heat.snapshots() {
        if snap.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("quasi controls need positive depths"));
        }
        let log_h = snap.map(f64::ln)?;
        let d = central_derivative(&log_h)?;
        left.push(-mu * d.left());
        right.push(-mu * d.right());
    }
    ControlSchedule::new(h_heat.time_grid(), left, right)
}

/// Outcome of a full chain verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    /// Max-over-time L2 distance between the reconstructed depth and the
    /// direct heat solve with the reduced boundary controls.
    pub max_distance: f64,
    pub tol: f64,
    pub passed: bool,
    /// Negated time integral of the source control.
    pub k_raw: f64,
    /// `exp(k_raw)`: the terminal depth normalization constant.
    pub k_reconstructed: f64,
}

/// Reconstruct the log-depth chain from a velocity trajectory and compare it
/// against a direct heat solve of the reduced problem.
///
/// The source control comes from the left-boundary traces, the left
/// log-control from its running integral, the right log-control from the
/// velocity mean; the reconstructed depth `exp(w)` must then match the heat
/// equation driven by the exponentiated boundary controls up to
/// discretization error. Distances above `tol` are reported as
/// [`Error::DivergedChain`] carrying the full report.
pub fn chain_verify(
    trajectory: &SWTrajectory,
    controls: &ControlSchedule,
    params: &PhysicalParams,
    tol: f64,
) -> Result<ChainReport> {
    let time_grid = trajectory.time_grid();
    if controls.time_grid() != time_grid {
        return Err(Error::invalid("controls use a different time grid"));
    }
    let mu = params.mu;
    let dt = time_grid.dt();
    let n_nodes = time_grid.n_nodes();

    // Left traces -> source control.
    let mut source = Vec::with_capacity(n_nodes);
    for (k, state) in trajectory.states().iter().enumerate() {
        let du = central_derivative(state.u())?;
        source.push(source_control(controls.left()[k], du.left(), mu));
    }

    // Source -> boundary log-controls.
    let log_left = accumulate_log_control(&source, dt);
    let mut log_right = Vec::with_capacity(n_nodes);
    for (k, state) in trajectory.states().iter().enumerate() {
        log_right.push(-trapezoid_integral(state.u()) / mu + log_left[k]);
    }
    let depth_left: Vec<f64> = log_left.iter().map(|&v| v.exp()).collect();
    let depth_right: Vec<f64> = log_right.iter().map(|&v| v.exp()).collect();
    let reduced = ReducedControls {
        time_grid,
        source,
        log_left,
        log_right,
        depth_left,
        depth_right,
        heat_compatible: true,
    };

    // Velocity -> potential -> reconstructed depth per time node.
    let mut reconstructed = Vec::with_capacity(n_nodes);
    for (k, state) in trajectory.states().iter().enumerate() {
        let w = velocity_to_potential(state.u(), mu, reduced.log_left[k])?;
        let potential = PotentialState::new(w, state.time())?;
        reconstructed.push(potential.depth());
    }

    // Direct heat solve with the reduced controls and reconstructed initial
    // depth; trace compatibility is exact by construction.
    let problem = HeatProblem::new(
        mu,
        reconstructed[0].clone(),
        reduced.depth_schedule()?,
        time_grid,
    )?;
    let heat = solve_heat(&problem);

    let mut max_distance: f64 = 0.0;
    for (rec, direct) in reconstructed.iter().zip(heat.snapshots()) {
        let diff = rec.zip_with(direct, |a, b| a - b)?;
        max_distance = max_distance.max(l2_norm(&diff));
    }

    let k_raw = *reduced.log_left.last().expect("nonempty series");
    let report = ChainReport {
        max_distance,
        tol,
        passed: max_distance <= tol,
        k_raw,
        k_reconstructed: k_raw.exp(),
    };
    if !report.passed {
        return Err(Error::DivergedChain {
            report: Box::new(report),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::shallow_water;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    /// Exact separable heat solution 1 + amp * exp(-mu pi^2 t) sin(pi x),
    /// sampled on the given grids.
    fn separable_heat(g: Grid, tg: TimeGrid, mu: f64, amp: f64) -> HeatTrajectory {
        let snapshots = tg
            .nodes()
            .map(|t| {
                GridFunction::from_fn(g, |x| 1.0 + amp * (-mu * PI * PI * t).exp() * (PI * x).sin())
                    .unwrap()
            })
            .collect();
        HeatTrajectory::new(snapshots, tg, mu).unwrap()
    }

    #[test]
    fn potential_of_zero_velocity_is_flat() {
        let g = grid(32);
        let u = GridFunction::constant(g, 0.0).unwrap();
        let w = velocity_to_potential(&u, 1.0, 0.0).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn potential_of_constant_velocity_is_linear() {
        let mu = 0.7;
        let g = grid(32);
        let u = GridFunction::constant(g, mu).unwrap();
        let w = velocity_to_potential(&u, mu, 0.0).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert!((w.value(i) + x).abs() < 1e-14);
        }
    }

    #[test]
    fn potential_matches_log_depth_closed_form() {
        // oracle: u = -mu d/dx ln(1 + 0.1 sin(pi x)) has antiderivative
        // -mu ln(1 + 0.1 sin(pi x))
        let mu = 1.0;
        let g = grid(512);
        let u = GridFunction::from_fn(g, |x| {
            -mu * 0.1 * PI * (PI * x).cos() / (1.0 + 0.1 * (PI * x).sin())
        })
        .unwrap();
        let w = velocity_to_potential(&u, mu, 0.0).unwrap();
        for (i, x) in g.nodes().enumerate() {
            let exact = (1.0 + 0.1 * (PI * x).sin()).ln();
            assert!((w.value(i) - exact).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn source_control_formula() {
        assert_eq!(source_control(0.0, 0.0, 1.0), 0.0);
        assert_eq!(source_control(1.0, 0.0, 1.0), -1.0);
        let v = source_control(0.3, -0.2, 2.0);
        assert!((v - (-0.3 * 0.3 / 2.0 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn log_control_is_exact_for_constants_and_sin() {
        let dt = 1e-4;
        let n = 10_000;
        let c: Vec<f64> = vec![2.0; n + 1];
        let out = accumulate_log_control(&c, dt);
        assert_eq!(out[0], 0.0);
        assert!((out[n] + 2.0 * 1.0).abs() < 1e-12);
        // oracle: integral of sin is 1 - cos
        let s: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).sin()).collect();
        let out = accumulate_log_control(&s, dt);
        for (k, v) in out.iter().enumerate().step_by(1000) {
            let t = k as f64 * dt;
            assert!((v - (t.cos() - 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn quasi_solution_of_constant_depth_has_zero_velocity() {
        let g = grid(32);
        let tg = TimeGrid::new(4, 0.1).unwrap();
        let snapshots = tg
            .nodes()
            .map(|_| GridFunction::constant(g, 4.0).unwrap())
            .collect();
        let heat = HeatTrajectory::new(snapshots, tg, 1.0).unwrap();
        let params = PhysicalParams::coupled(1.0, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        for state in traj.states() {
            assert!(state.u().values().iter().all(|&v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn quasi_solution_matches_separable_closed_form() {
        let mu = 1.0;
        let g = grid(256);
        let tg = TimeGrid::new(16, 0.1).unwrap();
        let heat = separable_heat(g, tg, mu, 0.1);
        let params = PhysicalParams::coupled(mu, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        for (k, t) in tg.nodes().enumerate() {
            let decay = (-mu * PI * PI * t).exp();
            for (i, x) in g.nodes().enumerate() {
                let exact =
                    -0.1 * mu * PI * decay * (PI * x).cos() / (1.0 + 0.1 * decay * (PI * x).sin());
                let got = traj.states()[k].u().value(i);
                assert!(
                    (got - exact).abs() < 2e-4,
                    "t = {t}, x = {x}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn exponential_family_gives_constant_velocity() {
        // h = exp(a x + mu a^2 t) has d(ln h)/dx = a exactly, even discretely,
        // so u = -mu a at every node and time.
        let mu = 0.5;
        let a = 1.3;
        let g = grid(64);
        let tg = TimeGrid::new(8, 0.05).unwrap();
        let snapshots = tg
            .nodes()
            .map(|t| GridFunction::from_fn(g, |x| (a * x + mu * a * a * t).exp()).unwrap())
            .collect();
        let heat = HeatTrajectory::new(snapshots, tg, mu).unwrap();
        let params = PhysicalParams::coupled(mu, 2.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        for state in traj.states() {
            for &v in state.u().values() {
                assert!((v + mu * a).abs() < 1e-10, "{v} vs {}", -mu * a);
            }
        }
    }

    #[test]
    fn quasi_controls_match_closed_form_traces() {
        let mu = 1.0;
        let g = grid(256);
        let tg = TimeGrid::new(16, 0.1).unwrap();
        let heat = separable_heat(g, tg, mu, 0.1);
        let controls = quasi_controls(&heat, mu).unwrap();
        for (k, t) in tg.nodes().enumerate() {
            let decay = (-mu * PI * PI * t).exp();
            let left_exact = -0.1 * mu * PI * decay;
            let right_exact = 0.1 * mu * PI * decay;
            assert!((controls.left()[k] - left_exact).abs() < 1e-3, "t = {t}");
            assert!((controls.right()[k] - right_exact).abs() < 1e-3, "t = {t}");
        }
        // compatibility with the quasi-solution initial velocity
        let params = PhysicalParams::coupled(mu, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        assert!(shallow_water::check_compatibility(
            traj.states()[0].u(),
            &controls,
            1e-12
        ));
    }

    #[test]
    fn round_trip_reproduces_log_depth() {
        let mu = 1.0;
        let g = grid(128);
        let tg = TimeGrid::new(8, 0.05).unwrap();
        let heat = separable_heat(g, tg, mu, 0.2);
        let params = PhysicalParams::coupled(mu, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        let dx = g.dx();
        for state in traj.states() {
            let boundary = state.h().left().ln();
            let w = velocity_to_potential(state.u(), mu, boundary).unwrap();
            for (i, &h) in state.h().values().iter().enumerate() {
                assert!(
                    (w.value(i) - h.ln()).abs() < 10.0 * dx * dx,
                    "node {i}: {} vs {}",
                    w.value(i),
                    h.ln()
                );
            }
        }
    }

    #[test]
    fn chain_verify_constant_trajectory() {
        let mu = 1.0;
        let g = grid(64);
        let tg = TimeGrid::new(16, 0.1).unwrap();
        let snapshots = tg
            .nodes()
            .map(|_| GridFunction::constant(g, 1.0).unwrap())
            .collect();
        let heat = HeatTrajectory::new(snapshots, tg, mu).unwrap();
        let params = PhysicalParams::coupled(mu, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        let controls = quasi_controls(&heat, mu).unwrap();
        let report = chain_verify(&traj, &controls, &params, 1e-10).unwrap();
        assert!(report.max_distance < 1e-12);
        assert!((report.k_reconstructed - 1.0).abs() < 1e-12);
        assert_eq!(report.k_raw, 0.0);
    }

    #[test]
    fn chain_verify_separable_quasi_solution() {
        let mu = 1.0;
        let g = grid(256);
        let tg = TimeGrid::new(256, 0.1).unwrap();
        let heat = separable_heat(g, tg, mu, 0.1);
        let params = PhysicalParams::coupled(mu, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();
        let controls = quasi_controls(&heat, mu).unwrap();
        let report = chain_verify(&traj, &controls, &params, 1e-3).unwrap();
        assert!(report.passed, "distance {}", report.max_distance);
    }

    #[test]
    fn chain_verify_rejects_corrupted_velocity() {
        let mu = 1.0;
        let g = grid(256);
        let tg = TimeGrid::new(256, 0.1).unwrap();
        let heat = separable_heat(g, tg, mu, 0.1);
        let params = PhysicalParams::coupled(mu, 1.0).unwrap();
        let traj = quasi_solution(&heat, &params).unwrap();

        // Shift every velocity (and the matching traces) by 0.1.
        let corrupted_states: Vec<SWState> = traj
            .states()
            .iter()
            .map(|s| {
                SWState::new(
                    s.h().clone(),
                    s.u().map(|v| v + 0.1).unwrap(),
                    s.time(),
                )
                .unwrap()
            })
            .collect();
        let corrupted = SWTrajectory::new(corrupted_states, tg, params).unwrap();
        let controls = quasi_controls(&heat, mu).unwrap();
        let shifted = ControlSchedule::new(
            tg,
            controls.left().iter().map(|v| v + 0.1).collect(),
            controls.right().iter().map(|v| v + 0.1).collect(),
        )
        .unwrap();
        match chain_verify(&corrupted, &shifted, &params, 1e-3) {
            Err(Error::DivergedChain { report }) => {
                assert!(report.max_distance > 1e-3);
            }
            other => panic!("expected DivergedChain, got {other:?}"),
        }
    }
}
