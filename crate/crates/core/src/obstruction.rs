//! Duality-identity obstruction: pairing a controlled heat trajectory with a
//! backward dual solution certifies terminal states that no admissible
//! positive control can reach.
//!
//! Multiplying the heat equation by the dual solution U and integrating over
//! the space-time cylinder gives the identity
//!
//!   B + P_T - P_0 = 0,
//!   B   = mu * int_0^T (U_x(t,1) v_right(t) - U_x(t,0) v_left(t)) dt,
//!   P_T = int U(T,x) h(T,x) dx -> h(T,xi0) - theta h(T,xi1) + h(T,xi2),
//!   P_0 = int U(0,x) h0(x) dx.
//!
//! With the sign certificate (U_x(t,0) > 0, U_x(t,1) < 0) and positive
//! controls, B <= 0, so every admissible trajectory satisfies P_T >= P_0.
//! An initial datum with P_0 > 0 therefore keeps the terminal pairing away
//! from any target whose pairing is nonpositive; the normalized shortfall is
//! the unreachability gap.

use serde::{Deserialize, Serialize};

use crate::dual::{DualSolution, TAU_MIN};
use crate::error::{Error, Result};
use crate::grid::{
    central_derivative, h1_norm, interpolate_cubic, trapezoid_integral, Grid, GridFunction,
    TimeGrid,
};
use crate::heat::{solve_heat, terminal_state, HeatProblem, HeatTrajectory};
use crate::shallow_water::ControlSchedule;

/// Default budget for discretization error in the duality identity, used
/// when comparing certified pairings against solver output.
pub const DUALITY_BUDGET: f64 = 1e-2;

/// Time samples used when an operation re-verifies the sign certificate.
const VERIFY_SAMPLES: usize = 1024;

/// Certificate values for one (initial datum, target, horizon) instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstructionReport {
    /// Measured identity defect; zero when not measured against a solve.
    pub duality_residual: f64,
    /// P_0: initial pairing `int U(0,x) h0(x) dx`.
    pub pairing_initial: f64,
    /// Terminal pairing against the Dirac weights (for certificate-only
    /// operations, the pairing the hypothetical target would produce).
    pub pairing_terminal: f64,
    /// Certified bound on the boundary term; 0 when not measured.
    pub boundary_term: f64,
    /// Linear lower-bound slope of U(0,.) near the boundary.
    pub delta: f64,
    /// Initial L2 norm of the dual solution.
    #[serde(rename = "C_star")]
    pub c_star: f64,
    /// Certified lower bound on the uniform terminal distance at the xi
    /// nodes, `max(0, shortfall) / (2 + theta)`.
    pub gap: f64,
    pub passed: bool,
    pub xi: [f64; 3],
    pub theta: f64,
    #[serde(rename = "T_star")]
    pub t_star: f64,
    pub mu: f64,
    /// Target pairing, present for target obstructions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_target: Option<f64>,
    /// Lower bound on the H1 velocity distance implied by the gap for
    /// trajectories with the log-depth structure; reported, not sharp.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_h1_floor: Option<f64>,
}

/// Initial pairing `int U(0,x) f(x) dx` by trapezoid quadrature on the grid
/// of `f`.
pub fn pairing_initial(sol: &DualSolution, f: &GridFunction) -> Result<f64> {
    let u0 = GridFunction::from_fn(f.grid(), |x| {
        sol.value_robust(0.0, x)
            .expect("t = 0 is always admissible")
    })?;
    Ok(trapezoid_integral(&u0.zip_with(f, |a, b| a * b)?))
}

/// Terminal pairing of a snapshot against the Dirac weights through cubic
/// interpolation at the source positions.
pub fn terminal_pairing(sol: &DualSolution, terminal: &GridFunction) -> f64 {
    sol.sources()
        .iter()
        .map(|s| s.weight * interpolate_cubic(terminal, s.position))
        .sum()
}

/// Components of one duality-identity evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualityProbe {
    /// `mu * int (U_x(t,1) v_right - U_x(t,0) v_left) dt`.
    pub boundary_term: f64,
    /// Terminal pairing by node interpolation at the Dirac positions.
    pub terminal_interpolated: f64,
    /// Terminal pairing by quadrature against U at a resolution-matched
    /// backward time (grid-width smoothing of the Dirac datum).
    pub terminal_smoothed: f64,
    /// Initial pairing `int U(0,x) h0(x) dx`.
    pub initial_pairing: f64,
    /// Identity defect `B + P_T - P_0` with the interpolated terminal.
    pub residual: f64,
}

/// Evaluate every term of the duality identity for a solved trajectory.
///
/// The exact identity makes the residual zero; the returned value measures
/// pure discretization error.
pub fn duality_probe(
    trajectory: &HeatTrajectory,
    controls: &ControlSchedule,
    sol: &DualSolution,
    h0: &GridFunction,
) -> Result<DualityProbe> {
    let time_grid = trajectory.time_grid();
    let horizon = time_grid.horizon();
    if (horizon - sol.t_star()).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::HorizonMismatch {
            expected: sol.t_star(),
            actual: horizon,
        });
    }
    if (trajectory.mu() - sol.mu()).abs() > 1e-14 * sol.mu().max(1.0) {
        return Err(Error::InconsistentSetup {
            detail: "trajectory and dual solution use different mu".into(),
        });
    }
    if controls.time_grid() != time_grid {
        return Err(Error::InconsistentSetup {
            detail: "controls use a different time grid".into(),
        });
    }
    if h0.grid() != trajectory.snapshot(0).grid() {
        return Err(Error::InconsistentSetup {
            detail: "initial datum grid differs from the trajectory grid".into(),
        });
    }

    let mu = sol.mu();
    let dt = time_grid.dt();
    let guard = sol.t_star() - TAU_MIN;
    let mut boundary_term = 0.0;
    for (k, t) in time_grid.nodes().enumerate() {
        let te = t.min(guard);
        let (left_flux, right_flux, _, _) = sol.boundary_flux_robust(te)?;
        let integrand = mu * (right_flux * controls.right()[k] - left_flux * controls.left()[k]);
        let weight = if k == 0 || k == time_grid.n_steps() {
            0.5
        } else {
            1.0
        };
        boundary_term += weight * dt * integrand;
    }

    let terminal = terminal_state(trajectory);
    let terminal_interpolated = terminal_pairing(sol, terminal);

    // Quadrature estimator: pair against U at a backward time whose kernel
    // width (about 2 dx) the grid resolves.
    let dx = terminal.grid().dx();
    let tau_smooth = (2.0 * dx * dx / mu).max(TAU_MIN);
    let t_smooth = (sol.t_star() - tau_smooth).max(0.0);
    let u_smooth = GridFunction::from_fn(terminal.grid(), |x| {
        sol.value_robust(t_smooth, x)
            .expect("smoothed time is admissible")
    })?;
    let terminal_smoothed = trapezoid_integral(&u_smooth.zip_with(terminal, |a, b| a * b)?);

    let initial = pairing_initial(sol, h0)?;
    Ok(DualityProbe {
        boundary_term,
        terminal_interpolated,
        terminal_smoothed,
        initial_pairing: initial,
        residual: boundary_term + terminal_interpolated - initial,
    })
}

/// Identity defect `B + P_T - P_0`; see [`duality_probe`].
pub fn duality_residual(
    trajectory: &HeatTrajectory,
    controls: &ControlSchedule,
    sol: &DualSolution,
    h0: &GridFunction,
) -> Result<f64> {
    Ok(duality_probe(trajectory, controls, sol, h0)?.residual)
}

/// C2 smoothstep on [0,1].
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Adversarial initial-depth profile: plateaus of height `plateau` over
/// `(delta/4, 3 delta/4)` and its mirror image, value 1 at both endpoints,
/// C2 smoothstep transitions of width `delta/8`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdversarialProfile {
    pub delta: f64,
    pub plateau: f64,
}

impl AdversarialProfile {
    pub fn new(delta: f64, c_star: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::BadDelta { delta });
        }
        if !(c_star > 0.0 && c_star.is_finite()) {
            return Err(Error::invalid("C* must be positive"));
        }
        Ok(AdversarialProfile {
            delta,
            plateau: 4.0 * c_star / (delta * delta * delta),
        })
    }

    /// Piece boundaries of the left half, in order.
    fn knots(&self) -> [f64; 4] {
        let d = self.delta;
        [d / 8.0, d / 4.0, 3.0 * d / 4.0, 7.0 * d / 8.0]
    }

    pub fn value(&self, x: f64) -> f64 {
        let [a1, a2, a3, a4] = self.knots();
        let w = self.delta / 8.0;
        let amp = self.plateau - 1.0;
        let half = |y: f64| -> f64 {
            if y < a1 {
                1.0
            } else if y < a2 {
                1.0 + amp * smoothstep((y - a1) / w)
            } else if y <= a3 {
                self.plateau
            } else if y < a4 {
                1.0 + amp * smoothstep((a4 - y) / w)
            } else {
                1.0
            }
        };
        if x <= 0.5 {
            half(x)
        } else {
            half(1.0 - x)
        }
    }

    pub fn sample(&self, grid: Grid) -> Result<GridFunction> {
        GridFunction::from_fn(grid, |x| self.value(x))
    }

    /// Accurate pairing `int U(0,x) h0(x) dx` by composite Simpson rule on
    /// each smooth piece of the profile; independent of any solver grid.
    pub fn pairing_initial(&self, sol: &DualSolution) -> Result<f64> {
        let [a1, a2, a3, a4] = self.knots();
        let pieces = [
            0.0,
            a1,
            a2,
            a3,
            a4,
            1.0 - a4,
            1.0 - a3,
            1.0 - a2,
            1.0 - a1,
            1.0,
        ];
        let mut total = 0.0;
        for pair in pieces.windows(2) {
            total += simpson(pair[0], pair[1], 256, |x| {
                sol.value_robust(0.0, x).expect("t = 0 is admissible") * self.value(x)
            });
        }
        Ok(total)
    }
}

fn simpson(a: f64, b: f64, intervals: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = (intervals.max(2)) & !1usize;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adversarial initial datum with its accurate initial pairing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialInitial {
    pub profile: AdversarialProfile,
    pub h0: GridFunction,
    /// `int U(0,x) h0(x) dx` by piecewise Simpson quadrature.
    pub pairing_initial: f64,
}

/// Build the adversarial initial datum `4 C*/delta^3` on the two plateaus,
/// normalized to 1 at both endpoints, sampled on `grid`.
pub fn adversarial_h0(
    sol: &DualSolution,
    delta: f64,
    c_star: f64,
    grid: Grid,
) -> Result<AdversarialInitial> {
    let profile = AdversarialProfile::new(delta, c_star)?;
    let h0 = profile.sample(grid)?;
    let pairing = profile.pairing_initial(sol)?;
    Ok(AdversarialInitial {
        profile,
        h0,
        pairing_initial: pairing,
    })
}

fn canonical_data(sol: &DualSolution) -> Result<crate::dual::DualData> {
    sol.data()
        .copied()
        .ok_or_else(|| Error::CertificateInvalid {
            detail: "obstruction reports need the canonical three-Dirac datum".into(),
        })
}

fn require_certificate(sol: &DualSolution) -> Result<()> {
    let report = sol.verify_signs(VERIFY_SAMPLES)?;
    if !report.holds {
        return Err(Error::CertificateInvalid {
            detail: format!(
                "sign certificate fails: min left margin {:e}, max right margin {:e}",
                report.min_margin_left, report.max_margin_right
            ),
        });
    }
    Ok(())
}

/// Certified null-control obstruction: for theta >= 2 and any uniform
/// target level `k_target > 0`, every admissible positive control keeps the
/// terminal pairing at or above P_0, so P_0 > 0 certifies a terminal
/// distance of at least `P_0 / (2 + theta)` at the xi nodes. The report
/// never reads any control schedule.
pub fn null_control_obstruction(
    sol: &DualSolution,
    h0: &GridFunction,
    k_target: f64,
) -> Result<ObstructionReport> {
    let data = canonical_data(sol)?;
    if data.theta < 2.0 {
        return Err(Error::CertificateInvalid {
            detail: format!(
                "null-control obstruction needs theta >= 2, got {}",
                data.theta
            ),
        });
    }
    if !(k_target > 0.0) {
        return Err(Error::invalid("target level must be positive"));
    }
    if h0.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("initial datum must be strictly positive"));
    }
    require_certificate(sol)?;

    let c_star = sol.initial_l2_norm()?;
    let delta = sol.extract_delta()?.delta;
    let p0 = pairing_initial(sol, h0)?;
    let gap = p0.max(0.0) / (2.0 + data.theta);
    Ok(ObstructionReport {
        duality_residual: 0.0,
        pairing_initial: p0,
        pairing_terminal: k_target * (2.0 - data.theta),
        boundary_term: 0.0,
        delta,
        c_star,
        gap,
        passed: gap > 0.0,
        xi: data.xi,
        theta: data.theta,
        t_star: data.t_star,
        mu: data.mu,
        pairing_target: None,
        u_h1_floor: None,
    })
}

/// Certified target obstruction: a target profile whose Dirac pairing falls
/// below the initial pairing cannot be reached by any admissible control;
/// trajectories with the log-depth velocity structure additionally inherit
/// a computable H1 velocity floor.
pub fn target_obstruction(
    sol: &DualSolution,
    h0: &GridFunction,
    h1: &GridFunction,
) -> Result<ObstructionReport> {
    let data = canonical_data(sol)?;
    if h0.values().iter().any(|&v| v <= 0.0) || h1.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("initial and target data must be positive"));
    }
    require_certificate(sol)?;

    let c_star = sol.initial_l2_norm()?;
    let delta = sol.extract_delta()?.delta;
    let p0 = pairing_initial(sol, h0)?;
    let p1 = terminal_pairing(sol, h1);
    let gap = (p0 - p1).max(0.0) / (2.0 + data.theta);

    // For u = -mu d(ln h)/dx trajectories: ||u(T)-u1||_{H1} <= eta bounds the
    // log-depth offsets between xi nodes by eta/mu, which forces
    // P_T <= e^{off} (P_1 + (h1(xi0)+h1(xi2)) (e^{eta/mu}-1)). The identity
    // keeps P_T >= P_0 > 0, so the bracket must be positive:
    // eta >= mu ln(1 + |P_1| / (h1(xi0)+h1(xi2))) whenever P_1 < 0.
    let endpoint_mass = interpolate_cubic(h1, data.xi[0]) + interpolate_cubic(h1, data.xi[2]);
    let u_floor = if p1 < 0.0 && p0 > 0.0 && endpoint_mass > 0.0 {
        data.mu * (1.0 + (-p1) / endpoint_mass).ln()
    } else {
        0.0
    };

    Ok(ObstructionReport {
        duality_residual: 0.0,
        pairing_initial: p0,
        pairing_terminal: p1,
        boundary_term: 0.0,
        delta,
        c_star,
        gap,
        passed: gap > 0.0,
        xi: data.xi,
        theta: data.theta,
        t_star: data.t_star,
        mu: data.mu,
        pairing_target: Some(p1),
        u_h1_floor: Some(u_floor),
    })
}

/// Terminal target of an experiment: a uniform level or a depth profile.
#[derive(Debug, Clone)]
pub enum Target {
    Uniform(f64),
    Profile(GridFunction),
}

/// One experiment row: a control schedule driven through the heat solver and
/// mapped back to the velocity picture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub control_id: String,
    pub terminal_pairing: f64,
    #[serde(rename = "u_H1_distance")]
    pub u_h1_distance: f64,
    pub gap: f64,
    pub passed: bool,
}

/// Experiment table over a suite of controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub pairing_initial: f64,
    pub budget: f64,
    pub all_passed: bool,
}

impl ExperimentTable {
    pub fn min_terminal_pairing(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.terminal_pairing)
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn min_u_distance(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.u_h1_distance)
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Drive every control in the suite through the heat solver, record the
/// terminal pairing and the H1 velocity distance to the target, and check
/// each pairing against `P_0 - budget`. Rows are independent; `threads > 1`
/// fills them concurrently with identical results.
#[allow(clippy::too_many_arguments)]
pub fn theorem_experiment(
    sol: &DualSolution,
    h0: &GridFunction,
    target: &Target,
    suite: &[(String, ControlSchedule)],
    time_grid: TimeGrid,
    gap: f64,
    budget: f64,
    threads: usize,
) -> Result<ExperimentTable> {
    if (time_grid.horizon() - sol.t_star()).abs() > 1e-12 * sol.t_star().max(1.0) {
        return Err(Error::HorizonMismatch {
            expected: sol.t_star(),
            actual: time_grid.horizon(),
        });
    }
    let mu = sol.mu();
    let u_target = match target {
        Target::Uniform(_) => GridFunction::constant(h0.grid(), 0.0)?,
        Target::Profile(h1) => {
            if h1.values().iter().any(|&v| v <= 0.0) {
                return Err(Error::invalid("target profile must be positive"));
            }
            central_derivative(&h1.map(f64::ln)?)?.map(|v| -mu * v)?
        }
    };
    let p0 = pairing_initial(sol, h0)?;

    let run_row = |entry: &(String, ControlSchedule)| -> Result<ExperimentRow> {
        let (id, controls) = entry;
        let problem = HeatProblem::new(mu, h0.clone(), controls.clone(), time_grid)?;
        let trajectory = solve_heat(&problem);
        let terminal = terminal_state(&trajectory);
        if let Some((node, &value)) = terminal.values().iter().enumerate().find(|(_, &v)| v <= 0.0)
        {
            return Err(Error::PositivityLoss {
                time_index: time_grid.n_steps(),
                node,
                value,
            });
        }
        let pairing = terminal_pairing(sol, terminal);
        let u_terminal = central_derivative(&terminal.map(f64::ln)?)?.map(|v| -mu * v)?;
        let distance = h1_norm(&u_terminal.zip_with(&u_target, |a, b| a - b)?);
        Ok(ExperimentRow {
            control_id: id.clone(),
            terminal_pairing: pairing,
            u_h1_distance: distance,
            gap,
            passed: pairing >= p0 - budget,
        })
    };

    let rows: Vec<ExperimentRow> = if threads <= 1 || suite.len() <= 1 {
        suite.iter().map(run_row).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<ExperimentRow>>> = Vec::new();
        slots.resize_with(suite.len(), || None);
        let chunk = suite.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (entries, out) in suite.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                scope.spawn(|| {
                    for (entry, slot) in entries.iter().zip(out.iter_mut()) {
                        *slot = Some(run_row(entry));
                    }
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect::<Result<_>>()?
    };

    let all_passed = rows.iter().all(|r| r.passed);
    Ok(ExperimentTable {
        rows,
        pairing_initial: p0,
        budget,
        all_passed,
    })
}
