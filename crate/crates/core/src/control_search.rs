//! Adjoint-gradient search over strictly positive boundary controls for the
//! heat equation: the empirical counterpart that the obstruction
//! certificates must dominate.
//!
//! Controls are exponentials of piecewise-linear log-knots, so positivity is
//! structural rather than enforced by projection. The misfit is the squared
//! terminal L2 distance; its gradient comes from the exact discrete adjoint
//! of the Crank-Nicolson scheme (one forward solve, one backward solve with
//! the same tridiagonal core, boundary pairing chained through the
//! exponential), so finite-difference checks agree to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, TimeGrid};
use crate::obstruction::ObstructionReport;
use crate::shallow_water::ControlSchedule;
use crate::tridiag;

/// Bound on log-control knot values.
pub const KNOT_BOUND: f64 = 50.0;

/// Trace-compatibility tolerance between `exp(p(0))` and the initial datum.
pub const COMPAT_TOL: f64 = 1e-6;

/// Piecewise-linear log-controls: `m` knots per boundary on a uniform knot
/// grid over [0,T]; the control value is `exp(p(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParameterization {
    horizon: f64,
    p_left: Vec<f64>,
    p_right: Vec<f64>,
}

impl ControlParameterization {
    pub fn new(horizon: f64, p_left: Vec<f64>, p_right: Vec<f64>) -> Result<Self> {
        if p_left.len() < 2 || p_left.len() != p_right.len() {
            return Err(Error::invalid("need m >= 2 knots on both boundaries"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive"));
        }
        for v in p_left.iter().chain(p_right.iter()) {
            if !v.is_finite() || v.abs() > KNOT_BOUND {
                return Err(Error::invalid("knot values must satisfy |p| <= 50"));
            }
        }
        Ok(ControlParameterization {
            horizon,
            p_left,
            p_right,
        })
    }

    pub fn constant(horizon: f64, knots: usize, left: f64, right: f64) -> Result<Self> {
        ControlParameterization::new(horizon, vec![left; knots], vec![right; knots])
    }

    pub fn knots(&self) -> usize {
        self.p_left.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn p_left(&self) -> &[f64] {
        &self.p_left
    }

    pub fn p_right(&self) -> &[f64] {
        &self.p_right
    }

    /// Hat-basis location of time `t`: knot interval index and local weight.
    fn locate(&self, t: f64) -> (usize, f64) {
        let m = self.p_left.len();
        let dtau = self.horizon / (m - 1) as f64;
        let j = ((t / dtau).floor() as usize).min(m - 2);
        let w = ((t - j as f64 * dtau) / dtau).clamp(0.0, 1.0);
        (j, w)
    }

    fn log_values_on(&self, time_grid: TimeGrid) -> (Vec<f64>, Vec<f64>) {
        let interp = |p: &[f64]| -> Vec<f64> {
            time_grid
                .nodes()
                .map(|t| {
                    let (j, w) = self.locate(t);
                    (1.0 - w) * p[j] + w * p[j + 1]
                })
                .collect()
        };
        (interp(&self.p_left), interp(&self.p_right))
    }

    /// Exponentiated samples on a time grid; strictly positive by
    /// construction.
    pub fn schedule(&self, time_grid: TimeGrid) -> Result<ControlSchedule> {
        if (time_grid.horizon() - self.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
            return Err(Error::invalid("time grid horizon differs from the knots"));
        }
        let (pl, pr) = self.log_values_on(time_grid);
        ControlSchedule::new(
            time_grid,
            pl.into_iter().map(f64::exp).collect(),
            pr.into_iter().map(f64::exp).collect(),
        )
    }
}

/// Misfit problem: steer `h0` toward `h1` over the time grid.
#[derive(Debug, Clone)]
pub struct ProblemContext {
    pub mu: f64,
    pub h0: GridFunction,
    pub h1: GridFunction,
    pub time_grid: TimeGrid,
}

impl ProblemContext {
    pub fn new(mu: f64, h0: GridFunction, h1: GridFunction, time_grid: TimeGrid) -> Result<Self> {
        if h0.grid() != h1.grid() {
            return Err(Error::invalid("initial and target grids differ"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu must be positive"));
        }
        Ok(ProblemContext {
            mu,
            h0,
            h1,
            time_grid,
        })
    }

    pub fn grid(&self) -> Grid {
        self.h0.grid()
    }
}

/// Crank-Nicolson forward sweep; returns the terminal snapshot (boundary
/// values included). Identical discretization to the heat solver.
fn cn_terminal(ctx: &ProblemContext, g_left: &[f64], g_right: &[f64]) -> Vec<f64> {
    let grid = ctx.grid();
    let n = grid.n_cells();
    let dx = grid.dx();
    let dt = ctx.time_grid.dt();
    let beta = 0.5 * ctx.mu * dt / (dx * dx);
    let interior = n - 1;
    let lower = vec![-beta; interior - 1];
    let upper = vec![-beta; interior - 1];
    let diag = vec![1.0 + 2.0 * beta; interior];

    let mut current = ctx.h0.values().to_vec();
    for k in 0..ctx.time_grid.n_steps() {
        let mut rhs = vec![0.0; interior];
        for i in 1..n {
            rhs[i - 1] = current[i] + beta * (current[i + 1] - 2.0 * current[i] + current[i - 1]);
        }
        rhs[0] += beta * g_left[k + 1];
        rhs[interior - 1] += beta * g_right[k + 1];
        let sol = tridiag::solve(&lower, &diag, &upper, &rhs);
        current[0] = g_left[k + 1];
        current[1..n].copy_from_slice(&sol);
        current[n] = g_right[k + 1];
    }
    current
}

fn misfit_of_terminal(terminal: &[f64], h1: &GridFunction) -> f64 {
    let dx = h1.grid().dx();
    let n = terminal.len() - 1;
    terminal
        .iter()
        .zip(h1.values())
        .enumerate()
        .map(|(i, (&a, &b))| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * dx * (a - b) * (a - b)
        })
        .sum()
}

/// Terminal misfit `||h(T,.) - h1||^2_{L2}` for the given log-knots.
pub fn misfit(params: &ControlParameterization, ctx: &ProblemContext) -> Result<f64> {
    let schedule = params.schedule(ctx.time_grid)?;
    let terminal = cn_terminal(ctx, schedule.left(), schedule.right());
    Ok(misfit_of_terminal(&terminal, &ctx.h1))
}

/// Misfit and its exact gradient with respect to every log-knot.
///
/// One forward solve, one backward adjoint sweep reusing the same
/// tridiagonal factorization core, boundary pairing against the hat basis,
/// chain rule through the exponential.
pub fn adjoint_gradient(
    params: &ControlParameterization,
    ctx: &ProblemContext,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let schedule = params.schedule(ctx.time_grid)?;
    let left_gap = (schedule.left()[0] - ctx.h0.left()).abs();
    let right_gap = (schedule.right()[0] - ctx.h0.right()).abs();
    if left_gap > COMPAT_TOL || right_gap > COMPAT_TOL {
        return Err(Error::IncompatibleControls {
            left_gap,
            right_gap,
            tol: COMPAT_TOL,
        });
    }

    let grid = ctx.grid();
    let n = grid.n_cells();
    let dx = grid.dx();
    let dt = ctx.time_grid.dt();
    let steps = ctx.time_grid.n_steps();
    let beta = 0.5 * ctx.mu * dt / (dx * dx);
    let interior = n - 1;
    let lower = vec![-beta; interior - 1];
    let upper = vec![-beta; interior - 1];
    let diag = vec![1.0 + 2.0 * beta; interior];

    let terminal = cn_terminal(ctx, schedule.left(), schedule.right());
    let value = misfit_of_terminal(&terminal, &ctx.h1);

    // Sample gradients d J / d g(t_k) via the discrete adjoint recursion.
    let mut g_grad_left = vec![0.0; steps + 1];
    let mut g_grad_right = vec![0.0; steps + 1];
    g_grad_left[steps] += dx * (terminal[0] - ctx.h1.left());
    g_grad_right[steps] += dx * (terminal[n] - ctx.h1.right());

    let mut lambda: Vec<f64> = (1..n)
        .map(|i| 2.0 * dx * (terminal[i] - ctx.h1.value(i)))
        .collect();
    for k in (0..steps).rev() {
        let psi = tridiag::solve(&lower, &diag, &upper, &lambda);
        // the k = 0 step reads the initial datum's own boundary values, not
        // the control samples at t = 0
        if k > 0 {
            g_grad_left[k] += beta * psi[0];
            g_grad_right[k] += beta * psi[interior - 1];
        }
        g_grad_left[k + 1] += beta * psi[0];
        g_grad_right[k + 1] += beta * psi[interior - 1];
        // lambda^k = (I + beta A) psi
        let mut next = vec![0.0; interior];
        for i in 0..interior {
            let mut v = (1.0 - 2.0 * beta) * psi[i];
            if i > 0 {
                v += beta * psi[i - 1];
            }
            if i < interior - 1 {
                v += beta * psi[i + 1];
            }
            next[i] = v;
        }
        lambda = next;
    }

    // Chain through g = exp(p) and the hat basis onto the knots.
    let m = params.knots();
    let mut grad_left = vec![0.0; m];
    let mut grad_right = vec![0.0; m];
    for (k, t) in ctx.time_grid.nodes().enumerate() {
        let (j, w) = params.locate(t);
        let gl = schedule.left()[k];
        let gr = schedule.right()[k];
        grad_left[j] += g_grad_left[k] * gl * (1.0 - w);
        grad_left[j + 1] += g_grad_left[k] * gl * w;
        grad_right[j] += g_grad_right[k] * gr * (1.0 - w);
        grad_right[j + 1] += g_grad_right[k] * gr * w;
    }
    Ok((value, grad_left, grad_right))
}

/// Armijo backtracking settings; halving with at most 30 trials per
/// iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub iterations: usize,
    pub initial_step: f64,
    pub armijo_slope: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            iterations: 200,
            initial_step: 1.0,
            armijo_slope: 1e-4,
            max_backtracks: 30,
        }
    }
}

/// One accepted (or stalled) iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub misfit: f64,
    pub step_size: f64,
    pub grad_norm: f64,
}

/// Outcome of a gradient-descent run; the best-ever iterate is returned
/// even when the final steps stall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: ControlParameterization,
    pub best_misfit: f64,
    pub initial_misfit: f64,
    pub iterations: Vec<IterationRecord>,
    pub stalled: bool,
    /// Terminal snapshot of the best iterate.
    pub best_terminal: GridFunction,
    /// Smallest Dirac pairing of any accepted iterate, when tracked.
    pub min_terminal_pairing: Option<f64>,
    pub mu: f64,
    pub horizon: f64,
    pub n_cells: usize,
    pub n_steps: usize,
}

fn pairing_of_terminal(
    terminal: &GridFunction,
    sol: Option<&crate::dual::DualSolution>,
) -> Option<f64> {
    sol.map(|s| crate::obstruction::terminal_pairing(s, terminal))
}

/// Backtracking gradient descent on the log-knots. The two t = 0 knots are
/// pinned to keep trace compatibility with the initial datum; every
/// evaluated control stays strictly positive by construction. Non-descent
/// is a reported outcome (`stalled`), never an error. When `track` is
/// given, the Dirac pairing of every accepted iterate is recorded.
pub fn optimize(
    params0: &ControlParameterization,
    ctx: &ProblemContext,
    settings: &OptimizerSettings,
    track: Option<&crate::dual::DualSolution>,
) -> Result<OptimizationResult> {
    let mut params = params0.clone();
    let (mut value, mut grad_l, mut grad_r) = adjoint_gradient(&params, ctx)?;
    let initial_misfit = value;
    let mut best = params.clone();
    let mut best_misfit = value;
    let mut best_terminal = {
        let s = params.schedule(ctx.time_grid)?;
        GridFunction::new(ctx.grid(), cn_terminal(ctx, s.left(), s.right()))?
    };
    let mut min_pairing = pairing_of_terminal(&best_terminal, track);

    let mut log = Vec::new();
    let mut step = settings.initial_step;
    let mut stalled = false;

    for iter in 0..settings.iterations {
        // pinned compatibility knots
        grad_l[0] = 0.0;
        grad_r[0] = 0.0;
        let grad_norm = grad_l
            .iter()
            .chain(grad_r.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if grad_norm == 0.0 {
            break;
        }

        let mut trial_step = step * 2.0;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let candidate = ControlParameterization::new(
                params.horizon,
                params
                    .p_left
                    .iter()
                    .zip(&grad_l)
                    .map(|(p, g)| (p - trial_step * g).clamp(-KNOT_BOUND, KNOT_BOUND))
                    .collect(),
                params
                    .p_right
                    .iter()
                    .zip(&grad_r)
                    .map(|(p, g)| (p - trial_step * g).clamp(-KNOT_BOUND, KNOT_BOUND))
                    .collect(),
            )?;
            let candidate_value = misfit(&candidate, ctx)?;
            if candidate_value <= value - settings.armijo_slope * trial_step * grad_norm * grad_norm
            {
                accepted = Some((candidate, candidate_value, trial_step));
                break;
            }
            trial_step *= 0.5;
        }

        let Some((candidate, candidate_value, used_step)) = accepted else {
            stalled = true;
            break;
        };
        params = candidate;
        value = candidate_value;
        step = used_step;
        log.push(IterationRecord {
            iter,
            misfit: value,
            step_size: used_step,
            grad_norm,
        });

        if track.is_some() {
            let s = params.schedule(ctx.time_grid)?;
            let terminal = GridFunction::new(ctx.grid(), cn_terminal(ctx, s.left(), s.right()))?;
            let pairing = pairing_of_terminal(&terminal, track);
            min_pairing = match (min_pairing, pairing) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            if value < best_misfit {
                best_terminal = terminal;
            }
        } else if value < best_misfit {
            let s = params.schedule(ctx.time_grid)?;
            best_terminal = GridFunction::new(ctx.grid(), cn_terminal(ctx, s.left(), s.right()))?;
        }
        if value < best_misfit {
            best_misfit = value;
            best = params.clone();
        }

        let out = adjoint_gradient(&params, ctx)?;
        grad_l = out.1;
        grad_r = out.2;
        debug_assert!((out.0 - value).abs() <= 1e-12 * value.max(1.0));
    }

    Ok(OptimizationResult {
        best,
        best_misfit,
        initial_misfit,
        iterations: log,
        stalled,
        best_terminal,
        min_terminal_pairing: min_pairing,
        mu: ctx.mu,
        horizon: ctx.time_grid.horizon(),
        n_cells: ctx.grid().n_cells(),
        n_steps: ctx.time_grid.n_steps(),
    })
}

/// Comparison between an optimizer run and an obstruction certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComparisonRecord {
    /// Dirac pairing of the optimizer's best terminal state.
    pub terminal_pairing: f64,
    /// Certified initial pairing P_0.
    pub pairing_initial: f64,
    pub budget: f64,
    /// `terminal_pairing - (pairing_initial - budget)`; nonnegative when the
    /// certificate is respected.
    pub slack: f64,
    pub respected: bool,
    /// Whether the certificate claimed an obstruction at all.
    pub obstructed: bool,
}

/// Check the optimizer's best terminal state against the certified pairing
/// bound `P_T >= P_0 - budget`.
pub fn certificate_vs_optimizer(
    result: &OptimizationResult,
    report: &ObstructionReport,
    budget: f64,
) -> Result<ComparisonRecord> {
    if (result.horizon - report.t_star).abs() > 1e-12 * report.t_star.max(1.0) {
        return Err(Error::InconsistentSetup {
            detail: format!(
                "optimizer horizon {} vs certificate horizon {}",
                result.horizon, report.t_star
            ),
        });
    }
    if (result.mu - report.mu).abs() > 1e-14 * report.mu.max(1.0) {
        return Err(Error::InconsistentSetup {
            detail: "different mu".into(),
        });
    }
    if result.best_terminal.grid().n_cells() != result.n_cells {
        return Err(Error::InconsistentSetup {
            detail: "result grid metadata disagrees with its terminal state".into(),
        });
    }
    let weights = [1.0, -report.theta, 1.0];
    let terminal_pairing: f64 = report
        .xi
        .iter()
        .zip(weights)
        .map(|(&xi, w)| w * crate::grid::interpolate_cubic(&result.best_terminal, xi))
        .sum();
    let floor = result
        .min_terminal_pairing
        .unwrap_or(terminal_pairing)
        .min(terminal_pairing);
    let slack = floor - (report.pairing_initial - budget);
    Ok(ComparisonRecord {
        terminal_pairing: floor,
        pairing_initial: report.pairing_initial,
        budget,
        slack,
        respected: slack >= 0.0,
        obstructed: report.passed,
    })
}
