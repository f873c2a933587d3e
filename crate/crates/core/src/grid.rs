//! Uniform grids on [0,1], discrete calculus and discrete norms.
//!
//! Everything downstream (solvers, transforms, duality pairings) shares the
//! same trapezoid quadrature and second-order stencils defined here, so
//! convergence orders compose cleanly across modules. Endpoint derivatives
//! use second-order one-sided stencils: boundary fluxes carry the interior
//! order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform spatial grid on [0,1] with `n_cells` cells and `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::invalid("grid needs at least one cell"));
        }
        Ok(Grid { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Node coordinate `x_i = i * dx`, with `x_0 = 0` and `x_n = 1`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.node(i))
    }
}

/// Scalar field sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::invalid(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.n_nodes()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("grid function contains non-finite values"));
        }
        Ok(GridFunction { grid, values })
    }

    /// Sample a closure at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        GridFunction::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        GridFunction::new(grid, vec![c; grid.n_nodes()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// First and last node values.
    pub fn left(&self) -> f64 {
        self.values[0]
    }

    pub fn right(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Apply `f` nodewise, producing a new function on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Nodewise combination of two functions sharing a grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid mismatch in zip_with"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridFunction::new(self.grid, values)
    }
}

/// Uniform time grid over [0,T] with `n_steps` steps and `n_steps + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive and finite"));
        }
        Ok(TimeGrid { n_steps, horizon })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |k| self.node(k))
    }
}

/// Physical parameters: viscosity, Froude number and friction coefficient.
///
/// The quasi-solution machinery requires the coupling `r = 1/(mu Fr^2)`;
/// [`PhysicalParams::friction_coupled`] checks it without silently enforcing
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mu: f64,
    pub fr: f64,
    pub r: f64,
}

impl PhysicalParams {
    pub fn new(mu: f64, fr: f64, r: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("viscosity mu must be positive"));
        }
        if !(fr > 0.0 && fr.is_finite()) {
            return Err(Error::invalid("Froude number must be positive"));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid("friction r must be nonnegative"));
        }
        Ok(PhysicalParams { mu, fr, r })
    }

    /// Parameters with the friction coefficient derived as `1/(mu Fr^2)`.
    pub fn coupled(mu: f64, fr: f64) -> Result<Self> {
        PhysicalParams::new(mu, fr, 1.0 / (mu * fr * fr))
    }

    /// True when `r = 1/(mu Fr^2)` up to relative rounding.
    pub fn friction_coupled(&self) -> bool {
        let expected = 1.0 / (self.mu * self.fr * self.fr);
        (self.r - expected).abs() <= 1e-12 * expected.max(1.0)
    }
}

/// Trapezoid-rule approximation of the integral over [0,1]; exact for affine
/// integrands.
pub fn trapezoid_integral(f: &GridFunction) -> f64 {
    let v = f.values();
    let n = v.len();
    let dx = f.grid().dx();
    let mut sum = 0.5 * (v[0] + v[n - 1]);
    for &x in &v[1..n - 1] {
        sum += x;
    }
    sum * dx
}

/// Cumulative trapezoid integral from node 0; the result at node 0 is 0.
pub fn cumulative_trapezoid(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * dx * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Discrete L2 norm, `sqrt(trapezoid(f^2))`.
pub fn l2_norm(f: &GridFunction) -> f64 {
    let sq = f.map(|v| v * v).expect("square of finite values");
    trapezoid_integral(&sq).max(0.0).sqrt()
}

/// Second-order derivative: central stencil in the interior, one-sided
/// second-order stencils at the endpoints. Exact for quadratics.
pub fn central_derivative(f: &GridFunction) -> Result<GridFunction> {
    let v = f.values();
    let n = v.len();
    if n < 3 {
        return Err(Error::invalid("derivative needs at least two cells"));
    }
    let dx = f.grid().dx();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx);
    GridFunction::new(f.grid(), d)
}

/// Discrete H1 norm, `sqrt(||f||^2 + ||Df||^2)` with `Df` from
/// [`central_derivative`].
pub fn h1_norm(f: &GridFunction) -> f64 {
    let df = central_derivative(f).expect("h1_norm needs at least two cells");
    let a = l2_norm(f);
    let b = l2_norm(&df);
    (a * a + b * b).sqrt()
}

/// Cubic Lagrange interpolation at `x` from the four nearest nodes
/// (clamped near the endpoints). Error O(dx^4) for smooth data.
pub fn interpolate_cubic(f: &GridFunction, x: f64) -> f64 {
    let grid = f.grid();
    let n = grid.n_cells();
    let dx = grid.dx();
    let x = x.clamp(0.0, 1.0);
    // Base index of the 4-node stencil [i0, i0+3].
    let cell = ((x / dx).floor() as usize).min(n.saturating_sub(1));
    let i0 = cell.saturating_sub(1).min(n.saturating_sub(3));
    if n < 3 {
        // Too coarse for a cubic; fall back to linear on the containing cell.
        let t = (x - grid.node(cell)) / dx;
        return f.value(cell) * (1.0 - t) + f.value(cell + 1) * t;
    }
    let mut acc = 0.0;
    for j in 0..4 {
        let xj = grid.node(i0 + j);
        let mut w = 1.0;
        for k in 0..4 {
            if k != j {
                let xk = grid.node(i0 + k);
                w *= (x - xk) / (xj - xk);
            }
        }
        acc += w * f.value(i0 + j);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn trapezoid_constant_and_linear_are_exact() {
        let g = grid(16);
        let one = GridFunction::constant(g, 1.0).unwrap();
        assert!((trapezoid_integral(&one) - 1.0).abs() < 1e-15);
        let lin = GridFunction::from_fn(g, |x| x).unwrap();
        assert!((trapezoid_integral(&lin) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_sine_matches_closed_form() {
        // oracle: integral of sin(pi x) over [0,1] is 2/pi
        let g = grid(256);
        let f = GridFunction::from_fn(g, |x| (PI * x).sin()).unwrap();
        assert!((trapezoid_integral(&f) - 2.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn l2_norm_basics() {
        let g = grid(64);
        let one = GridFunction::constant(g, 1.0).unwrap();
        assert!((l2_norm(&one) - 1.0).abs() < 1e-15);
        let zero = GridFunction::constant(g, 0.0).unwrap();
        assert_eq!(l2_norm(&zero), 0.0);
    }

    #[test]
    fn l2_norm_sine_matches_closed_form() {
        // oracle: integral of sin^2(pi x) is 1/2
        let g = grid(256);
        let f = GridFunction::from_fn(g, |x| (PI * x).sin()).unwrap();
        assert!((l2_norm(&f) - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn h1_norm_constant_and_linear() {
        let g = grid(512);
        let c = GridFunction::constant(g, -3.0).unwrap();
        assert!((h1_norm(&c) - 3.0).abs() < 1e-14);
        // oracle: ||x||_{H1}^2 = 1/3 + 1 = 4/3 exactly
        let lin = GridFunction::from_fn(g, |x| x).unwrap();
        assert!((h1_norm(&lin) - (4.0f64 / 3.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn h1_norm_sine_matches_closed_form() {
        // oracle: ||sin||^2 = 1/2, ||pi cos||^2 = pi^2/2
        let g = grid(256);
        let f = GridFunction::from_fn(g, |x| (PI * x).sin()).unwrap();
        let expected = ((1.0 + PI * PI) / 2.0).sqrt();
        assert!((h1_norm(&f) - expected).abs() < 1e-3);
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        let g = grid(32);
        let f = GridFunction::from_fn(g, |x| x * x).unwrap();
        let d = central_derivative(&f).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert!(
                (d.value(i) - 2.0 * x).abs() < 1e-12,
                "node {i}: {} vs {}",
                d.value(i),
                2.0 * x
            );
        }
        let c = GridFunction::constant(g, 5.0).unwrap();
        let dc = central_derivative(&c).unwrap();
        assert!(dc.values().iter().all(|&v| v.abs() < 1e-13));
    }

    #[test]
    fn derivative_is_second_order() {
        // oracle: error ratio across grid doubling should sit near 4
        let err = |n: usize| -> f64 {
            let g = grid(n);
            let f = GridFunction::from_fn(g, |x| (2.0 * PI * x).sin()).unwrap();
            let d = central_derivative(&f).unwrap();
            g.nodes()
                .enumerate()
                .map(|(i, x)| (d.value(i) - 2.0 * PI * (2.0 * PI * x).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(
            (3.4..=4.6).contains(&ratio),
            "convergence ratio {ratio} out of range"
        );
    }

    #[test]
    fn quadrature_is_second_order() {
        let err = |n: usize| -> f64 {
            let g = grid(n);
            let f = GridFunction::from_fn(g, |x| (PI * x).sin()).unwrap();
            (trapezoid_integral(&f) - 2.0 / PI).abs()
        };
        let ratio = err(64) / err(128);
        assert!(
            (3.4..=4.6).contains(&ratio),
            "convergence ratio {ratio} out of range"
        );
    }

    #[test]
    fn cumulative_trapezoid_starts_at_zero_and_is_exact_for_constants() {
        let c = cumulative_trapezoid(&[2.0; 11], 0.1);
        assert_eq!(c[0], 0.0);
        assert!((c[10] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let g = grid(16);
        let f = GridFunction::from_fn(g, |x| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x).unwrap();
        for &x in &[0.0, 0.013, 0.25, 0.511, 0.875, 0.999, 1.0] {
            let exact = 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
            assert!(
                (interpolate_cubic(&f, x) - exact).abs() < 1e-13,
                "x = {x}"
            );
        }
    }

    #[test]
    fn params_coupling_check() {
        let p = PhysicalParams::coupled(2.0, 0.5).unwrap();
        assert!((p.r - 2.0).abs() < 1e-15);
        assert!(p.friction_coupled());
        let q = PhysicalParams::new(2.0, 0.5, 1.0).unwrap();
        assert!(!q.friction_coupled());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(Grid::new(0).is_err());
        assert!(TimeGrid::new(0, 1.0).is_err());
        assert!(TimeGrid::new(4, -1.0).is_err());
        let g = grid(4);
        assert!(GridFunction::new(g, vec![0.0; 3]).is_err());
        assert!(GridFunction::new(g, vec![f64::NAN; 5]).is_err());
    }
}
