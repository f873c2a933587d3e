//! Numerical toolkit for boundary controllability of the 1D viscous shallow
//! water system with friction.
//!
//! The crate simulates the nonlinear system with velocity boundary controls,
//! reduces it through the log-depth transformation to a boundary-controlled
//! heat equation, builds spectral backward-dual certificates whose boundary
//! fluxes have one sign, evaluates the duality-identity obstruction that
//! certifies unreachability gaps, and runs an adjoint-gradient control
//! optimizer whose best attempts the certificate must dominate.

pub mod cole_hopf;
pub mod control_search;
pub mod dual;
pub mod error;
pub mod grid;
pub mod heat;
pub mod io;
pub mod obstruction;
pub mod shallow_water;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, PhysicalParams, TimeGrid};
pub use heat::{HeatProblem, HeatTrajectory};
pub use shallow_water::{ControlSchedule, SWState, SWTrajectory};
