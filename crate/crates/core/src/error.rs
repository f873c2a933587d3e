//! Error type shared by all solvers and transforms.

use std::fmt;

use crate::cole_hopf::ChainReport;

/// Errors raised by the solvers, transforms and searches.
#[derive(Debug, Clone)]
pub enum Error {
    /// A depth value became nonpositive (blow-up or CFL violation).
    PositivityLoss {
        time_index: usize,
        node: usize,
        value: f64,
    },
    /// The advective CFL precondition `dt <= 0.5 dx / max|u|` failed.
    CflViolation { dt: f64, dt_max: f64 },
    /// Boundary controls do not match the initial velocity traces.
    IncompatibleControls {
        left_gap: f64,
        right_gap: f64,
        tol: f64,
    },
    /// The transformation chain did not reproduce a heat solution within
    /// tolerance. Carries the full report for inspection.
    DivergedChain { report: Box<ChainReport> },
    /// Evaluation requested within `tau_min` of the singular final time.
    TooCloseToSingularTime { t: f64, t_star: f64 },
    /// The stored series truncation cannot certify the requested tail bound.
    TruncationInsufficient { needed: usize, available: usize },
    /// A geometric search ran out of attempts.
    SearchExhausted { attempts: usize },
    /// No dyadic candidate produced a positive linear lower bound.
    NoPositiveDelta,
    /// The plateau construction is infeasible for this delta.
    BadDelta { delta: f64 },
    /// The boundary-flux sign certificate does not hold.
    CertificateInvalid { detail: String },
    /// Trajectory horizon and dual horizon disagree.
    HorizonMismatch { expected: f64, actual: f64 },
    /// Optimizer result and obstruction report use different setups.
    InconsistentSetup { detail: String },
    /// A domain-type invariant was violated (non-finite data, bad sizes, ...).
    InvalidInput { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::PositivityLoss {
                time_index,
                node,
                value,
            } => write!(
                f,
                "depth lost positivity at time index {time_index}, node {node}: h = {value:e}"
            ),
            Error::CflViolation { dt, dt_max } => {
                write!(f, "CFL violation: dt = {dt:e} exceeds limit {dt_max:e}")
            }
            Error::IncompatibleControls {
                left_gap,
                right_gap,
                tol,
            } => write!(
                f,
                "controls incompatible with initial trace: |gaps| = ({left_gap:e}, {right_gap:e}), tol = {tol:e}"
            ),
            Error::DivergedChain { report } => write!(
                f,
                "transformation chain diverged: max distance {:e} > tol {:e}",
                report.max_distance, report.tol
            ),
            Error::TooCloseToSingularTime { t, t_star } => write!(
                f,
                "evaluation at t = {t} too close to the singular final time {t_star}"
            ),
            Error::TruncationInsufficient { needed, available } => write!(
                f,
                "series truncation insufficient: need {needed} modes, have {available}"
            ),
            Error::SearchExhausted { attempts } => {
                write!(f, "search exhausted after {attempts} attempts")
            }
            Error::NoPositiveDelta => write!(f, "no dyadic delta passes the linear lower bound"),
            Error::BadDelta { delta } => {
                write!(f, "plateau transitions overlap for delta = {delta}")
            }
            Error::CertificateInvalid { detail } => write!(f, "certificate invalid: {detail}"),
            Error::HorizonMismatch { expected, actual } => write!(
                f,
                "horizon mismatch: dual uses T* = {expected}, trajectory uses T = {actual}"
            ),
            Error::InconsistentSetup { detail } => write!(f, "inconsistent setup: {detail}"),
            Error::InvalidInput { detail } => write!(f, "invalid input: {detail}"),
        }
    }
}

impl std::error::Error for Error {}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(detail: impl Into<String>) -> Self {
        Error::InvalidInput {
            detail: detail.into(),
        }
    }
}
