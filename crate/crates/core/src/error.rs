use thiserror::Error;

use crate::linalg::StateVec;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("state {0:?} leaves the domain |u| <= {1}")]
    OutOfDomain(StateVec, f64),
    #[error("Jacobian at {0:?} does not have two distinct real eigenvalues")]
    NotHyperbolic(StateVec),
    #[error("characteristic speed {1} at {0:?} is not positive")]
    NotPositive(StateVec, f64),
    #[error("characteristic field {family} is linearly degenerate at {state:?}")]
    LinearlyDegenerate { family: usize, state: StateVec },
    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },
    #[error("initial data too large: {0}")]
    DataTooLarge(String),
    #[error("no pending event: the state is steady")]
    NoEvent,
    #[error("could not separate simultaneous events at t = {0}")]
    CannotSeparate(f64),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("no feasible functional parameters (rho_1 = {rho1})")]
    NoFeasibleParams { rho1: f64 },
    #[error("eigenbasis at the origin is degenerate")]
    DegenerateEigenbasis,
    #[error("characteristic root within 1e-6 of Re z = -delta: {0}")]
    InconclusiveNearBoundary(num_complex::Complex64),
    #[error("CFL condition violated: {0}")]
    CflViolation(String),
}
