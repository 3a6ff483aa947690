//! Wave-front tracking for 2x2 genuinely nonlinear systems of conservation
//! laws on `[0, L]` with the linear boundary feedback `u(t, 0) = K u(t, L)`.

pub mod error;
pub mod flux_model;
pub mod front_tracking;
pub mod functionals;
pub mod harness;
pub mod linalg;
pub mod piecewise;
pub mod stability;
pub mod trajectory;
pub mod wave_curves;

pub use error::{Error, Result};
pub use flux_model::{EigenStructure, Family, FluxModel};
pub use front_tracking::{Front, FrontKind, FrontTracker, RunResult, RunStatus, SolutionState, TrackerOptions};
pub use functionals::{FunctionalParams, FunctionalValues, SelectionOptions};
pub use linalg::{Mat2, StateVec};
pub use piecewise::{InitialProfile, PiecewiseConstant};
