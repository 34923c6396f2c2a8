//! Indirect solution of state-constrained, control-affine optimal control
//! problems by smoothing.
//!
//! The constrained and unconstrained necessary conditions share one form once
//! the constraint multiplier is written as `h(x, lam, t)` gated by the arc
//! conditions. Replacing the gates with smooth activations and the costate
//! corner jump with a Gaussian-weighted source term turns the problem into a
//! smooth two-point boundary value problem. It is solved by single shooting
//! on the initial costate, with continuation over decreasing sharpness.
//!
//! Module map:
//!
//! - [`problem`]: problem hooks and the quadratic-cost control/multiplier laws
//! - [`smoothing`]: activation functions, smoothed multiplier and control
//! - [`dynamics`]: augmented state/costate right-hand side and Hamiltonian
//! - [`integrator`]: Dormand-Prince 5(4) with dense output
//! - [`shooting`]: shooting residual and damped Newton solve
//! - [`continuation`]: sharpness continuation and per-level reports
//! - [`orbit`]: planar orbit transfer benchmark
//! - [`cli`]: batch front-end (config, CSV, SVG, report)

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod orbit;
pub mod problem;
pub mod shooting;
pub mod smoothing;
pub mod trajectory;

pub use continuation::{
    run_continuation, solve_unconstrained, ContinuationFailure, ContinuationOutcome,
    ContinuationReport, ContinuationSchedule, LevelRecord, SolverSettings,
};
pub use dynamics::{
    AugmentedState, ConstraintMode, JumpCoefficient, SmoothedSystem, TrajectoryPoint,
};
pub use error::{OcpError, Result};
pub use integrator::{IntegratorConfig, OdeSystem};
pub use orbit::{build_orbit_problem, OrbitConfig, OrbitProblem};
pub use problem::{BoundaryConditions, ProblemDefinition, QuadraticCost, TerminalCondition};
pub use shooting::{shooting_residual, solve_shooting, ShootingConfig, ShootingReport};
pub use smoothing::SharpnessParams;
pub use trajectory::{compute_cost, TrajectorySolution};
