//! Nonlinear least squares with Jackson q-derivative Jacobians.
//!
//! The crate provides the q-calculus differentiation kernel ([`qcalc`]), the
//! damped normal-equations solve ([`denselin`]), the q-Levenberg-Marquardt
//! family of solvers ([`solver`]) and a small corpus of test problems
//! ([`problems`]).

pub mod denselin;
pub mod error;
pub mod problems;
pub mod qcalc;
pub mod solver;

pub use denselin::{damped_normal_solve, gramian_and_rhs, DampedSystem, DenseMatrix};
pub use error::{Error, Result};
pub use problems::{catalog, make_problem, CatalogEntry, Problem};
pub use qcalc::{
    central_jacobian, q_bracket, q_derivative, q_factorial, q_gradient, q_jacobian, q_partial,
    q_taylor_eval, FallbackStep, FnResidualMap, FnScalarField, QVector, ResidualMap, ScalarField,
};
pub use solver::{
    accept_or_reject, advance_q, check_termination, lm_classic_solve, qgn_solve, qlm_solve,
    qlm_step, qsd_solve, DampingState, IterationRecord, QStrategy, SolveResult, SolverConfig,
    Termination,
};
