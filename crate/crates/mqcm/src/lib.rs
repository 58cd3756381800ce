//! Adaptive multiquadric collocation for delay differential equations.
//!
//! The solver approximates the solution of a DDE on `[a, b]` by a linear
//! combination of Hardy multiquadrics centered at a set of collocation
//! nodes plus one or more centers placed outside the domain, so that both
//! the initial condition(s) and the differential equation can be enforced
//! at `x = a`. Linear problems reduce to one dense least-squares solve via
//! a truncated-SVD pseudoinverse; nonlinear, neutral, and state-dependent
//! problems are solved with a Powell dogleg trust-region iteration on the
//! collocation residuals. Node placement is driven by residual
//! subsampling: midpoint residuals decide where nodes are inserted and
//! which ones are dropped.
//!
//! # Layout
//!
//! - [`kernel`] — the multiquadric, its derivatives, and the
//!   shape-parameter distribution rule.
//! - [`problem`] — DDE problem descriptions, histories, and the built-in
//!   benchmark catalogue.
//! - [`linsolve`] — truncated-SVD least squares with condition reporting.
//! - [`collocation`] — system assembly, interpolants, residuals.
//! - [`nonlinear`] — residual systems, finite-difference Jacobians, and
//!   the dogleg solver.
//! - [`adapt`] — the residual-subsampling refinement loop and the
//!   piecewise driver for solutions with known singularity locations.
//! - [`oracle`] — an independent fixed-step method-of-steps RK4 solver
//!   used for cross-checking.
//! - [`cli`] — the benchmark harness behind the `mqcm` binary.

pub mod adapt;
pub mod cli;
pub mod collocation;
pub mod kernel;
pub mod linsolve;
pub mod nonlinear;
pub mod oracle;
pub mod problem;

mod error;
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
