//! Riemannian sequential quadratic optimization.
//!
//! Solves `min f(x)` over an embedded matrix manifold subject to smooth
//! inequality constraints `g_i(x) <= 0` and equality constraints `h_j(x) = 0`.
//! Each outer iteration solves a strictly convex quadratic subproblem in the
//! coordinates of a random orthonormal tangent basis, then backtracks along the
//! retraction on an l1 exact penalty merit function.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod manifold;
pub mod problem;
pub mod qp;
pub mod rsqo;

pub use error::{Error, Result};
pub use manifold::{ManifoldError, ManifoldKind, Point, TangentBasis, TangentVector};
pub use problem::{KktReport, Multipliers, ResidualKind, RnloProblem, SmoothFunction};
pub use qp::{QpModel, QpSolution, QpStatus};
pub use rsqo::{
    solve, BStrategy, IterateState, IterationRecord, SolveTrace, SolverConfig, Verdict,
};
