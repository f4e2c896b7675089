//! Verification engine for symmetries, Λ-symmetries and Λ-constants of
//! motion of Hamiltonian and first-order Lagrangian systems.
//!
//! Every mathematical claim is reduced to "this expression vanishes" and
//! decided by [`expr::is_identically_zero`]: symbolically when the
//! simplifier reaches the literal zero, otherwise by seeded sampling over a
//! [`DomainBox`]. Claims that only make sense along solutions (Noether-type
//! relations, partial reductions) are confirmed on integrated trajectories.

pub mod corpus;
pub mod error;
pub mod expr;
pub mod lagrangian;
pub mod lambda;
pub mod mechanics;
pub mod numeric;
pub mod problem;
pub mod report;
pub mod runner;
pub mod symmetry;

pub use error::{Error, Result};
pub use expr::{
    differentiate, parse, simplify, substitute, DomainBox, Expr, NamedVerdict, Verifier,
    ZeroTestConfig, ZeroVerdict,
};
pub use lagrangian::{ConfigVectorField, LagrangianSystem};
pub use lambda::{LambdaMatrix, LambdaSide, ReductionChart};
pub use mechanics::{PhaseSystem, PhaseVectorField};
pub use problem::Problem;
pub use report::{CheckRecord, Report, Status, Verdict};
pub use runner::{run_checks, RunConfig};
