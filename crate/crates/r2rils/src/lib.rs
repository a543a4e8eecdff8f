//! Low-rank matrix completion by rank-2r iterative least squares.
//!
//! Given a subset of entries of an (approximately) rank-r matrix, the solver
//! alternates two steps: a minimum-norm least-squares fit of the observed
//! values over the rank-2r lifted family `U_t B^T + A V_t^T`, solved
//! matrix-free with LSQR, and a normalized averaging update of the column and
//! row subspace estimates. The best rank-r truncation of the lifted estimate
//! across iterations is returned.
//!
//! The crate also ships analytic machinery for the fully observed rank-1
//! case (closed-form solutions, an explicit pseudoinverse and the scalar
//! overlap dynamics), synthetic problem generators, evaluation metrics and a
//! triplet-file reader/writer used by the command-line front end.

pub mod datagen;
pub mod error;
pub mod io;
pub mod lsq;
pub mod metrics;
pub mod model;
pub mod rank1;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    CompletionResult, FactorPair, InitMode, IterationRecord, IterationTrace, ObservedMatrix,
    SolverConfig, StopReason, UpdateVariant,
};
pub use solver::{complete, contraction_factor};
