//! Krylov solvers for generalized saddle point systems
//!
//! ```text
//! [ M   A ] [u]   [0]
//! [ Aᵀ -C ] [p] = [b]
//! ```
//!
//! with `M` positive definite (symmetric or not), `A` of full column rank and
//! `C` symmetric positive semi-definite. The main entry points are
//! [`craig::craig_solve`] for symmetric `M` and [`nscraig::nscraig_solve`] for
//! nonsymmetric `M`. Both run a generalized Golub-Kahan process on the
//! augmented off-diagonal block without ever forming a factorization of `C`.
//!
//! The [`baselines`] module holds Schur complement reduction with inner CG/FOM,
//! block-diagonally preconditioned MINRES/GMRES and a dense direct solver;
//! [`gkb`] holds the explicit augmented-form bidiagonalizations used as oracles.

pub mod baselines;
pub mod craig;
pub mod error;
pub mod gkb;
pub mod io;
pub mod linops;
pub mod nscraig;
pub mod problems;
pub mod system;

pub use error::{GspError, Result};
pub use linops::{DenseMatrix, FactorKind, FactorizedOperator, SparseMatrix, SpdPreconditioner};
pub use system::{
    ConvergenceRecord, Iterate, SaddleSystem, SolveResult, SolverConfig, StoppingCriterion,
    Termination,
};
