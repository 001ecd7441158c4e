//! Sparse and dense kernels, weighted inner products and exact factorizations.

mod dense;
mod factor;
mod sparse;
mod vector;

pub use dense::DenseMatrix;
pub use factor::{
    dense_solve, factorize, spsd_factor, weighted_inner, weighted_norm, FactorKind,
    FactorizedOperator, SpdPreconditioner, SpsdFactors, WeightOperator, DENSE_LIMIT,
    SYMMETRY_TOL,
};
pub use sparse::SparseMatrix;
pub use vector::{add, axpy, concat, dot, has_nan, norm2, relative_difference, scale, scale_in_place, sub};
