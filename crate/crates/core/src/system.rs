//! Problem container and the configuration/result types shared by every solver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::linops::{
    dense_solve, dot, norm2, DenseMatrix, FactorKind, FactorizedOperator, SparseMatrix,
    SpdPreconditioner, SYMMETRY_TOL,
};

/// The system `[[M, A], [Aᵀ, −C]] [u; p] = [0; b]`.
///
/// `M` is kept both as a sparse matrix (for products) and as an exact
/// factorization (for solves). The factorization is Cholesky when `M` is
/// symmetric to [`SYMMETRY_TOL`] and LU otherwise.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    m: SparseMatrix,
    m_factor: FactorizedOperator,
    a: SparseMatrix,
    c: SparseMatrix,
    b: Vec<f64>,
    symmetric: bool,
    factorization_seconds: f64,
}

impl SaddleSystem {
    pub fn new(m: SparseMatrix, a: SparseMatrix, c: SparseMatrix, b: Vec<f64>) -> Result<Self> {
        Self::validate_shapes(&m, &a, &c, &b)?;
        let symmetric = m.is_symmetric(SYMMETRY_TOL);
        let kind = if symmetric {
            FactorKind::CholeskySpd
        } else {
            FactorKind::LuGeneral
        };
        let start = Instant::now();
        let m_factor = FactorizedOperator::from_sparse(kind, &m)?;
        let factorization_seconds = start.elapsed().as_secs_f64();
        Ok(Self {
            m,
            m_factor,
            a,
            c,
            b,
            symmetric,
            factorization_seconds,
        })
    }

    fn validate_shapes(m: &SparseMatrix, a: &SparseMatrix, c: &SparseMatrix, b: &[f64]) -> Result<()> {
        let (rows, cols) = (a.rows(), a.cols());
        if !m.is_square() || m.rows() != rows {
            return Err(GspError::DimensionMismatch(format!(
                "M is {}x{} but A has {rows} rows",
                m.rows(),
                m.cols()
            )));
        }
        if cols == 0 || rows < cols {
            return Err(GspError::InvalidInput(format!(
                "need m >= n >= 1, got m = {rows}, n = {cols}"
            )));
        }
        if !c.is_square() || c.rows() != cols {
            return Err(GspError::DimensionMismatch(format!(
                "C is {}x{} but A has {cols} columns",
                c.rows(),
                c.cols()
            )));
        }
        if b.len() != cols {
            return Err(GspError::DimensionMismatch(format!(
                "b has length {} but A has {cols} columns",
                b.len()
            )));
        }
        let asym = c.relative_asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(GspError::NotSymmetric { asymmetry: asym });
        }
        if crate::linops::has_nan(b) {
            return Err(GspError::NotANumber("right-hand side"));
        }
        Ok(())
    }

    /// Same matrices and factorization, different right-hand side.
    pub fn with_rhs(&self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.n() {
            return Err(GspError::DimensionMismatch(format!(
                "b has length {} but n = {}",
                b.len(),
                self.n()
            )));
        }
        Ok(Self { b, ..self.clone() })
    }

    /// Like [`with_rhs`](Self::with_rhs) without copying the matrices.
    pub fn into_rhs(self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.n() {
            return Err(GspError::DimensionMismatch(format!(
                "b has length {} but n = {}",
                b.len(),
                self.n()
            )));
        }
        if crate::linops::has_nan(&b) {
            return Err(GspError::NotANumber("right-hand side"));
        }
        Ok(Self { b, ..self })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m_matrix(&self) -> &SparseMatrix {
        &self.m
    }

    pub fn m_factor(&self) -> &FactorizedOperator {
        &self.m_factor
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn factorization_seconds(&self) -> f64 {
        self.factorization_seconds
    }

    /// `[M u + A p; Aᵀ u − C p]`.
    pub fn apply(&self, u: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut top = self.m.matvec(u)?;
        let ap = self.a.matvec(p)?;
        for (t, v) in top.iter_mut().zip(&ap) {
            *t += v;
        }
        let mut bottom = self.a.matvec_transpose(u)?;
        let cp = self.c.matvec(p)?;
        for (t, v) in bottom.iter_mut().zip(&cp) {
            *t -= v;
        }
        Ok((top, bottom))
    }

    /// `b − Aᵀu + Cp`, the residual of the second block row.
    pub fn second_residual(&self, u: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let atu = self.a.matvec_transpose(u)?;
        let cp = self.c.matvec(p)?;
        Ok(self
            .b
            .iter()
            .zip(atu.iter().zip(&cp))
            .map(|(bi, (x, y))| bi - x + y)
            .collect())
    }

    /// `−M⁻¹ A p`, the velocity that makes the first block row exact.
    pub fn velocity_from_pressure(&self, p: &[f64]) -> Result<Vec<f64>> {
        let ap = self.a.matvec(p)?;
        Ok(self.m_factor.solve(&ap)?.into_iter().map(|v| -v).collect())
    }

    /// `S x = Aᵀ M⁻¹ A x + C x`.
    pub fn schur_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.a.matvec(x)?;
        let w = self.m_factor.solve(&ax)?;
        let mut out = self.a.matvec_transpose(&w)?;
        let cx = self.c.matvec(x)?;
        for (o, v) in out.iter_mut().zip(&cx) {
            *o += v;
        }
        Ok(out)
    }

    /// Dense `S = AᵀM⁻¹A + C`, column by column.
    pub fn schur_dense(&self) -> Result<DenseMatrix> {
        let n = self.n();
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            cols.push(self.schur_apply(&e)?);
            e[j] = 0.0;
        }
        Ok(DenseMatrix::from_columns(n, &cols))
    }

    /// The full `(m+n)×(m+n)` matrix, densified.
    pub fn full_dense(&self) -> DenseMatrix {
        let (m, n) = (self.m(), self.n());
        let mut k = DenseMatrix::zeros(m + n, m + n);
        for (i, j, v) in self.m.triplets() {
            k[(i, j)] = v;
        }
        for (i, j, v) in self.a.triplets() {
            k[(i, m + j)] = v;
            k[(m + j, i)] = v;
        }
        for (i, j, v) in self.c.triplets() {
            k[(m + i, m + j)] = -v;
        }
        k
    }

    /// `‖b‖_{N⁻¹}`.
    pub fn rhs_dual_norm(&self, n_pre: &SpdPreconditioner) -> Result<f64> {
        n_pre.dual_norm(&self.b)
    }

    pub(crate) fn check_preconditioner(&self, n_pre: &SpdPreconditioner) -> Result<()> {
        if n_pre.dim() != self.n() {
            return Err(GspError::DimensionMismatch(format!(
                "preconditioner has dimension {}, system has n = {}",
                n_pre.dim(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Energy `‖eu‖²_M + epᵀ C ep` of an error pair.
    pub fn energy(&self, eu: &[f64], ep: &[f64]) -> Result<f64> {
        let meu = self.m.matvec(eu)?;
        let cep = self.c.matvec(ep)?;
        Ok(dot(eu, &meu) + dot(ep, &cep))
    }

    /// ‖z − z*‖₂ / ‖z*‖₂ with z = [u; p], the error measure used in reports.
    pub fn relative_error(&self, u: &[f64], p: &[f64], exact: (&[f64], &[f64])) -> f64 {
        let diff: f64 = u
            .iter()
            .zip(exact.0)
            .chain(p.iter().zip(exact.1))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let base = (norm2(exact.0).powi(2) + norm2(exact.1).powi(2)).sqrt();
        if base == 0.0 {
            diff.sqrt()
        } else {
            diff.sqrt() / base
        }
    }

    /// Dense LU solve of the full system. Used as a reference solution.
    pub fn direct_solve(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, n) = (self.m(), self.n());
        if m + n > crate::linops::DENSE_LIMIT {
            return Err(GspError::TooLarge {
                dim: m + n,
                limit: crate::linops::DENSE_LIMIT,
            });
        }
        let mut rhs = vec![0.0; m];
        rhs.extend_from_slice(&self.b);
        let z = dense_solve(&self.full_dense(), &rhs)?;
        Ok((z[..m].to_vec(), z[m..].to_vec()))
    }
}

/// What ends a CRAIG-type iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StoppingCriterion {
    /// `β_{k+1}|ζ_k| / β₁ < tol`.
    RelativeResidual,
    /// Windowed relative error estimate over the last `delay` steps.
    ErrorEstimate { delay: usize },
    /// Whichever of the two fires first.
    Either { delay: usize },
}

impl StoppingCriterion {
    pub fn delay(&self) -> Option<usize> {
        match *self {
            Self::RelativeResidual => None,
            Self::ErrorEstimate { delay } | Self::Either { delay } => Some(delay),
        }
    }
}

/// Which criterion fired when a solve converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiredCriterion {
    RelativeResidual,
    ErrorEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub criterion: StoppingCriterion,
    /// CRAIG: full reorthogonalization of q against the stored basis.
    /// nsCRAIG / FOM / GMRES: second Gram-Schmidt pass.
    pub reorthogonalize: bool,
    /// Keep `(u, p)` for every iteration. nsCRAIG and SCR then assemble the
    /// iterate each step, which costs O(k·n) extra work per step.
    pub keep_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 3000,
            criterion: StoppingCriterion::RelativeResidual,
            reorthogonalize: false,
            keep_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_criterion(mut self, criterion: StoppingCriterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_reorthogonalization(mut self, on: bool) -> Self {
        self.reorthogonalize = on;
        self
    }

    pub fn with_iterates(mut self, on: bool) -> Self {
        self.keep_iterates = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(GspError::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(GspError::InvalidInput("max_iterations must be >= 1".into()));
        }
        if self.criterion.delay() == Some(0) {
            return Err(GspError::InvalidInput("error-estimate delay must be >= 1".into()));
        }
        Ok(())
    }

    /// Evaluates the configured criterion. `error_estimate` is the signed
    /// square root of the windowed estimate, when enough history exists.
    pub(crate) fn fired(&self, relative_residual: f64, error_estimate: Option<f64>) -> Option<FiredCriterion> {
        let residual = relative_residual < self.tolerance;
        let estimate = error_estimate.is_some_and(|e| e.abs() < self.tolerance);
        match self.criterion {
            StoppingCriterion::RelativeResidual => residual.then_some(FiredCriterion::RelativeResidual),
            StoppingCriterion::ErrorEstimate { .. } => estimate.then_some(FiredCriterion::ErrorEstimate),
            StoppingCriterion::Either { .. } => {
                if residual {
                    Some(FiredCriterion::RelativeResidual)
                } else if estimate {
                    Some(FiredCriterion::ErrorEstimate)
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Breakdown,
    ExactTermination,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(self, Self::Converged | Self::ExactTermination)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max-iterations",
            Self::Breakdown => "breakdown",
            Self::ExactTermination => "exact-termination",
        }
    }
}

/// One row of a convergence history.
///
/// `alpha`, `beta_next` and `scalar` hold the bidiagonalization quantities
/// (`α_k`, `β_{k+1}`, `ζ_k` or `χ_k`) for the CRAIG family and are NaN for
/// solvers that have no such quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub k: usize,
    pub relative_residual: f64,
    pub error_estimate: Option<f64>,
    pub alpha: f64,
    pub beta_next: f64,
    pub scalar: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub k: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub fired: Option<FiredCriterion>,
    pub history: Vec<ConvergenceRecord>,
    /// Empty unless `keep_iterates` was set.
    pub iterates: Vec<Iterate>,
    /// The right basis `q₁..q_k`, kept by nsCRAIG always and by CRAIG when reorthogonalizing.
    pub right_basis: Option<Vec<Vec<f64>>>,
    pub solve_seconds: f64,
}

impl SolveResult {
    pub fn final_relative_residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.relative_residual)
    }
}

pub(crate) fn signed_sqrt(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}
