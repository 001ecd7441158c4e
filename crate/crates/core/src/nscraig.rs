//! nsCRAIG for generalized saddle point systems with nonsymmetric `M`.
//!
//! The left recurrences are those of CRAIG. The right vectors are fully
//! orthogonalized (modified Gram-Schmidt in the `N` inner product), which
//! produces an upper Hessenberg `H_k` instead of `B_kᵀ`. The iterate is only
//! assembled once the stopping test fires:
//! `y_k = −B_k⁻¹ H_k⁻¹ (β₁e₁)`, `p = Q_k y_k`, `u = −M⁻¹A p`.

use std::time::Instant;

use crate::craig::{left_step, residual_defects, right_product, start_vector, LeftStep, ResidualDefect, BREAKDOWN_TOL};
use crate::error::{GspError, Result};
use crate::gkb::{bidiagonal, hessenberg, mgs};
use crate::linops::{axpy, dense_solve, DenseMatrix, SpdPreconditioner};
use crate::system::{
    signed_sqrt, ConvergenceRecord, Iterate, SaddleSystem, SolveResult, SolverConfig, Termination,
};

/// Everything the decomposition loop keeps.
#[derive(Debug, Clone)]
pub struct NsCraigState {
    pub k: usize,
    pub beta1: f64,
    /// `q_1 … q_k`
    pub q: Vec<Vec<f64>>,
    /// `α_1 … α_k`
    pub alphas: Vec<f64>,
    /// `β_1 … β_{k+1}` once `β_{k+1}` has been computed
    pub betas: Vec<f64>,
    /// `h_1 … h_k`, column `j` has length `j`
    pub hessenberg: Vec<Vec<f64>>,
    /// `χ_1 … χ_k`
    pub chis: Vec<f64>,
}

impl NsCraigState {
    /// `B_k` and `H_k` for the first `k` steps.
    pub fn factors(&self, k: usize) -> HessenbergFactors {
        HessenbergFactors::new(&self.alphas[..k], &self.betas, &self.hessenberg[..k])
    }
}

/// Small dense matrices of the nonsymmetric decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct HessenbergFactors {
    pub b: DenseMatrix,
    pub h: DenseMatrix,
}

impl HessenbergFactors {
    /// `alphas` has length `k`, `betas` at least `k`, `columns` has `k` entries.
    pub fn new(alphas: &[f64], betas: &[f64], columns: &[Vec<f64>]) -> Self {
        Self {
            b: bidiagonal(alphas, betas),
            h: hessenberg(columns, betas),
        }
    }

    pub fn k(&self) -> usize {
        self.b.rows()
    }

    /// `x` with `Bᵀx = β₁e₁`, i.e. the `χ` sequence.
    pub fn chis(&self, beta1: f64) -> Vec<f64> {
        let k = self.k();
        let mut x = vec![0.0; k];
        for i in 0..k {
            let rhs = if i == 0 { beta1 } else { -self.b[(i - 1, i)] * x[i - 1] };
            x[i] = rhs / self.b[(i, i)];
        }
        x
    }

    /// `L` with `H = BᵀLᵀ`: `Lᵀ = B⁻ᵀH` by forward substitution on each column.
    pub fn lower_factor(&self) -> DenseMatrix {
        let k = self.k();
        let mut lt = DenseMatrix::zeros(k, k);
        for j in 0..k {
            for i in 0..k {
                let mut v = self.h[(i, j)];
                if i > 0 {
                    v -= self.b[(i - 1, i)] * lt[(i - 1, j)];
                }
                lt[(i, j)] = v / self.b[(i, i)];
            }
        }
        lt.transpose()
    }

    /// `z = H⁻¹(β₁e₁)` by dense row-pivoted elimination.
    pub fn solve_hessenberg(&self, beta1: f64) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.k()];
        rhs[0] = beta1;
        dense_solve(&self.h, &rhs).map_err(|e| match e {
            GspError::Singular { index, pivot } => GspError::Breakdown {
                k: index + 1,
                what: "hessenberg pivot",
                value: pivot,
            },
            other => other,
        })
    }

    /// `y = −B⁻¹z` by back substitution.
    pub fn back_substitute(&self, z: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut v = z[i];
            if i + 1 < k {
                v -= self.b[(i, i + 1)] * y[i + 1];
            }
            y[i] = v / self.b[(i, i)];
        }
        y.iter().map(|v| -v).collect()
    }

    /// Coefficients `y_k` of `p⁽ᵏ⁾` in the `Q_k` basis through the triangular
    /// factors: `x = B⁻ᵀβ₁e₁`, `z = L⁻ᵀx`, `y = −B⁻¹z`.
    pub fn coefficients(&self, beta1: f64) -> Result<Vec<f64>> {
        let lower = self.lower_factor();
        if let Some(i) = (0..self.k()).find(|&i| lower[(i, i)].abs() <= BREAKDOWN_TOL || !lower[(i, i)].is_finite()) {
            return Err(GspError::Breakdown { k: i + 1, what: "hessenberg pivot", value: lower[(i, i)] });
        }
        let z = upper_solve_transposed(&lower, &self.chis(beta1));
        Ok(self.back_substitute(&z))
    }

    /// Same as [`coefficients`](Self::coefficients) via a dense solve with `H_k`.
    pub fn coefficients_dense(&self, beta1: f64) -> Result<Vec<f64>> {
        let z = self.solve_hessenberg(beta1)?;
        Ok(self.back_substitute(&z))
    }
}

/// `z` with `Lᵀz = x` for unit lower triangular `L` (leading `x.len()` block).
fn upper_solve_transposed(l: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let mut v = x[i];
        for j in i + 1..k {
            v -= l[(j, i)] * z[j];
        }
        z[i] = v / l[(i, i)];
    }
    z
}

/// `ζ` sequence `z = L⁻ᵀx` for the leading `chis.len()` block of `L`.
pub fn nscraig_zetas(chis: &[f64], lower: &DenseMatrix) -> Result<Vec<f64>> {
    if lower.rows() < chis.len() || lower.cols() < chis.len() {
        return Err(GspError::DimensionMismatch(format!(
            "L is {}x{} but {} chis were given",
            lower.rows(),
            lower.cols(),
            chis.len()
        )));
    }
    Ok(upper_solve_transposed(lower, chis))
}

/// `(Σ_{i=k−d+1..k} χ_iζ_i) / (Σ_{i=1..k} χ_iζ_i)` with `z_k = L_k⁻ᵀx_k`.
/// The value may be negative or exceed one.
pub fn nscraig_error_estimate(chis: &[f64], lower: &DenseMatrix, k: usize, d: usize) -> Result<f64> {
    if d == 0 || k < d {
        return Err(GspError::InsufficientHistory { k, d });
    }
    if chis.len() < k {
        return Err(GspError::InsufficientHistory { k: chis.len(), d });
    }
    let z = nscraig_zetas(&chis[..k], lower)?;
    let products: Vec<f64> = chis[..k].iter().zip(&z).map(|(c, z)| c * z).collect();
    let total: f64 = products.iter().sum();
    let window: f64 = products[k - d..].iter().sum();
    Ok(window / total)
}

fn assemble(sys: &SaddleSystem, state: &NsCraigState, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let y = state.factors(k).coefficients(state.beta1)?;
    let mut p = vec![0.0; sys.n()];
    for (yj, qj) in y.iter().zip(&state.q) {
        axpy(*yj, qj, &mut p);
    }
    let u = sys.velocity_from_pressure(&p)?;
    Ok((u, p))
}

/// Solves a generalized saddle point system with nsCRAIG.
pub fn nscraig_solve(sys: &SaddleSystem, n_pre: &SpdPreconditioner, cfg: &SolverConfig) -> Result<SolveResult> {
    nscraig_solve_with_state(sys, n_pre, cfg).map(|(result, _)| result)
}

/// [`nscraig_solve`] that also hands back the decomposition scalars and basis.
pub fn nscraig_solve_with_state(
    sys: &SaddleSystem,
    n_pre: &SpdPreconditioner,
    cfg: &SolverConfig,
) -> Result<(SolveResult, NsCraigState)> {
    cfg.validate()?;
    let start = Instant::now();
    let (beta1, q1) = start_vector(sys, n_pre)?;
    let mut left: LeftStep = left_step(sys, &q1, None, 1, 0.0)?;
    let alpha1 = left.alpha;
    let mut nq = vec![n_pre.apply(&q1)?];
    let mut state = NsCraigState {
        k: 1,
        beta1,
        q: vec![q1],
        alphas: vec![alpha1],
        betas: vec![beta1],
        hessenberg: Vec::new(),
        chis: vec![beta1 / alpha1],
    };
    let mut history = Vec::new();
    let mut iterates = Vec::new();

    let (termination, fired) = loop {
        let k = state.k;
        let mut g = right_product(sys, n_pre, &left)?;
        let h = mgs(&mut g, &state.q, &nq, cfg.reorthogonalize);
        state.hessenberg.push(h);
        let beta_next = n_pre.norm(&g)?;
        state.betas.push(beta_next);
        let chi = state.chis[k - 1];
        let relative_residual = beta_next / beta1 * chi.abs();
        let error_estimate = match cfg.criterion.delay() {
            Some(d) if k >= d => {
                let lower = state.factors(k).lower_factor();
                Some(signed_sqrt(nscraig_error_estimate(&state.chis, &lower, k, d)?))
            }
            _ => None,
        };
        history.push(ConvergenceRecord {
            k,
            relative_residual,
            error_estimate,
            alpha: state.alphas[k - 1],
            beta_next,
            scalar: chi,
            wall_time: start.elapsed().as_secs_f64(),
        });
        if cfg.keep_iterates {
            let (u, p) = assemble(sys, &state, k)?;
            iterates.push(Iterate { k, u, p });
        }

        if beta_next <= BREAKDOWN_TOL * beta1 {
            break (Termination::ExactTermination, None);
        }
        if let Some(which) = cfg.fired(relative_residual, error_estimate) {
            break (Termination::Converged, Some(which));
        }
        if k >= cfg.max_iterations {
            break (Termination::MaxIterations, None);
        }

        let q_next: Vec<f64> = g.iter().map(|x| x / beta_next).collect();
        left = left_step(sys, &q_next, Some((beta_next, &left)), k + 1, alpha1)?;
        state.alphas.push(left.alpha);
        state.chis.push(-beta_next / left.alpha * chi);
        nq.push(n_pre.apply(&q_next)?);
        state.q.push(q_next);
        state.k += 1;
    };

    let (u, p) = match iterates.last() {
        Some(it) => (it.u.clone(), it.p.clone()),
        None => assemble(sys, &state, state.k)?,
    };
    let result = SolveResult {
        u,
        p,
        iterations: state.k,
        termination,
        fired,
        history,
        iterates,
        right_basis: Some(state.q.clone()),
        solve_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((result, state))
}

/// Recomputes the second-block residual of every retained iterate and
/// compares it with `β_{k+1}|χ_k|`; also reports `max_j |rᵀq_j|` over `Q_k`.
pub fn nscraig_residual_check(
    sys: &SaddleSystem,
    n_pre: &SpdPreconditioner,
    result: &SolveResult,
) -> Result<Vec<ResidualDefect>> {
    residual_defects(sys, n_pre, result)
}
