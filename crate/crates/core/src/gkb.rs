//! Generalized Golub-Kahan bidiagonalization on the explicitly augmented system.
//!
//! With `C = EᵀFE` the saddle point system is equivalent to one with
//! `M̄ = blkdiag(M, F⁻¹)` and `Ā = [A; E]`. The routines here run the
//! bidiagonalization on that form directly. They store full bases and exist
//! to check the `E`,`F`-free solvers and the decomposition identities.

use crate::craig::BREAKDOWN_TOL;
use crate::error::{GspError, Result};
use crate::linops::{
    axpy, dot, spsd_factor, DenseMatrix, FactorizedOperator, SparseMatrix, SpdPreconditioner,
};
use crate::system::SaddleSystem;

/// `M̄ = blkdiag(M, F⁻¹)`, `Ā = [A; E]` and `b`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    m: SparseMatrix,
    m_factor: FactorizedOperator,
    f: Vec<f64>,
    a: SparseMatrix,
    e: DenseMatrix,
    b: Vec<f64>,
}

impl AugmentedSystem {
    /// Factors `C` with [`spsd_factor`]. Rejects `C = O`.
    pub fn from_saddle(sys: &SaddleSystem, rank_tol: f64) -> Result<Self> {
        let factors = spsd_factor(sys.c(), rank_tol)?;
        if factors.rank == 0 {
            return Err(GspError::DegenerateC);
        }
        let f = (0..factors.rank).map(|i| factors.f[(i, i)]).collect();
        Ok(Self {
            m: sys.m_matrix().clone(),
            m_factor: sys.m_factor().clone(),
            f,
            a: sys.a().clone(),
            e: factors.e,
            b: sys.b().to_vec(),
        })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn l(&self) -> usize {
        self.f.len()
    }

    pub fn e(&self) -> &DenseMatrix {
        &self.e
    }

    pub fn f_diagonal(&self) -> &[f64] {
        &self.f
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `ĀᵀM̄⁻¹Ā = AᵀM⁻¹A + EᵀFE`, densely.
    pub fn schur_dense(&self) -> Result<DenseMatrix> {
        let n = self.n();
        let mut cols = Vec::with_capacity(n);
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let w = self.m_factor.solve(&self.a.matvec(&unit)?)?;
            let mut col = self.a.matvec_transpose(&w)?;
            let fe: Vec<f64> = self.e.matvec(&unit)?.iter().zip(&self.f).map(|(x, f)| x * f).collect();
            axpy(1.0, &self.e.matvec_transpose(&fe)?, &mut col);
            cols.push(col);
            unit[j] = 0.0;
        }
        Ok(DenseMatrix::from_columns(n, &cols))
    }

    fn a_bar_transpose(&self, vx: &[f64], vc: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a.matvec_transpose(vx)?;
        axpy(1.0, &self.e.matvec_transpose(vc)?, &mut out);
        Ok(out)
    }

    fn f_inv(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.f).map(|(x, f)| x / f).collect()
    }

    /// `⟨ū, v̄⟩_M̄ = uᵀMv + cᵀF⁻¹d`.
    fn m_bar_inner(&self, ux: &[f64], uc: &[f64], vx: &[f64], vc: &[f64]) -> Result<f64> {
        Ok(dot(ux, &self.m.matvec(vx)?) + dot(uc, &self.f_inv(vc)))
    }
}

/// Right basis `Q`, left basis `V̄ = [Vx; Vc]`, and `q_{k+1}` when it exists.
#[derive(Debug, Clone)]
pub struct GkbBasis {
    pub q: Vec<Vec<f64>>,
    pub q_next: Option<Vec<f64>>,
    pub vx: Vec<Vec<f64>>,
    pub vc: Vec<Vec<f64>>,
}

impl GkbBasis {
    pub fn k(&self) -> usize {
        self.q.len()
    }
}

#[derive(Debug, Clone)]
pub struct BidiagFactors {
    /// `α_1 … α_k`
    pub alphas: Vec<f64>,
    /// `β_1 … β_{k+1}`
    pub betas: Vec<f64>,
    /// Columns `h_j` (length `j`) of the Hessenberg matrix, nonsymmetric case only.
    pub hessenberg: Option<Vec<Vec<f64>>>,
    /// `L_k = V̄ᵀM̄V̄`, nonsymmetric case only.
    pub lower: Option<DenseMatrix>,
}

impl BidiagFactors {
    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    /// Upper bidiagonal `B_k` with `α` on the diagonal and `β_2 … β_k` above it.
    pub fn b_matrix(&self) -> DenseMatrix {
        bidiagonal(&self.alphas, &self.betas)
    }

    /// `H_k`: column `j` holds `h_j` and `β_{j+1}` just below the diagonal.
    pub fn h_matrix(&self) -> Option<DenseMatrix> {
        self.hessenberg.as_ref().map(|cols| hessenberg(cols, &self.betas))
    }
}

pub(crate) fn bidiagonal(alphas: &[f64], betas: &[f64]) -> DenseMatrix {
    let k = alphas.len();
    let mut b = DenseMatrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alphas[i];
        if i + 1 < k {
            b[(i, i + 1)] = betas[i + 1];
        }
    }
    b
}

pub(crate) fn hessenberg(cols: &[Vec<f64>], betas: &[f64]) -> DenseMatrix {
    let k = cols.len();
    let mut h = DenseMatrix::zeros(k, k);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate().take(k) {
            h[(i, j)] = v;
        }
        if j + 1 < k {
            h[(j + 1, j)] = betas[j + 1];
        }
    }
    h
}

fn start(aug: &AugmentedSystem, n_pre: &SpdPreconditioner) -> Result<(f64, Vec<f64>)> {
    if n_pre.dim() != aug.n() {
        return Err(GspError::DimensionMismatch(format!(
            "preconditioner has dimension {}, system has n = {}",
            n_pre.dim(),
            aug.n()
        )));
    }
    let nb = n_pre.solve(&aug.b)?;
    let beta1 = dot(&aug.b, &nb).max(0.0).sqrt();
    if beta1 == 0.0 {
        return Err(GspError::ZeroRhs);
    }
    Ok((beta1, nb.iter().map(|x| x / beta1).collect()))
}

/// `w̄ = M̄⁻¹(Āq − β M̄ v̄)` normalized; returns `(α, v_x, v_c)`.
fn left_step(
    aug: &AugmentedSystem,
    q: &[f64],
    prev: Option<(f64, &[f64], &[f64])>,
    k: usize,
    alpha1: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut rhs = aug.a.matvec(q)?;
    let mut eq = aug.e.matvec(q)?;
    if let Some((beta, vx, vc)) = prev {
        axpy(-beta, &aug.m.matvec(vx)?, &mut rhs);
        axpy(-beta, &aug.f_inv(vc), &mut eq);
    }
    let wx = aug.m_factor.solve(&rhs)?;
    let wc: Vec<f64> = eq.iter().zip(&aug.f).map(|(x, f)| x * f).collect();
    let alpha = aug.m_bar_inner(&wx, &wc, &wx, &wc)?.max(0.0).sqrt();
    if !(alpha > BREAKDOWN_TOL * alpha1) || !alpha.is_finite() {
        return Err(GspError::Breakdown {
            k,
            what: "alpha",
            value: alpha,
        });
    }
    Ok((
        alpha,
        wx.iter().map(|x| x / alpha).collect(),
        wc.iter().map(|x| x / alpha).collect(),
    ))
}

fn check_steps(aug: &AugmentedSystem, steps: usize) -> Result<()> {
    if steps == 0 || steps > aug.n() {
        return Err(GspError::InvalidInput(format!(
            "steps must be in 1..={}, got {steps}",
            aug.n()
        )));
    }
    Ok(())
}

/// Symmetric generalized GKB for `steps` steps, stopping early when
/// `β_{k+1} ≤ 1e-14·β₁`. With `reorthogonalize`, `q_{k+1}` is additionally
/// orthogonalized against every stored `q` in the `N` inner product.
pub fn gkb_symmetric(
    aug: &AugmentedSystem,
    n_pre: &SpdPreconditioner,
    steps: usize,
    reorthogonalize: bool,
) -> Result<(GkbBasis, BidiagFactors)> {
    check_steps(aug, steps)?;
    let (beta1, q1) = start(aug, n_pre)?;
    let (alpha1, vx1, vc1) = left_step(aug, &q1, None, 1, 0.0)?;
    let mut basis = GkbBasis {
        q: vec![q1],
        q_next: None,
        vx: vec![vx1],
        vc: vec![vc1],
    };
    let mut alphas = vec![alpha1];
    let mut betas = vec![beta1];

    loop {
        let k = basis.q.len();
        let (vx, vc, q) = (&basis.vx[k - 1], &basis.vc[k - 1], &basis.q[k - 1]);
        let mut g = n_pre.solve(&aug.a_bar_transpose(vx, vc)?)?;
        axpy(-alphas[k - 1], q, &mut g);
        if reorthogonalize {
            for qj in &basis.q {
                let h = dot(&n_pre.apply(qj)?, &g);
                axpy(-h, qj, &mut g);
            }
        }
        let beta = n_pre.norm(&g)?;
        betas.push(beta);
        if beta <= BREAKDOWN_TOL * beta1 {
            break;
        }
        let q_next: Vec<f64> = g.iter().map(|x| x / beta).collect();
        if k == steps {
            basis.q_next = Some(q_next);
            break;
        }
        let (alpha, vx_next, vc_next) =
            left_step(aug, &q_next, Some((beta, vx, vc)), k + 1, alpha1)?;
        alphas.push(alpha);
        basis.q.push(q_next);
        basis.vx.push(vx_next);
        basis.vc.push(vc_next);
    }

    Ok((
        basis,
        BidiagFactors {
            alphas,
            betas,
            hessenberg: None,
            lower: None,
        },
    ))
}

/// Nonsymmetric generalized GKB. `ĝ_k = N⁻¹Āᵀv̄_k` is orthogonalized against
/// all stored `q` by modified Gram-Schmidt; `second_pass` repeats the sweep
/// and accumulates the coefficients into `h_k`.
pub fn gkb_nonsymmetric(
    aug: &AugmentedSystem,
    n_pre: &SpdPreconditioner,
    steps: usize,
    second_pass: bool,
) -> Result<(GkbBasis, BidiagFactors)> {
    check_steps(aug, steps)?;
    let (beta1, q1) = start(aug, n_pre)?;
    let (alpha1, vx1, vc1) = left_step(aug, &q1, None, 1, 0.0)?;
    let mut nq = vec![n_pre.apply(&q1)?];
    let mut basis = GkbBasis {
        q: vec![q1],
        q_next: None,
        vx: vec![vx1],
        vc: vec![vc1],
    };
    let mut alphas = vec![alpha1];
    let mut betas = vec![beta1];
    let mut columns: Vec<Vec<f64>> = Vec::new();

    loop {
        let k = basis.q.len();
        let (vx, vc) = (&basis.vx[k - 1], &basis.vc[k - 1]);
        let mut g = n_pre.solve(&aug.a_bar_transpose(vx, vc)?)?;
        let h = mgs(&mut g, &basis.q, &nq, second_pass);
        columns.push(h);
        let beta = n_pre.norm(&g)?;
        betas.push(beta);
        if beta <= BREAKDOWN_TOL * beta1 {
            break;
        }
        let q_next: Vec<f64> = g.iter().map(|x| x / beta).collect();
        if k == steps {
            basis.q_next = Some(q_next);
            break;
        }
        let (alpha, vx_next, vc_next) =
            left_step(aug, &q_next, Some((beta, vx, vc)), k + 1, alpha1)?;
        alphas.push(alpha);
        nq.push(n_pre.apply(&q_next)?);
        basis.q.push(q_next);
        basis.vx.push(vx_next);
        basis.vc.push(vc_next);
    }

    let lower = left_gram(aug, &basis)?;
    Ok((
        basis,
        BidiagFactors {
            alphas,
            betas,
            hessenberg: Some(columns),
            lower: Some(lower),
        },
    ))
}

/// Modified Gram-Schmidt of `g` against `q_j` in the `N` inner product
/// (`nq[j] = N q_j`). Returns the accumulated coefficients.
pub(crate) fn mgs(g: &mut [f64], q: &[Vec<f64>], nq: &[Vec<f64>], second_pass: bool) -> Vec<f64> {
    let mut h = vec![0.0; q.len()];
    let passes = if second_pass { 2 } else { 1 };
    for _ in 0..passes {
        for (j, (qj, nqj)) in q.iter().zip(nq).enumerate() {
            let c = dot(nqj, g);
            axpy(-c, qj, g);
            h[j] += c;
        }
    }
    h
}

/// `V̄ᵀM̄V̄`, entry `(i, j) = ⟨v̄_i, v̄_j⟩_M̄`.
fn left_gram(aug: &AugmentedSystem, basis: &GkbBasis) -> Result<DenseMatrix> {
    let k = basis.k();
    let mut out = DenseMatrix::zeros(k, k);
    for j in 0..k {
        let mvx = aug.m.matvec(&basis.vx[j])?;
        let fvc = aug.f_inv(&basis.vc[j]);
        for i in 0..k {
            out[(i, j)] = dot(&basis.vx[i], &mvx) + dot(&basis.vc[i], &fvc);
        }
    }
    Ok(out)
}

/// Residual norms of the decomposition identities.
///
/// The two block identities are scaled by `‖A‖_F + ‖E‖_F`; the projection and
/// Hessenberg checks are relative to the norm of the reference matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub k: usize,
    /// `‖ĀQ − M̄V̄B‖_F`, relative
    pub left_identity: f64,
    /// `‖ĀᵀV̄ − NQBᵀ (or NQH) − β_{k+1}Nq_{k+1}e_kᵀ‖_F`, relative
    pub right_identity: f64,
    /// `‖QᵀNQ − I‖_F`
    pub q_orthogonality: f64,
    /// `‖V̄ᵀM̄V̄ − I‖_F` (symmetric) or `‖V̄ᵀM̄V̄ − L‖_F` (nonsymmetric)
    pub v_orthogonality: f64,
    /// `‖BᵀB (or HB) − QᵀSQ‖_F / ‖QᵀSQ‖_F`
    pub projection: f64,
    /// `‖H − BᵀLᵀ‖_F / ‖H‖_F`, nonsymmetric only
    pub hessenberg_lu: Option<f64>,
    /// Largest `|L_ij|` strictly above the diagonal and `max |L_ii − 1|`, nonsymmetric only
    pub lower_shape: Option<f64>,
}

impl DecompositionReport {
    pub fn worst_identity(&self) -> f64 {
        self.left_identity.max(self.right_identity)
    }
}

pub fn verify_decomposition(
    aug: &AugmentedSystem,
    n_pre: &SpdPreconditioner,
    basis: &GkbBasis,
    factors: &BidiagFactors,
    symmetric: bool,
) -> Result<DecompositionReport> {
    let k = basis.k();
    if factors.k() != k || factors.betas.len() != k + 1 {
        return Err(GspError::DimensionMismatch(format!(
            "basis has {k} vectors but factors hold {} alphas and {} betas",
            factors.k(),
            factors.betas.len()
        )));
    }
    let scale = aug.a.frobenius_norm() + aug.e.frobenius_norm();
    let b = factors.b_matrix();
    let h = if symmetric {
        b.transpose()
    } else {
        factors.h_matrix().ok_or_else(|| {
            GspError::InvalidInput("nonsymmetric check needs Hessenberg columns".into())
        })?
    };

    // ĀQ − M̄V̄B, column by column.
    let mut left_sq = 0.0;
    for j in 0..k {
        let mut x = aug.a.matvec(&basis.q[j])?;
        let mut c = aug.e.matvec(&basis.q[j])?;
        for i in 0..k {
            let bij = b[(i, j)];
            if bij != 0.0 {
                axpy(-bij, &aug.m.matvec(&basis.vx[i])?, &mut x);
                axpy(-bij, &aug.f_inv(&basis.vc[i]), &mut c);
            }
        }
        left_sq += dot(&x, &x) + dot(&c, &c);
    }

    // ĀᵀV̄ − NQH − β_{k+1}Nq_{k+1}e_kᵀ.
    let nq: Vec<Vec<f64>> = basis.q.iter().map(|q| n_pre.apply(q)).collect::<Result<_>>()?;
    let mut right_sq = 0.0;
    for j in 0..k {
        let mut y = aug.a_bar_transpose(&basis.vx[j], &basis.vc[j])?;
        for i in 0..k {
            let hij = h[(i, j)];
            if hij != 0.0 {
                axpy(-hij, &nq[i], &mut y);
            }
        }
        if j == k - 1 {
            if let Some(qn) = &basis.q_next {
                axpy(-factors.betas[k], &n_pre.apply(qn)?, &mut y);
            }
        }
        right_sq += dot(&y, &y);
    }

    let mut q_gram = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            q_gram[(i, j)] = dot(&basis.q[i], &nq[j]);
        }
    }
    let q_orthogonality = q_gram.sub(&DenseMatrix::identity(k))?.frobenius_norm();

    let gram = left_gram(aug, basis)?;
    let v_orthogonality = if symmetric {
        gram.sub(&DenseMatrix::identity(k))?.frobenius_norm()
    } else {
        match &factors.lower {
            Some(lower) => gram.sub(lower)?.frobenius_norm(),
            None => f64::NAN,
        }
    };

    let s = aug.schur_dense()?;
    let qmat = DenseMatrix::from_columns(aug.n(), &basis.q);
    let projected = qmat.transpose().matmul(&s.matmul(&qmat)?)?;
    let reduced = h.matmul(&b)?;
    let projection = reduced.sub(&projected)?.frobenius_norm() / projected.frobenius_norm();

    let (hessenberg_lu, lower_shape) = if symmetric {
        (None, None)
    } else {
        match &factors.lower {
            Some(lower) => {
                let lu = b.transpose().matmul(&lower.transpose())?;
                let mut shape: f64 = 0.0;
                for j in 0..k {
                    shape = shape.max((lower[(j, j)] - 1.0).abs());
                    for i in 0..j {
                        shape = shape.max(lower[(i, j)].abs());
                    }
                }
                (Some(h.sub(&lu)?.frobenius_norm() / h.frobenius_norm()), Some(shape))
            }
            None => (None, None),
        }
    };

    Ok(DecompositionReport {
        k,
        left_identity: left_sq.sqrt() / scale,
        right_identity: right_sq.sqrt() / scale,
        q_orthogonality,
        v_orthogonality,
        projection,
        hessenberg_lu,
        lower_shape,
    })
}
