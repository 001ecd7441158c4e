//! CRAIG for symmetric generalized saddle point systems.
//!
//! The iteration is the generalized Golub-Kahan process on the augmented block
//! `[A; E]` with `C = EᵀFE`, rewritten so that only products with `C` appear:
//! the auxiliary vectors `r_k`, `s_k = C r_k` and `t_k = s_k / α_k` carry the
//! contribution of the stabilization block. `u` and `p` are updated with short
//! recurrences, so only the latest `q, v, r, s, t` are kept.

use std::time::Instant;

use crate::error::{GspError, Result};
use crate::linops::{axpy, dot, norm2, SpdPreconditioner};
use crate::system::{
    signed_sqrt, ConvergenceRecord, Iterate, SaddleSystem, SolveResult, SolverConfig, Termination,
};

/// Relative threshold on `α_{k+1}/α₁` (breakdown) and `β_{k+1}/β₁` (exact termination).
pub const BREAKDOWN_TOL: f64 = 1e-14;

/// Vectors and scalars of one CRAIG step.
#[derive(Debug, Clone)]
pub struct CraigState {
    pub k: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub beta1: f64,
    pub alpha1: f64,
}

/// Left-side vectors of one step: `v_k, r_k, s_k = C r_k, t_k = s_k/α_k` and `α_k`.
#[derive(Debug, Clone)]
pub(crate) struct LeftStep {
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha: f64,
}

/// `β₁ = ‖b‖_{N⁻¹}`, `q₁ = N⁻¹b/β₁`.
pub(crate) fn start_vector(sys: &SaddleSystem, n_pre: &SpdPreconditioner) -> Result<(f64, Vec<f64>)> {
    sys.check_preconditioner(n_pre)?;
    let b = sys.b();
    if norm2(b) == 0.0 {
        return Err(GspError::ZeroRhs);
    }
    let nb = n_pre.solve(b)?;
    let beta1 = dot(b, &nb).max(0.0).sqrt();
    if beta1 == 0.0 {
        return Err(GspError::ZeroRhs);
    }
    Ok((beta1, nb.iter().map(|x| x / beta1).collect()))
}

/// `w = M⁻¹(Aq − βMv_prev)`, `r = q − (β/α_prev) r_prev`, `s = Cr`,
/// `α = sqrt(‖w‖²_M + rᵀs)`. Without `prev` this is the first step.
pub(crate) fn left_step(
    sys: &SaddleSystem,
    q: &[f64],
    prev: Option<(f64, &LeftStep)>,
    k: usize,
    alpha1: f64,
) -> Result<LeftStep> {
    let mut rhs = sys.a().matvec(q)?;
    let mut r = q.to_vec();
    if let Some((beta, prev)) = prev {
        axpy(-beta, &sys.m_matrix().matvec(&prev.v)?, &mut rhs);
        axpy(-beta / prev.alpha, &prev.r, &mut r);
    }
    let w = sys.m_factor().solve(&rhs)?;
    let s = sys.c().matvec(&r)?;
    let radicand = dot(&w, &sys.m_matrix().matvec(&w)?) + dot(&r, &s);
    let alpha = radicand.max(0.0).sqrt();
    if !(alpha > BREAKDOWN_TOL * alpha1) || !alpha.is_finite() {
        return Err(GspError::Breakdown {
            k,
            what: "alpha",
            value: alpha,
        });
    }
    Ok(LeftStep {
        v: w.iter().map(|x| x / alpha).collect(),
        t: s.iter().map(|x| x / alpha).collect(),
        r,
        s,
        alpha,
    })
}

/// `N⁻¹(Aᵀv_k + t_k)`.
pub(crate) fn right_product(sys: &SaddleSystem, n_pre: &SpdPreconditioner, left: &LeftStep) -> Result<Vec<f64>> {
    let mut rhs = sys.a().matvec_transpose(&left.v)?;
    axpy(1.0, &left.t, &mut rhs);
    n_pre.solve(&rhs)
}

impl CraigState {
    /// First step: `β₁, q₁, w₁, r₁, s₁, α₁, v₁, t₁, ζ₁, u⁽¹⁾, p⁽¹⁾`.
    pub fn start(sys: &SaddleSystem, n_pre: &SpdPreconditioner) -> Result<Self> {
        let (beta1, q) = start_vector(sys, n_pre)?;
        let left = left_step(sys, &q, None, 1, 0.0)?;
        let alpha = left.alpha;
        let zeta = beta1 / alpha;
        let u: Vec<f64> = left.v.iter().map(|x| zeta * x).collect();
        let p: Vec<f64> = left.r.iter().map(|x| -zeta / alpha * x).collect();
        Ok(Self {
            k: 1,
            q,
            v: left.v,
            r: left.r,
            s: left.s,
            t: left.t,
            alpha,
            beta: beta1,
            zeta,
            u,
            p,
            beta1,
            alpha1: alpha,
        })
    }

    fn left(&self) -> LeftStep {
        LeftStep {
            v: self.v.clone(),
            r: self.r.clone(),
            s: self.s.clone(),
            t: self.t.clone(),
            alpha: self.alpha,
        }
    }

    /// `g_k = N⁻¹(Aᵀv_k + t_k) − α_k q_k`.
    fn next_direction(&self, sys: &SaddleSystem, n_pre: &SpdPreconditioner) -> Result<Vec<f64>> {
        let mut g = right_product(sys, n_pre, &self.left())?;
        axpy(-self.alpha, &self.q, &mut g);
        Ok(g)
    }

    /// Completes step k+1 from `g_k` and `β_{k+1} = ‖g_k‖_N > 0`.
    fn advance(&mut self, sys: &SaddleSystem, g: &[f64], beta_next: f64) -> Result<()> {
        let q_next: Vec<f64> = g.iter().map(|x| x / beta_next).collect();
        let left = left_step(sys, &q_next, Some((beta_next, &self.left())), self.k + 1, self.alpha1)?;
        let zeta = -beta_next / left.alpha * self.zeta;
        axpy(zeta, &left.v, &mut self.u);
        axpy(-zeta / left.alpha, &left.r, &mut self.p);
        self.q = q_next;
        self.v = left.v;
        self.r = left.r;
        self.s = left.s;
        self.t = left.t;
        self.alpha = left.alpha;
        self.beta = beta_next;
        self.zeta = zeta;
        self.k += 1;
        Ok(())
    }
}

/// Modified Gram-Schmidt of `g` against stored `(q_j, N q_j)` pairs.
fn reorthogonalize(g: &mut [f64], basis: &[(Vec<f64>, Vec<f64>)]) {
    for (q, nq) in basis {
        let h = dot(nq, g);
        axpy(-h, q, g);
    }
}

/// Solves a symmetric generalized saddle point system with CRAIG.
pub fn craig_solve(sys: &SaddleSystem, n_pre: &SpdPreconditioner, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if !sys.is_symmetric() {
        return Err(GspError::WrongSolver { solver: "craig" });
    }
    let start = Instant::now();
    let mut state = CraigState::start(sys, n_pre)?;
    let mut zetas = vec![state.zeta];
    let mut history = Vec::new();
    let mut iterates = Vec::new();
    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if cfg.reorthogonalize {
        basis.push((state.q.clone(), n_pre.apply(&state.q)?));
    }

    let (termination, fired) = loop {
        let mut g = state.next_direction(sys, n_pre)?;
        if cfg.reorthogonalize {
            reorthogonalize(&mut g, &basis);
        }
        let beta_next = n_pre.norm(&g)?;
        let relative_residual = beta_next / state.beta1 * state.zeta.abs();
        let error_estimate = match cfg.criterion.delay() {
            Some(d) if state.k >= d => Some(signed_sqrt(craig_error_estimate(&zetas, state.k, d)?)),
            _ => None,
        };
        history.push(ConvergenceRecord {
            k: state.k,
            relative_residual,
            error_estimate,
            alpha: state.alpha,
            beta_next,
            scalar: state.zeta,
            wall_time: start.elapsed().as_secs_f64(),
        });
        if cfg.keep_iterates {
            iterates.push(Iterate {
                k: state.k,
                u: state.u.clone(),
                p: state.p.clone(),
            });
        }

        if beta_next <= BREAKDOWN_TOL * state.beta1 {
            break (Termination::ExactTermination, None);
        }
        if let Some(which) = cfg.fired(relative_residual, error_estimate) {
            break (Termination::Converged, Some(which));
        }
        if state.k >= cfg.max_iterations {
            break (Termination::MaxIterations, None);
        }

        state.advance(sys, &g, beta_next)?;
        zetas.push(state.zeta);
        if cfg.reorthogonalize {
            basis.push((state.q.clone(), n_pre.apply(&state.q)?));
        }
    };

    Ok(SolveResult {
        iterations: state.k,
        u: state.u,
        p: state.p,
        termination,
        fired,
        history,
        iterates,
        right_basis: cfg
            .reorthogonalize
            .then(|| basis.into_iter().map(|(q, _)| q).collect()),
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Squared relative error estimate
/// `ξ̄² = Σ_{i=k−d+1..k} ζ_i² / Σ_{i=1..k} ζ_i²` over the first `k` entries of `zetas`.
pub fn craig_error_estimate(zetas: &[f64], k: usize, d: usize) -> Result<f64> {
    if d == 0 || k < d {
        return Err(GspError::InsufficientHistory { k, d });
    }
    if zetas.len() < k {
        return Err(GspError::InsufficientHistory { k: zetas.len(), d });
    }
    let total: f64 = zetas[..k].iter().map(|z| z * z).sum();
    let window: f64 = zetas[k - d..k].iter().map(|z| z * z).sum();
    Ok(window / total)
}

/// Comparison of the recursively estimated residual against an explicit recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDefect {
    pub k: usize,
    /// `‖b − Aᵀu⁽ᵏ⁾ + Cp⁽ᵏ⁾‖_{N⁻¹}`
    pub explicit: f64,
    /// `β_{k+1}|ζ_k|` (or `χ_k`)
    pub estimate: f64,
    /// `|explicit − estimate| / β₁`
    pub defect: f64,
    /// `‖M u⁽ᵏ⁾ + A p⁽ᵏ⁾‖₂`
    pub upper_block: f64,
    /// `‖A‖_F · ‖p⁽ᵏ⁾‖₂`, the scale the upper block is judged against.
    pub upper_scale: f64,
    /// `max_j |rᵀq_j|` over the stored right basis, when available.
    pub orthogonality: Option<f64>,
}

pub(crate) fn residual_defects(
    sys: &SaddleSystem,
    n_pre: &SpdPreconditioner,
    result: &SolveResult,
) -> Result<Vec<ResidualDefect>> {
    if result.iterates.len() != result.history.len() || result.iterates.is_empty() {
        return Err(GspError::MissingHistory);
    }
    let beta1 = sys.rhs_dual_norm(n_pre)?;
    let a_norm = sys.a().frobenius_norm();
    let mut out = Vec::with_capacity(result.history.len());
    for (record, it) in result.history.iter().zip(&result.iterates) {
        let r = sys.second_residual(&it.u, &it.p)?;
        let explicit = n_pre.dual_norm(&r)?;
        let estimate = record.beta_next * record.scalar.abs();
        let (top, _) = sys.apply(&it.u, &it.p)?;
        let orthogonality = result.right_basis.as_ref().map(|qs| {
            qs.iter()
                .take(it.k)
                .map(|q| dot(&r, q).abs())
                .fold(0.0, f64::max)
        });
        out.push(ResidualDefect {
            k: it.k,
            explicit,
            estimate,
            defect: (explicit - estimate).abs() / beta1,
            upper_block: norm2(&top),
            upper_scale: a_norm * norm2(&it.p),
            orthogonality,
        });
    }
    Ok(out)
}

/// Recomputes the second-block residual of every retained iterate and compares
/// it with the recursive estimate `β_{k+1}|ζ_k|`.
pub fn craig_residual_check(
    sys: &SaddleSystem,
    n_pre: &SpdPreconditioner,
    result: &SolveResult,
) -> Result<Vec<ResidualDefect>> {
    residual_defects(sys, n_pre, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::SparseMatrix;

    fn hand_system() -> SaddleSystem {
        let m = SparseMatrix::identity(2);
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        SaddleSystem::new(m, a, SparseMatrix::identity(1), vec![1.0]).unwrap()
    }

    #[test]
    fn hand_instance_terminates_exactly() {
        let sys = hand_system();
        let n = SpdPreconditioner::identity(1);
        let cfg = SolverConfig::default().with_iterates(true);
        let res = craig_solve(&sys, &n, &cfg).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.termination, Termination::ExactTermination);
        let rec = res.history[0];
        assert!((rec.alpha - 3f64.sqrt()).abs() < 1e-15);
        assert!((rec.scalar - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(rec.beta_next.abs() < 1e-15);
        assert!((res.u[0] - 1.0 / 3.0).abs() < 1e-15 && (res.u[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((res.p[0] + 1.0 / 3.0).abs() < 1e-15);

        let defects = craig_residual_check(&sys, &n, &res).unwrap();
        assert!(defects[0].explicit < 1e-15 && defects[0].estimate < 1e-15);
    }

    #[test]
    fn error_estimate_examples() {
        assert_eq!(craig_error_estimate(&[1.0], 1, 1).unwrap(), 1.0);
        assert_eq!(craig_error_estimate(&[1.0, 1.0], 2, 1).unwrap(), 0.5);
        assert_eq!(craig_error_estimate(&[3.0, 4.0], 2, 2).unwrap(), 1.0);
        assert!(matches!(
            craig_error_estimate(&[1.0], 1, 2),
            Err(GspError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn rejects_zero_rhs_and_nonsymmetric() {
        let sys = hand_system().with_rhs(vec![0.0]).unwrap();
        let n = SpdPreconditioner::identity(1);
        assert!(matches!(
            craig_solve(&sys, &n, &SolverConfig::default()),
            Err(GspError::ZeroRhs)
        ));

        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 0.5), (1, 0, -0.5), (1, 1, 1.0)])
            .unwrap();
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let ns = SaddleSystem::new(m, a, SparseMatrix::identity(1), vec![1.0]).unwrap();
        assert!(matches!(
            craig_solve(&ns, &n, &SolverConfig::default()),
            Err(GspError::WrongSolver { .. })
        ));
    }

    #[test]
    fn residual_check_needs_iterates() {
        let sys = hand_system();
        let n = SpdPreconditioner::identity(1);
        let res = craig_solve(&sys, &n, &SolverConfig::default()).unwrap();
        assert!(matches!(
            craig_residual_check(&sys, &n, &res),
            Err(GspError::MissingHistory)
        ));
    }

    #[test]
    fn zero_column_in_a_with_zero_c_breaks_down() {
        // A q₁ = 0 and C = 0 give α₁ = 0.
        let m = SparseMatrix::identity(2);
        let a = SparseMatrix::from_triplets(2, 1, &[]).unwrap();
        let sys = SaddleSystem::new(m, a, SparseMatrix::zeros(1, 1), vec![1.0]).unwrap();
        let n = SpdPreconditioner::identity(1);
        assert!(matches!(
            craig_solve(&sys, &n, &SolverConfig::default()),
            Err(GspError::Breakdown { what: "alpha", .. })
        ));
    }
}
