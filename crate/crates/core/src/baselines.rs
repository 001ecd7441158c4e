//! Comparison solvers.
//!
//! Schur complement reduction with inner preconditioned CG or FOM on
//! `S p = −b`, `S = AᵀM⁻¹A + C`, followed by `u = −M⁻¹Ap`; MINRES and GMRES
//! on the full system preconditioned by `blkdiag(M, N)`; a dense direct solve.
//! All start from zero.

use std::time::Instant;

use crate::craig::BREAKDOWN_TOL;
use crate::error::{GspError, Result};
use crate::gkb::mgs;
use crate::linops::{axpy, dense_solve, dot, norm2, DenseMatrix, FactorizedOperator, SpdPreconditioner};
use crate::system::{ConvergenceRecord, FiredCriterion, Iterate, SaddleSystem, SolveResult, SolverConfig, Termination};

/// `S = AᵀM⁻¹A + C`, applied through the factorization of `M`.
#[derive(Debug, Clone, Copy)]
pub struct SchurOperator<'a> {
    sys: &'a SaddleSystem,
}

impl<'a> SchurOperator<'a> {
    pub fn new(sys: &'a SaddleSystem) -> Self {
        Self { sys }
    }

    pub fn dim(&self) -> usize {
        self.sys.n()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.sys.schur_apply(x)
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        self.sys.schur_dense()
    }
}

/// `D₀ = blkdiag(M, N)`.
#[derive(Debug, Clone, Copy)]
pub struct BlockDiagPreconditioner<'a> {
    m: &'a FactorizedOperator,
    n: &'a SpdPreconditioner,
}

impl<'a> BlockDiagPreconditioner<'a> {
    pub fn new(m: &'a FactorizedOperator, n: &'a SpdPreconditioner) -> Self {
        Self { m, n }
    }

    pub fn dim(&self) -> usize {
        self.m.dim() + self.n.dim()
    }

    /// `D₀⁻¹ [x; y]`.
    pub fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.m.dim();
        if x.len() != self.dim() {
            return Err(GspError::DimensionMismatch(format!(
                "block preconditioner of dimension {}, vector length {}",
                self.dim(),
                x.len()
            )));
        }
        let mut out = self.m.solve(&x[..m])?;
        out.extend(self.n.solve(&x[m..])?);
        Ok(out)
    }

    /// `D₀ [x; y]`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.m.dim();
        let mut out = self.m.apply(&x[..m])?;
        out.extend(self.n.apply(&x[m..])?);
        Ok(out)
    }
}

fn record(k: usize, relative_residual: f64, start: &Instant) -> ConvergenceRecord {
    ConvergenceRecord {
        k,
        relative_residual,
        error_estimate: None,
        alpha: f64::NAN,
        beta_next: f64::NAN,
        scalar: f64::NAN,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Shared stopping logic for the baselines: exact termination, then the
/// relative residual test, then the iteration cap.
fn verdict(rel: f64, k: usize, cfg: &SolverConfig) -> Option<(Termination, Option<FiredCriterion>)> {
    if rel <= BREAKDOWN_TOL {
        Some((Termination::ExactTermination, None))
    } else if rel < cfg.tolerance {
        Some((Termination::Converged, Some(FiredCriterion::RelativeResidual)))
    } else if k >= cfg.max_iterations {
        Some((Termination::MaxIterations, None))
    } else {
        None
    }
}

fn check_rhs(sys: &SaddleSystem, n_pre: &SpdPreconditioner) -> Result<f64> {
    if n_pre.dim() != sys.n() {
        return Err(GspError::DimensionMismatch(format!(
            "preconditioner has dimension {}, system has n = {}",
            n_pre.dim(),
            sys.n()
        )));
    }
    if norm2(sys.b()) == 0.0 {
        return Err(GspError::ZeroRhs);
    }
    sys.rhs_dual_norm(n_pre)
}

/// Preconditioned CG on `S p = −b` with preconditioner `N`, then `u = −M⁻¹Ap`.
///
/// Stops on `‖−b − Sp‖_{N⁻¹} / ‖b‖_{N⁻¹} < tol`.
pub fn scr_cg_solve(sys: &SaddleSystem, n_pre: &SpdPreconditioner, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if !sys.is_symmetric() {
        return Err(GspError::WrongSolver { solver: "scr-cg" });
    }
    let beta1 = check_rhs(sys, n_pre)?;
    let start = Instant::now();
    let schur = SchurOperator::new(sys);
    let n = sys.n();

    let mut p = vec![0.0; n];
    let mut r: Vec<f64> = sys.b().iter().map(|v| -v).collect();
    let mut z = n_pre.solve(&r)?;
    let mut d = z.clone();
    let mut rho = dot(&r, &z);
    let mut history = Vec::new();
    let mut iterates = Vec::new();
    let mut k = 0;

    let (termination, fired) = loop {
        k += 1;
        let sd = schur.apply(&d)?;
        let curvature = dot(&d, &sd);
        if !(curvature > 0.0) {
            return Err(GspError::Breakdown {
                k,
                what: "CG curvature",
                value: curvature,
            });
        }
        let step = rho / curvature;
        axpy(step, &d, &mut p);
        axpy(-step, &sd, &mut r);
        z = n_pre.solve(&r)?;
        let rho_next = dot(&r, &z);
        let rel = rho_next.max(0.0).sqrt() / beta1;
        history.push(record(k, rel, &start));
        if cfg.keep_iterates {
            iterates.push(Iterate {
                k,
                u: sys.velocity_from_pressure(&p)?,
                p: p.clone(),
            });
        }
        if let Some(v) = verdict(rel, k, cfg) {
            break v;
        }
        let ratio = rho_next / rho;
        rho = rho_next;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + ratio * *di;
        }
    };

    let u = sys.velocity_from_pressure(&p)?;
    Ok(SolveResult {
        u,
        p,
        iterations: k,
        termination,
        fired,
        history,
        iterates,
        right_basis: None,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// FOM on `S p = −b` with Arnoldi on `N⁻¹S` in the `N` inner product
/// (modified Gram-Schmidt), then `u = −M⁻¹Ap`.
///
/// The residual `‖−b − Sp_k‖_{N⁻¹} = h_{k+1,k} |e_kᵀy_k|` is monitored each step.
pub fn scr_fom_solve(sys: &SaddleSystem, n_pre: &SpdPreconditioner, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let beta1 = check_rhs(sys, n_pre)?;
    let start = Instant::now();
    let schur = SchurOperator::new(sys);
    let n = sys.n();

    let minus_b: Vec<f64> = sys.b().iter().map(|v| -v).collect();
    let q1: Vec<f64> = n_pre.solve(&minus_b)?.iter().map(|v| v / beta1).collect();
    let mut nq = vec![n_pre.apply(&q1)?];
    let mut q = vec![q1];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut history = Vec::new();
    let mut iterates = Vec::new();

    let assemble = |q: &[Vec<f64>], y: &[f64]| {
        let mut p = vec![0.0; n];
        for (yj, qj) in y.iter().zip(q) {
            axpy(*yj, qj, &mut p);
        }
        p
    };

    let (termination, fired, y) = loop {
        let k = q.len();
        let mut w = n_pre.solve(&schur.apply(&q[k - 1])?)?;
        let mut h = mgs(&mut w, &q, &nq, cfg.reorthogonalize);
        let h_next = n_pre.norm(&w)?;
        h.push(h_next);
        columns.push(h);

        let hk = square_hessenberg(&columns);
        let mut rhs = vec![0.0; k];
        rhs[0] = beta1;
        let y = dense_solve(&hk, &rhs).map_err(|e| match e {
            GspError::Singular { pivot, .. } => GspError::Breakdown {
                k,
                what: "FOM hessenberg pivot",
                value: pivot,
            },
            other => other,
        })?;
        let rel = h_next * y[k - 1].abs() / beta1;
        history.push(record(k, rel, &start));
        if cfg.keep_iterates {
            let p = assemble(&q, &y);
            iterates.push(Iterate {
                k,
                u: sys.velocity_from_pressure(&p)?,
                p,
            });
        }
        let exact = h_next <= BREAKDOWN_TOL * beta1;
        if exact {
            break (Termination::ExactTermination, None, y);
        }
        if let Some((t, f)) = verdict(rel, k, cfg) {
            break (t, f, y);
        }
        let q_next: Vec<f64> = w.iter().map(|v| v / h_next).collect();
        nq.push(n_pre.apply(&q_next)?);
        q.push(q_next);
    };

    let p = assemble(&q, &y);
    let u = sys.velocity_from_pressure(&p)?;
    Ok(SolveResult {
        u,
        p,
        iterations: q.len(),
        termination,
        fired,
        history,
        iterates,
        right_basis: Some(q),
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Leading `k×k` block of the Hessenberg matrix whose column `j` is `columns[j]`
/// (length `j+2`, the last entry being the subdiagonal).
fn square_hessenberg(columns: &[Vec<f64>]) -> DenseMatrix {
    let k = columns.len();
    let mut h = DenseMatrix::zeros(k, k);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate().take(k) {
            h[(i, j)] = v;
        }
    }
    h
}

fn full_rhs(sys: &SaddleSystem) -> Vec<f64> {
    let mut rhs = vec![0.0; sys.m()];
    rhs.extend_from_slice(sys.b());
    rhs
}

fn full_apply(sys: &SaddleSystem, x: &[f64]) -> Result<Vec<f64>> {
    let m = sys.m();
    let (mut top, bottom) = sys.apply(&x[..m], &x[m..])?;
    top.extend(bottom);
    Ok(top)
}

fn split(sys: &SaddleSystem, x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut u = x;
    let p = u.split_off(sys.m());
    (u, p)
}

/// Preconditioned MINRES on the full system with `D₀ = blkdiag(M, N)`.
///
/// The history holds `‖res‖_{D₀⁻¹} / ‖[0; b]‖_{D₀⁻¹}`, which is nonincreasing.
pub fn pminres_solve(sys: &SaddleSystem, n_pre: &SpdPreconditioner, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if !sys.is_symmetric() {
        return Err(GspError::WrongSolver { solver: "pminres" });
    }
    check_rhs(sys, n_pre)?;
    let start = Instant::now();
    let pre = BlockDiagPreconditioner::new(sys.m_factor(), n_pre);
    let dim = sys.m() + sys.n();

    let mut x = vec![0.0; dim];
    let mut v_prev = vec![0.0; dim];
    let mut v = full_rhs(sys);
    let mut z = pre.solve(&v)?;
    let mut gamma = dot(&z, &v).sqrt();
    let gamma1 = gamma;
    let mut gamma_prev = 1.0;
    let mut eta = gamma;
    let (mut s_prev, mut s) = (0.0, 0.0);
    let (mut c_prev, mut c) = (1.0, 1.0);
    let mut w_prev = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    let mut history = Vec::new();
    let mut iterates = Vec::new();
    let mut k = 0;

    let (termination, fired) = loop {
        k += 1;
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        let kz = full_apply(sys, &z)?;
        let delta = dot(&kz, &z);
        let mut v_next = kz;
        axpy(-delta / gamma, &v, &mut v_next);
        axpy(-gamma / gamma_prev, &v_prev, &mut v_next);
        let z_next = pre.solve(&v_next)?;
        let radicand = dot(&z_next, &v_next);
        if radicand < -1e-12 * dot(&v_next, &v_next).max(f64::MIN_POSITIVE) {
            return Err(GspError::NegativeRadicand { value: radicand });
        }
        let gamma_next = radicand.max(0.0).sqrt();

        let a0 = c * delta - c_prev * s * gamma;
        let a1 = (a0 * a0 + gamma_next * gamma_next).sqrt();
        let a2 = s * delta + c_prev * c * gamma;
        let a3 = s_prev * gamma;
        if !(a1 > 0.0) {
            return Err(GspError::Breakdown {
                k,
                what: "MINRES rotation",
                value: a1,
            });
        }
        let c_next = a0 / a1;
        let s_next = gamma_next / a1;
        let mut w_next = z.clone();
        axpy(-a3, &w_prev, &mut w_next);
        axpy(-a2, &w, &mut w_next);
        for wi in w_next.iter_mut() {
            *wi /= a1;
        }
        axpy(c_next * eta, &w_next, &mut x);
        eta *= -s_next;

        let rel = eta.abs() / gamma1;
        history.push(record(k, rel, &start));
        if cfg.keep_iterates {
            let (u, p) = split(sys, x.clone());
            iterates.push(Iterate { k, u, p });
        }
        let exact = gamma_next <= BREAKDOWN_TOL * gamma1;
        if exact {
            break (Termination::ExactTermination, None);
        }
        if let Some(v) = verdict(rel, k, cfg) {
            break v;
        }

        v_prev = std::mem::replace(&mut v, v_next);
        z = z_next;
        gamma_prev = gamma;
        gamma = gamma_next;
        s_prev = s;
        s = s_next;
        c_prev = c;
        c = c_next;
        w_prev = std::mem::replace(&mut w, w_next);
    };

    let (u, p) = split(sys, x);
    Ok(SolveResult {
        u,
        p,
        iterations: k,
        termination,
        fired,
        history,
        iterates,
        right_basis: None,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Unrestarted right-preconditioned GMRES on the full system with
/// `D₀ = blkdiag(M, N)`, modified Gram-Schmidt Arnoldi and Givens rotations.
///
/// The history holds `‖[0; b] − K x_k‖₂ / ‖b‖₂`.
pub fn pgmres_solve(sys: &SaddleSystem, n_pre: &SpdPreconditioner, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_rhs(sys, n_pre)?;
    let start = Instant::now();
    let pre = BlockDiagPreconditioner::new(sys.m_factor(), n_pre);
    let dim = sys.m() + sys.n();

    let rhs = full_rhs(sys);
    let beta = norm2(&rhs);
    let mut basis = vec![rhs.iter().map(|v| v / beta).collect::<Vec<f64>>()];
    // Columns of the rotated upper triangular factor.
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut history = Vec::new();
    let mut iterates = Vec::new();

    let solution = |basis: &[Vec<f64>], r_cols: &[Vec<f64>], g: &[f64]| -> Result<Vec<f64>> {
        let k = r_cols.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut v = g[i];
            for j in i + 1..k {
                v -= r_cols[j][i] * y[j];
            }
            y[i] = v / r_cols[i][i];
        }
        let mut t = vec![0.0; dim];
        for (yj, vj) in y.iter().zip(basis) {
            axpy(*yj, vj, &mut t);
        }
        pre.solve(&t)
    };

    let (termination, fired) = loop {
        let k = basis.len();
        let mut w = full_apply(sys, &pre.solve(&basis[k - 1])?)?;
        let passes = if cfg.reorthogonalize { 2 } else { 1 };
        let mut h = vec![0.0; k + 1];
        for _ in 0..passes {
            for (j, vj) in basis.iter().enumerate() {
                let c = dot(vj, &w);
                axpy(-c, vj, &mut w);
                h[j] += c;
            }
        }
        let h_next = norm2(&w);
        h[k] = h_next;

        for j in 0..k - 1 {
            let (a, b) = (h[j], h[j + 1]);
            h[j] = cs[j] * a + sn[j] * b;
            h[j + 1] = -sn[j] * a + cs[j] * b;
        }
        let (a, b) = (h[k - 1], h[k]);
        let rad = a.hypot(b);
        if !(rad > 0.0) {
            return Err(GspError::Breakdown {
                k,
                what: "GMRES rotation",
                value: rad,
            });
        }
        let (c, s) = (a / rad, b / rad);
        cs.push(c);
        sn.push(s);
        h[k - 1] = rad;
        h[k] = 0.0;
        let gk = g[k - 1];
        g[k - 1] = c * gk;
        g.push(-s * gk);
        h.truncate(k);
        r_cols.push(h);

        let rel = g[k].abs() / beta;
        history.push(record(k, rel, &start));
        if cfg.keep_iterates {
            let (u, p) = split(sys, solution(&basis, &r_cols, &g)?);
            iterates.push(Iterate { k, u, p });
        }
        if h_next <= BREAKDOWN_TOL * beta {
            break (Termination::ExactTermination, None);
        }
        if let Some(v) = verdict(rel, k, cfg) {
            break v;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    };

    let (u, p) = split(sys, solution(&basis, &r_cols, &g)?);
    Ok(SolveResult {
        u,
        p,
        iterations: r_cols.len(),
        termination,
        fired,
        history,
        iterates,
        right_basis: None,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Dense LU solve of the full `(m+n)×(m+n)` system.
pub fn direct_solve(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    sys.direct_solve()
}

/// `‖[0; b] − K[u; p]‖₂ / ‖b‖₂`, the unpreconditioned full-system residual.
pub fn full_relative_residual(sys: &SaddleSystem, u: &[f64], p: &[f64]) -> Result<f64> {
    let (top, bottom) = sys.apply(u, p)?;
    let res: f64 = top
        .iter()
        .map(|v| v * v)
        .chain(bottom.iter().zip(sys.b()).map(|(v, b)| (b - v) * (b - v)))
        .sum();
    Ok(res.sqrt() / norm2(sys.b()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::SparseMatrix;

    fn hand() -> SaddleSystem {
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        SaddleSystem::new(SparseMatrix::identity(2), a, SparseMatrix::identity(1), vec![1.0]).unwrap()
    }

    fn close(x: &[f64], y: &[f64], tol: f64) -> bool {
        x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol)
    }

    #[test]
    fn all_baselines_solve_the_hand_instance() {
        let sys = hand();
        let n = SpdPreconditioner::identity(1);
        let cfg = SolverConfig::default().with_tolerance(1e-12);
        let want_u = [1.0 / 3.0, 1.0 / 3.0];
        let want_p = [-1.0 / 3.0];
        for solve in [scr_cg_solve, scr_fom_solve, pminres_solve, pgmres_solve] {
            let res = solve(&sys, &n, &cfg).unwrap();
            assert!(res.termination.is_success(), "{:?}", res.termination);
            assert!(res.iterations <= 3);
            assert!(close(&res.u, &want_u, 1e-10), "{:?}", res.u);
            assert!(close(&res.p, &want_p, 1e-10), "{:?}", res.p);
        }
        let cg = scr_cg_solve(&sys, &n, &cfg).unwrap();
        assert_eq!(cg.iterations, 1);
        let (u, p) = direct_solve(&sys).unwrap();
        assert!(close(&u, &want_u, 1e-15) && close(&p, &want_p, 1e-15));
    }

    #[test]
    fn symmetric_only_solvers_reject_nonsymmetric_m() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 0.5), (1, 0, -0.5), (1, 1, 1.0)])
            .unwrap();
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let sys = SaddleSystem::new(m, a, SparseMatrix::identity(1), vec![1.0]).unwrap();
        let n = SpdPreconditioner::identity(1);
        let cfg = SolverConfig::default();
        assert!(matches!(scr_cg_solve(&sys, &n, &cfg), Err(GspError::WrongSolver { .. })));
        assert!(matches!(pminres_solve(&sys, &n, &cfg), Err(GspError::WrongSolver { .. })));
        let fom = scr_fom_solve(&sys, &n, &cfg).unwrap();
        assert!((fom.p[0] + 1.0 / 2.6).abs() < 1e-14);
        let gm = pgmres_solve(&sys, &n, &cfg.with_tolerance(1e-12)).unwrap();
        assert!((gm.p[0] + 1.0 / 2.6).abs() < 1e-10);
    }

    #[test]
    fn block_preconditioner_round_trip() {
        let sys = hand();
        let n = SpdPreconditioner::diagonal(vec![4.0]).unwrap();
        let pre = BlockDiagPreconditioner::new(sys.m_factor(), &n);
        let x = [1.0, 2.0, 3.0];
        let back = pre.apply(&pre.solve(&x).unwrap()).unwrap();
        assert!(close(&back, &x, 1e-15));
        assert!(pre.solve(&[1.0]).is_err());
    }

    #[test]
    fn orthogonal_a_converges_fast_in_minres() {
        // M = N = I, A square orthogonal, C = O: the preconditioned matrix has eigenvalues in {1, (1±√5)/2}.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, s), (0, 1, s), (1, 0, s), (1, 1, -s)]).unwrap();
        let sys = SaddleSystem::new(SparseMatrix::identity(2), a, SparseMatrix::zeros(2, 2), vec![1.0, 2.0])
            .unwrap();
        let n = SpdPreconditioner::identity(2);
        let res = pminres_solve(&sys, &n, &SolverConfig::default().with_tolerance(1e-10)).unwrap();
        assert!(res.iterations <= 3, "{}", res.iterations);
    }
}
