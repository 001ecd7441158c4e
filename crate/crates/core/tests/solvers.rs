use nalgebra::DMatrix;

use gsp_core::baselines::{direct_solve, full_relative_residual, pgmres_solve, scr_cg_solve, scr_fom_solve};
use gsp_core::craig::{craig_error_estimate, craig_residual_check, craig_solve};
use gsp_core::gkb::{gkb_nonsymmetric, gkb_symmetric, verify_decomposition, AugmentedSystem};
use gsp_core::linops::{dot, norm2, relative_difference, DenseMatrix};
use gsp_core::nscraig::{nscraig_error_estimate, nscraig_residual_check, nscraig_solve, nscraig_solve_with_state};
use gsp_core::problems::{gen_random, schur_diagonal_preconditioner, RandomSpec};
use gsp_core::{SaddleSystem, SolverConfig, SparseMatrix, SpdPreconditioner, StoppingCriterion, Termination};

fn nal(d: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(d.rows(), d.cols(), d.values())
}

fn random(m: usize, n: usize, c_rank: usize, skew: f64, seed: u64) -> SaddleSystem {
    gen_random(&RandomSpec {
        m,
        n,
        c_rank,
        skew_strength: skew,
        seed,
        ..RandomSpec::default()
    })
    .unwrap()
}

fn sorted_eigs(m: DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut e: Vec<(f64, f64)> = m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    e.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    e
}

#[test]
fn symmetric_gkb_full_length_on_8x4() {
    let sys = random(8, 4, 2, 0.0, 21);
    let n = SpdPreconditioner::identity(4);
    let aug = AugmentedSystem::from_saddle(&sys, 1e-12).unwrap();
    let (basis, factors) = gkb_symmetric(&aug, &n, 4, false).unwrap();
    assert!(factors.betas[4] <= 1e-9 * factors.betas[0]);
    let report = verify_decomposition(&aug, &n, &basis, &factors, true).unwrap();
    assert!(report.left_identity <= 1e-10 && report.right_identity <= 1e-10, "{report:?}");
    assert!(report.projection <= 1e-9, "{report:?}");
}

#[test]
fn nonsymmetric_gkb_on_symmetric_m_reduces_to_symmetric() {
    let sys = random(10, 5, 3, 0.0, 22);
    let n = schur_diagonal_preconditioner(&sys).unwrap();
    let aug = AugmentedSystem::from_saddle(&sys, 1e-12).unwrap();
    let (_, sym) = gkb_symmetric(&aug, &n, 5, true).unwrap();
    let (_, ns) = gkb_nonsymmetric(&aug, &n, 5, true).unwrap();
    for (a, b) in sym.alphas.iter().zip(&ns.alphas) {
        assert!((a - b).abs() <= 1e-10 * a.abs());
    }
    let lower = ns.lower.clone().unwrap();
    let l_defect = nal(&lower) - DMatrix::identity(5, 5);
    assert!(l_defect.norm() <= 1e-10, "L − I = {:e}", l_defect.norm());
    let h = nal(&ns.h_matrix().unwrap());
    let bt = nal(&sym.b_matrix()).transpose();
    assert!((h - &bt).norm() <= 1e-10 * bt.norm());
}

#[test]
fn nonsymmetric_gkb_hb_has_the_preconditioned_schur_spectrum() {
    let sys = random(8, 4, 2, 0.5, 23);
    let diag = [1.0, 2.0, 0.5, 3.0];
    let n = SpdPreconditioner::diagonal(diag.to_vec()).unwrap();
    let aug = AugmentedSystem::from_saddle(&sys, 1e-12).unwrap();
    let (_, f) = gkb_nonsymmetric(&aug, &n, 4, true).unwrap();
    let hb = nal(&f.h_matrix().unwrap()) * nal(&f.b_matrix());
    let s = nal(&aug.schur_dense().unwrap());
    let ninv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, diag.iter().map(|d| 1.0 / d)));
    let reference = &ninv * s;
    let scale = reference.norm();
    for (a, b) in sorted_eigs(hb).iter().zip(&sorted_eigs(reference)) {
        assert!((a.0 - b.0).abs() <= 1e-8 * scale && (a.1 - b.1).abs() <= 1e-8 * scale, "{a:?} vs {b:?}");
    }
}

#[test]
fn perturbed_basis_is_reported() {
    let sys = random(9, 3, 2, 0.0, 24);
    let n = SpdPreconditioner::identity(3);
    let aug = AugmentedSystem::from_saddle(&sys, 1e-12).unwrap();
    let (mut basis, factors) = gkb_symmetric(&aug, &n, 3, true).unwrap();
    let clean = verify_decomposition(&aug, &n, &basis, &factors, true).unwrap();
    assert!(clean.worst_identity() <= 1e-10 && clean.q_orthogonality <= 1e-10);
    for x in basis.q[1].iter_mut() {
        *x *= 1.01;
    }
    let bad = verify_decomposition(&aug, &n, &basis, &factors, true).unwrap();
    // ‖1.01² − 1‖ = 2.01e-2 on one diagonal entry of QᵀNQ − I
    assert!((bad.q_orthogonality - 0.0201).abs() < 1e-3, "{}", bad.q_orthogonality);
}

#[test]
fn craig_with_zero_c_matches_direct_solve() {
    let sys = random(8, 4, 0, 0.0, 25);
    let n = SpdPreconditioner::identity(4);
    let cfg = SolverConfig::default().with_tolerance(1e-14);
    let r = craig_solve(&sys, &n, &cfg).unwrap();
    let (u, p) = direct_solve(&sys).unwrap();
    assert!(relative_difference(&r.u, &u) <= 1e-9);
    assert!(relative_difference(&r.p, &p) <= 1e-9);
}

#[test]
fn corrupted_zeta_is_detected() {
    let sys = random(20, 8, 4, 0.0, 26);
    let n = schur_diagonal_preconditioner(&sys).unwrap();
    let cfg = SolverConfig::default().with_iterates(true);
    let mut r = craig_solve(&sys, &n, &cfg).unwrap();
    for d in craig_residual_check(&sys, &n, &r).unwrap() {
        assert!(d.defect <= 1e-8);
    }
    let beta1 = sys.rhs_dual_norm(&n).unwrap();
    r.history[2].scalar *= 2.0;
    let defects = craig_residual_check(&sys, &n, &r).unwrap();
    let expected = r.history[2].beta_next * r.history[2].scalar.abs() / 2.0 / beta1;
    assert!((defects[2].defect - expected).abs() <= 1e-8 * expected.max(1.0));
    assert!(defects[2].defect > 1e-6);
}

#[test]
fn nscraig_tight_tolerance_residual() {
    let sys = random(12, 5, 2, 0.5, 27);
    let n = schur_diagonal_preconditioner(&sys).unwrap();
    let cfg = SolverConfig::default().with_tolerance(1e-12).with_iterates(true);
    let r = nscraig_solve(&sys, &n, &cfg).unwrap();
    assert!(r.termination.is_success());
    let beta1 = sys.rhs_dual_norm(&n).unwrap();
    let res = sys.second_residual(&r.u, &r.p).unwrap();
    let explicit = n.dual_norm(&res).unwrap() / beta1;
    assert!(explicit <= 1e-10, "{explicit:e}");
    let estimate = r.history.last().unwrap().relative_residual;
    assert!((explicit - estimate).abs() <= 1e-8);
}

#[test]
fn nscraig_on_symmetric_input_matches_craig_diagnostics() {
    let sys = random(16, 6, 3, 0.0, 28);
    let n = schur_diagonal_preconditioner(&sys).unwrap();
    let cfg = SolverConfig::default().with_iterates(true).with_reorthogonalization(true);
    let a = craig_residual_check(&sys, &n, &craig_solve(&sys, &n, &cfg).unwrap()).unwrap();
    let b = nscraig_residual_check(&sys, &n, &nscraig_solve(&sys, &n, &cfg).unwrap()).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x.defect - y.defect).abs() <= 1e-10);
        assert!((x.estimate - y.estimate).abs() <= 1e-10 * x.estimate.max(1e-300) + 1e-14);
    }
}

#[test]
fn nscraig_estimate_reduces_to_craig_on_symmetric_input() {
    let sys = random(16, 6, 3, 0.0, 29);
    let n = SpdPreconditioner::identity(6);
    let cfg = SolverConfig::default().with_tolerance(1e-10).with_reorthogonalization(true);
    let craig = craig_solve(&sys, &n, &cfg).unwrap();
    let (_, state) = nscraig_solve_with_state(&sys, &n, &cfg).unwrap();
    let lower = state.factors(state.k).lower_factor();
    let zetas: Vec<f64> = craig.history.iter().map(|h| h.scalar).collect();
    for (c, z) in state.chis.iter().zip(&zetas) {
        assert!((c - z).abs() <= 1e-10 * z.abs());
    }
    let k = state.k.min(zetas.len());
    let a = craig_error_estimate(&zetas, k, 2).unwrap();
    let b = nscraig_error_estimate(&state.chis, &lower, k, 2).unwrap();
    assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300));
}

/// Plain CG on `AᵀM⁻¹A x = −b`, written out against dense matrices.
fn textbook_cg(s: &DMatrix<f64>, b: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let n = b.len();
    let mut x = nalgebra::DVector::zeros(n);
    let mut r = -nalgebra::DVector::from_column_slice(b);
    let mut d = r.clone();
    let mut out = Vec::new();
    for _ in 0..steps {
        let sd = s * &d;
        let rr = r.dot(&r);
        let a = rr / d.dot(&sd);
        x += &d * a;
        r -= sd * a;
        d = &r + d * (r.dot(&r) / rr);
        out.push(x.iter().copied().collect());
    }
    out
}

#[test]
fn scr_cg_with_zero_c_matches_textbook_cg() {
    let sys = random(20, 8, 0, 0.0, 30);
    let n = SpdPreconditioner::identity(8);
    let cfg = SolverConfig::default().with_tolerance(1e-10).with_iterates(true);
    let r = scr_cg_solve(&sys, &n, &cfg).unwrap();
    let oracle = textbook_cg(&nal(&sys.schur_dense().unwrap()), sys.b(), r.iterations);
    for (it, x) in r.iterates.iter().zip(&oracle) {
        assert!(relative_difference(&it.p, x) <= 1e-10, "k = {}", it.k);
    }
}

#[test]
fn fom_matches_nscraig_and_cg() {
    let sys = random(20, 8, 3, 0.5, 31);
    let n = schur_diagonal_preconditioner(&sys).unwrap();
    let cfg = SolverConfig::default().with_tolerance(1e-10).with_iterates(true);
    let fom = scr_fom_solve(&sys, &n, &cfg).unwrap();
    let ns = nscraig_solve(&sys, &n, &cfg).unwrap();
    for (a, b) in fom.iterates.iter().zip(&ns.iterates) {
        assert!(relative_difference(&a.p, &b.p) <= 1e-9);
    }

    let sym = random(20, 8, 3, 0.0, 32);
    let n = schur_diagonal_preconditioner(&sym).unwrap();
    let fom = scr_fom_solve(&sym, &n, &cfg).unwrap();
    let cg = scr_cg_solve(&sym, &n, &cfg).unwrap();
    for (a, b) in fom.iterates.iter().zip(&cg.iterates) {
        assert!(relative_difference(&a.p, &b.p) <= 1e-9);
    }
}

#[test]
fn fom_on_eigenvector_rhs_takes_one_step() {
    let sys = random(10, 4, 2, 0.0, 33);
    let n = SpdPreconditioner::identity(4);
    let s = nal(&sys.schur_dense().unwrap());
    let eig = s.symmetric_eigen();
    let b: Vec<f64> = eig.eigenvectors.column(0).iter().copied().collect();
    let sys = sys.into_rhs(b).unwrap();
    let r = scr_fom_solve(&sys, &n, &SolverConfig::default().with_tolerance(1e-10)).unwrap();
    assert_eq!(r.iterations, 1);
    let (u, p) = direct_solve(&sys).unwrap();
    assert!(sys.relative_error(&r.u, &r.p, (&u, &p)) <= 1e-10);
}

#[test]
fn gmres_on_three_unknowns_needs_at_most_three_steps() {
    let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 0.3), (1, 0, -0.3), (1, 1, 1.0)]).unwrap();
    let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
    let c = SparseMatrix::from_triplets(1, 1, &[(0, 0, 0.5)]).unwrap();
    let sys = SaddleSystem::new(m, a, c, vec![1.0]).unwrap();
    let n = SpdPreconditioner::identity(1);
    let r = pgmres_solve(&sys, &n, &SolverConfig::default().with_tolerance(1e-12)).unwrap();
    assert!(r.iterations <= 3);
    assert!(full_relative_residual(&sys, &r.u, &r.p).unwrap() <= 1e-10);
}

#[test]
fn direct_solve_residual_on_random_instance() {
    let sys = random(40, 15, 7, 0.5, 34);
    let (u, p) = direct_solve(&sys).unwrap();
    assert!(full_relative_residual(&sys, &u, &p).unwrap() <= 1e-10);
}

#[test]
fn max_iterations_and_error_estimate_stopping() {
    let sys = random(60, 30, 10, 0.0, 35);
    let n = schur_diagonal_preconditioner(&sys).unwrap();
    let capped = craig_solve(&sys, &n, &SolverConfig::default().with_tolerance(1e-30).with_max_iterations(5)).unwrap();
    assert_eq!(capped.termination, Termination::MaxIterations);
    assert_eq!(capped.iterations, 5);
    assert_eq!(capped.history.len(), 5);

    let cfg = SolverConfig::default()
        .with_tolerance(1e-6)
        .with_criterion(StoppingCriterion::ErrorEstimate { delay: 3 });
    let r = craig_solve(&sys, &n, &cfg).unwrap();
    assert_eq!(r.termination, Termination::Converged);
    let last = r.history.last().unwrap();
    assert!(last.error_estimate.unwrap().abs() < 1e-6);
    assert!(r.history[..2].iter().all(|h| h.error_estimate.is_none()));
    // The estimate lags the true error by the delay, so the true error is
    // at the level of the estimate a few steps back.
    let (u, p) = direct_solve(&sys).unwrap();
    let eu: Vec<f64> = u.iter().zip(&r.u).map(|(a, b)| a - b).collect();
    let ep: Vec<f64> = p.iter().zip(&r.p).map(|(a, b)| a - b).collect();
    let rel = (sys.energy(&eu, &ep).unwrap() / sys.energy(&u, &p).unwrap()).sqrt();
    assert!(rel < 1e-4, "{rel:e}");
}

#[test]
fn wall_times_are_monotone_and_recorded() {
    let sys = random(30, 10, 5, 0.5, 36);
    let n = SpdPreconditioner::identity(10);
    let r = nscraig_solve(&sys, &n, &SolverConfig::default()).unwrap();
    for w in r.history.windows(2) {
        assert!(w[1].wall_time >= w[0].wall_time);
        assert_eq!(w[1].k, w[0].k + 1);
    }
    assert!(r.solve_seconds >= r.history.last().unwrap().wall_time);
    let _ = (dot(&r.p, &r.p), norm2(&r.u));
}
