//! Problem factories: random instances, a staggered-grid Stokes/Oseen channel,
//! right-hand-side compression, and checks of the standing hypotheses.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::linops::{axpy, DenseMatrix, SparseMatrix, SpdPreconditioner, DENSE_LIMIT};
use crate::system::SaddleSystem;

/// Eigenvalue distribution of the symmetric part of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Spectrum {
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomSpec {
    pub m: usize,
    pub n: usize,
    /// Fraction of nonzeros in `A` and in the skew perturbation of `M`.
    pub density: f64,
    pub spectrum: Spectrum,
    /// 0 gives a symmetric `M`.
    pub skew_strength: f64,
    pub c_rank: usize,
    pub seed: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            m: 8,
            n: 4,
            density: 1.0,
            spectrum: Spectrum::Uniform { lo: 1.0, hi: 2.0 },
            skew_strength: 0.0,
            c_rank: 0,
            seed: 0,
        }
    }
}

impl RandomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.m {
            return Err(GspError::InvalidInput(format!(
                "need 1 <= n <= m, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(GspError::InvalidInput(format!("density must be in (0, 1], got {}", self.density)));
        }
        let Spectrum::Uniform { lo, hi } = self.spectrum;
        if !(lo > 0.0 && hi >= lo) {
            return Err(GspError::InvalidInput(format!("spectrum needs 0 < lo <= hi, got ({lo}, {hi})")));
        }
        if self.c_rank > self.n {
            return Err(GspError::InvalidInput(format!(
                "c_rank {} exceeds n = {}",
                self.c_rank, self.n
            )));
        }
        if !self.skew_strength.is_finite() || self.skew_strength < 0.0 {
            return Err(GspError::InvalidInput("skew_strength must be finite and >= 0".into()));
        }
        if self.m > DENSE_LIMIT {
            return Err(GspError::TooLarge {
                dim: self.m,
                limit: DENSE_LIMIT,
            });
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Exactly symmetric `(X + Xᵀ)/2`.
fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        for i in 0..j {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn sparse_from(x: &DMatrix<f64>) -> SparseMatrix {
    SparseMatrix::from_dense(&DenseMatrix::from_nalgebra(x), 0.0)
}

/// Ratio `σ_min/σ_max` under which `A` counts as rank deficient.
const RANK_TOL: f64 = 1e-8;

fn min_singular_ratio(a: &DMatrix<f64>) -> (f64, f64) {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    (if max > 0.0 { min / max } else { 0.0 }, max)
}

/// Random instance honoring the standing hypotheses. Same seed, same system.
pub fn gen_random(spec: &RandomSpec) -> Result<SaddleSystem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n) = (spec.m, spec.n);
    let Spectrum::Uniform { lo, hi } = spec.spectrum;

    let q = random_orthogonal(m, &mut rng);
    let eig = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |_, _| rng.random_range(lo..=hi)));
    let mut mm = symmetrize(&(&q * eig * q.transpose()));
    if spec.skew_strength > 0.0 {
        let k = DMatrix::from_fn(m, m, |_, _| {
            if rng.random::<f64>() < spec.density {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        mm += (&k - k.transpose()) * spec.skew_strength;
    }

    let mut a = DMatrix::from_fn(m, n, |_, _| {
        if rng.random::<f64>() < spec.density {
            normal(&mut rng)
        } else {
            0.0
        }
    });
    let (ratio, smax) = min_singular_ratio(&a);
    if ratio < RANK_TOL {
        let boost = if smax > 0.0 { smax } else { 1.0 };
        for i in 0..n {
            a[(i, i)] += boost;
        }
        if min_singular_ratio(&a).0 < RANK_TOL {
            return Err(GspError::RankRepair);
        }
    }

    let mut c = DMatrix::zeros(n, n);
    if spec.c_rank > 0 {
        let e = DMatrix::from_fn(spec.c_rank, n, |_, _| normal(&mut rng));
        let d: Vec<f64> = (0..spec.c_rank).map(|_| rng.random_range(0.5..1.5)).collect();
        for j in 0..n {
            for i in 0..=j {
                let v: f64 = (0..spec.c_rank).map(|r| e[(r, i)] * d[r] * e[(r, j)]).sum();
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
    }

    let b: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    SaddleSystem::new(sparse_from(&mm), sparse_from(&a), sparse_from(&c), b)
}

/// Convection field of the Oseen variant, in channel coordinates `(x, y) ∈ [0, L]×[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WindField {
    Uniform { wx: f64, wy: f64 },
    /// `(4s·y(1−y), 0)`
    Poiseuille { strength: f64 },
    /// `s·(2η(1−ξ²), −2ξ(1−η²))` with `ξ = 2x/L − 1`, `η = 2y − 1`.
    Recirculating { strength: f64 },
}

impl WindField {
    pub fn at(&self, x: f64, y: f64, length: f64) -> (f64, f64) {
        match *self {
            Self::Uniform { wx, wy } => (wx, wy),
            Self::Poiseuille { strength } => (4.0 * strength * y * (1.0 - y), 0.0),
            Self::Recirculating { strength } => {
                let xi = 2.0 * x / length - 1.0;
                let eta = 2.0 * y - 1.0;
                (
                    strength * 2.0 * eta * (1.0 - xi * xi),
                    -strength * 2.0 * xi * (1.0 - eta * eta),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StokesSpec {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub viscosity: f64,
    pub gamma: f64,
    pub wind: Option<WindField>,
}

impl Default for StokesSpec {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 16,
            length: 1.0,
            viscosity: 1.0,
            gamma: 0.25,
            wind: None,
        }
    }
}

impl StokesSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(GspError::InvalidInput(format!(
                "need nx, ny >= 2, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.viscosity > 0.0) || !(self.length > 0.0) {
            return Err(GspError::InvalidInput("viscosity and length must be positive".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(GspError::InvalidInput("gamma must be >= 0".into()));
        }
        let m = (self.nx - 1) * self.ny + self.nx * (self.ny - 1);
        if m > DENSE_LIMIT {
            return Err(GspError::TooLarge { dim: m, limit: DENSE_LIMIT });
        }
        Ok(())
    }

    /// `(m, n)` of the discrete system.
    pub fn dimensions(&self) -> (usize, usize) {
        (
            (self.nx - 1) * self.ny + self.nx * (self.ny - 1),
            self.nx * self.ny - 1,
        )
    }
}

/// A generated channel problem with its manufactured solution.
#[derive(Debug, Clone)]
pub struct StokesProblem {
    pub system: SaddleSystem,
    /// Diagonal pressure mass matrix, divided by `ν` when a wind is set.
    pub preconditioner: SpdPreconditioner,
    /// Velocity offset from compressing the first block of the right-hand side.
    pub w0: Vec<f64>,
    /// Exact solution of the compressed system.
    pub exact_u: Vec<f64>,
    pub exact_p: Vec<f64>,
}

struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    fn n_u(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    /// u on the vertical face `x = i·hx`, `i = 1..nx−1`, row `j`.
    fn u_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + (i - 1)
    }

    /// v on the horizontal face `y = j·hy`, `j = 1..ny−1`, column `i`.
    fn v_index(&self, i: usize, j: usize) -> usize {
        self.n_u() + (j - 1) * self.nx + i
    }

    fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Adds `coef·(first-order upwind derivative along the wind)` for one unknown.
fn upwind(
    trip: &mut Vec<(usize, usize, f64)>,
    row: usize,
    wind: (f64, f64),
    h: (f64, f64),
    west: Option<usize>,
    east: Option<usize>,
    south: Option<usize>,
    north: Option<usize>,
    area: f64,
) {
    let (w1, w2) = wind;
    let (hx, hy) = h;
    trip.push((row, row, area * (w1.abs() / hx + w2.abs() / hy)));
    let upstream_x = if w1 > 0.0 { west } else { east };
    if let Some(col) = upstream_x {
        trip.push((row, col, -area * w1.abs() / hx));
    }
    let upstream_y = if w2 > 0.0 { south } else { north };
    if let Some(col) = upstream_y {
        trip.push((row, col, -area * w2.abs() / hy));
    }
}

/// Staggered-grid (MAC) Stokes or Oseen flow in the channel `[0, L]×[0, 1]`.
///
/// Momentum rows are scaled by the cell area, so `M = ν·h_xh_y·(−Δ_h)` (plus
/// upwind convection), `A = h_xh_y·∇_h` and `C = γ·(h_xh_y)²·(−Δ_h)` with
/// Neumann conditions on the pressure. Pressure cell 0 is pinned.
/// The right-hand side comes from a discrete Poiseuille velocity with a
/// linear pressure drop, compressed to the `[0; b]` form.
pub fn gen_stokes_channel(spec: &StokesSpec) -> Result<StokesProblem> {
    spec.validate()?;
    let (nx, ny) = (spec.nx, spec.ny);
    let g = Grid {
        nx,
        ny,
        hx: spec.length / nx as f64,
        hy: 1.0 / ny as f64,
    };
    let (hx, hy) = (g.hx, g.hy);
    let area = hx * hy;
    let nu = spec.viscosity;
    let m = g.n_u() + nx * (ny - 1);
    let cells = nx * ny;

    let mut mt: Vec<(usize, usize, f64)> = Vec::new();
    let (cx, cy) = (nu * area / (hx * hx), nu * area / (hy * hy));

    // u-velocities: Dirichlet in x at i = 0, nx; walls at y = 0, 1 through ghost reflection.
    for j in 0..ny {
        for i in 1..nx {
            let row = g.u_index(i, j);
            let west = (i > 1).then(|| g.u_index(i - 1, j));
            let east = (i < nx - 1).then(|| g.u_index(i + 1, j));
            let south = (j > 0).then(|| g.u_index(i, j - 1));
            let north = (j < ny - 1).then(|| g.u_index(i, j + 1));
            let mut diag = 2.0 * cx + 2.0 * cy;
            for (nb, c) in [(west, cx), (east, cx)] {
                if let Some(col) = nb {
                    mt.push((row, col, -c));
                }
            }
            for nb in [south, north] {
                match nb {
                    Some(col) => mt.push((row, col, -cy)),
                    None => diag += cy,
                }
            }
            mt.push((row, row, diag));
            if let Some(w) = spec.wind {
                let at = w.at(i as f64 * hx, (j as f64 + 0.5) * hy, spec.length);
                upwind(&mut mt, row, at, (hx, hy), west, east, south, north, area);
            }
        }
    }
    // v-velocities: walls at j = 0, ny are on the faces; inlet/outlet through ghost reflection.
    for j in 1..ny {
        for i in 0..nx {
            let row = g.v_index(i, j);
            let west = (i > 0).then(|| g.v_index(i - 1, j));
            let east = (i < nx - 1).then(|| g.v_index(i + 1, j));
            let south = (j > 1).then(|| g.v_index(i, j - 1));
            let north = (j < ny - 1).then(|| g.v_index(i, j + 1));
            let mut diag = 2.0 * cx + 2.0 * cy;
            for nb in [west, east] {
                match nb {
                    Some(col) => mt.push((row, col, -cx)),
                    None => diag += cx,
                }
            }
            for col in [south, north].into_iter().flatten() {
                mt.push((row, col, -cy));
            }
            mt.push((row, row, diag));
            if let Some(w) = spec.wind {
                let at = w.at((i as f64 + 0.5) * hx, j as f64 * hy, spec.length);
                upwind(&mut mt, row, at, (hx, hy), west, east, south, north, area);
            }
        }
    }
    let mmat = SparseMatrix::from_triplets(m, m, &mt)?;

    // A = area · gradient, columns indexed by all cells before pinning.
    let mut at: Vec<(usize, usize, f64)> = Vec::new();
    for j in 0..ny {
        for i in 1..nx {
            let row = g.u_index(i, j);
            at.push((row, g.cell(i, j), area / hx));
            at.push((row, g.cell(i - 1, j), -area / hx));
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let row = g.v_index(i, j);
            at.push((row, g.cell(i, j), area / hy));
            at.push((row, g.cell(i, j - 1), -area / hy));
        }
    }
    let a_full = SparseMatrix::from_triplets(m, cells, &at)?;

    // Neumann pressure Laplacian scaled by γ·area².
    let mut ct: Vec<(usize, usize, f64)> = Vec::new();
    if spec.gamma > 0.0 {
        let (kx, ky) = (spec.gamma * area * area / (hx * hx), spec.gamma * area * area / (hy * hy));
        for j in 0..ny {
            for i in 0..nx {
                let row = g.cell(i, j);
                let mut diag = 0.0;
                let neighbours = [
                    (i > 0).then(|| (g.cell(i.wrapping_sub(1), j), kx)),
                    (i + 1 < nx).then(|| (g.cell(i + 1, j), kx)),
                    (j > 0).then(|| (g.cell(i, j.wrapping_sub(1)), ky)),
                    (j + 1 < ny).then(|| (g.cell(i, j + 1), ky)),
                ];
                for (col, k) in neighbours.into_iter().flatten() {
                    ct.push((row, col, -k));
                    diag += k;
                }
                ct.push((row, row, diag));
            }
        }
    }
    let c_full = SparseMatrix::from_triplets(cells, cells, &ct)?;

    let a = a_full.without_column(0);
    let c = c_full.without_row_and_column(0);

    // Manufactured discrete solution: u = 4y(1−y), v = 0, p = −8ν(x − x₀).
    let mut w_star = vec![0.0; m];
    for j in 0..ny {
        let y = (j as f64 + 0.5) * hy;
        for i in 1..nx {
            w_star[g.u_index(i, j)] = 4.0 * y * (1.0 - y);
        }
    }
    let x0 = 0.5 * hx;
    let p_star: Vec<f64> = (1..cells)
        .map(|cell| {
            let x = ((cell % nx) as f64 + 0.5) * hx;
            -8.0 * nu * (x - x0)
        })
        .collect();

    let mut b1 = mmat.matvec(&w_star)?;
    axpy(1.0, &a.matvec(&p_star)?, &mut b1);
    let mut b2 = a.matvec_transpose(&w_star)?;
    axpy(-1.0, &c.matvec(&p_star)?, &mut b2);

    let (system, w0) = compress_rhs(mmat, a, c, &b1, &b2)?;
    let exact_u: Vec<f64> = w_star.iter().zip(&w0).map(|(w, o)| w - o).collect();

    let scale = if spec.wind.is_some() { area / nu } else { area };
    let preconditioner = SpdPreconditioner::diagonal(vec![scale; cells - 1])?;
    Ok(StokesProblem {
        system,
        preconditioner,
        w0,
        exact_u,
        exact_p: p_star,
    })
}

/// Turns `[[M, A], [Aᵀ, −C]] [w; p] = [b₁; b₂]` into the `[0; b]` form:
/// `w₀ = M⁻¹b₁`, `b = b₂ − Aᵀw₀`, and `w = u + w₀`.
pub fn compress_rhs(
    m: SparseMatrix,
    a: SparseMatrix,
    c: SparseMatrix,
    b1: &[f64],
    b2: &[f64],
) -> Result<(SaddleSystem, Vec<f64>)> {
    if b1.len() != a.rows() {
        return Err(GspError::DimensionMismatch(format!(
            "b1 has length {} but A has {} rows",
            b1.len(),
            a.rows()
        )));
    }
    let sys = SaddleSystem::new(m, a, c, b2.to_vec())?;
    let w0 = sys.m_factor().solve(b1)?;
    let atw = sys.a().matvec_transpose(&w0)?;
    let b: Vec<f64> = b2.iter().zip(&atw).map(|(x, y)| x - y).collect();
    Ok((sys.into_rhs(b)?, w0))
}

/// `w = u + w₀`.
pub fn recover_w(u: &[f64], w0: &[f64]) -> Vec<f64> {
    u.iter().zip(w0).map(|(a, b)| a + b).collect()
}

/// `diag(AᵀM⁻¹A + C)` as a preconditioner, one `M` solve per column.
pub fn schur_diagonal_preconditioner(sys: &SaddleSystem) -> Result<SpdPreconditioner> {
    let n = sys.n();
    let mut diag = Vec::with_capacity(n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        diag.push(sys.schur_apply(&unit)?[j]);
        unit[j] = 0.0;
    }
    SpdPreconditioner::diagonal(diag)
}

/// Dense checks of the standing hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// Smallest eigenvalue of `(M + Mᵀ)/2`.
    pub m_min_eigenvalue: f64,
    /// `σ_min(A)/σ_max(A)`.
    pub a_singular_ratio: f64,
    /// Smallest eigenvalue of `C`, relative to its largest magnitude (0 for `C = O`).
    pub c_min_eigenvalue: f64,
    pub c_rank: usize,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.m_min_eigenvalue > 0.0 && self.a_singular_ratio > RANK_TOL && self.c_min_eigenvalue >= -1e-12
    }
}

pub fn check_hypotheses(sys: &SaddleSystem) -> Result<HypothesisReport> {
    let dim = sys.m().max(sys.n());
    if dim > DENSE_LIMIT {
        return Err(GspError::TooLarge { dim, limit: DENSE_LIMIT });
    }
    let m = sys.m_matrix().to_dense().to_nalgebra();
    let sym = (&m + m.transpose()) * 0.5;
    let m_min_eigenvalue = sym.symmetric_eigenvalues().min();
    let (a_singular_ratio, _) = min_singular_ratio(&sys.a().to_dense().to_nalgebra());
    let c = sys.c().to_dense().to_nalgebra();
    let ceig = symmetrize(&c).symmetric_eigenvalues();
    let cmax = ceig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let (c_min_eigenvalue, c_rank) = if cmax == 0.0 {
        (0.0, 0)
    } else {
        (
            ceig.min() / cmax,
            ceig.iter().filter(|v| **v > 1e-10 * cmax).count(),
        )
    };
    Ok(HypothesisReport {
        m_min_eigenvalue,
        a_singular_ratio,
        c_min_eigenvalue,
        c_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_spec_example() {
        let spec = RandomSpec {
            c_rank: 2,
            seed: 7,
            ..RandomSpec::default()
        };
        let sys = gen_random(&spec).unwrap();
        assert!(sys.is_symmetric());
        let report = check_hypotheses(&sys).unwrap();
        assert!(report.m_min_eigenvalue >= 1.0 - 1e-12);
        assert_eq!(report.c_rank, 2);
        assert!(report.holds());
    }

    #[test]
    fn skew_part_breaks_symmetry_only() {
        let spec = RandomSpec {
            skew_strength: 0.5,
            seed: 3,
            ..RandomSpec::default()
        };
        let sys = gen_random(&spec).unwrap();
        assert!(!sys.is_symmetric());
        assert!(check_hypotheses(&sys).unwrap().m_min_eigenvalue >= 1.0 - 1e-12);
    }

    #[test]
    fn zero_c_rank_gives_zero_c() {
        let sys = gen_random(&RandomSpec::default()).unwrap();
        assert_eq!(sys.c().nnz(), 0);
    }

    #[test]
    fn same_seed_same_system() {
        let spec = RandomSpec {
            m: 12,
            n: 5,
            density: 0.4,
            c_rank: 3,
            skew_strength: 0.2,
            seed: 11,
            ..RandomSpec::default()
        };
        let a = gen_random(&spec).unwrap();
        let b = gen_random(&spec).unwrap();
        assert_eq!(a.m_matrix(), b.m_matrix());
        assert_eq!(a.a(), b.a());
        assert_eq!(a.c(), b.c());
        assert_eq!(a.b(), b.b());
    }

    #[test]
    fn stokes_dimensions_and_gamma_zero() {
        let spec = StokesSpec {
            nx: 4,
            ny: 4,
            gamma: 0.0,
            ..StokesSpec::default()
        };
        assert_eq!(spec.dimensions(), (24, 15));
        let prob = gen_stokes_channel(&spec).unwrap();
        assert_eq!(prob.system.m(), 24);
        assert_eq!(prob.system.n(), 15);
        assert_eq!(prob.system.c().nnz(), 0);
        assert!(prob.system.is_symmetric());
    }

    #[test]
    fn stokes_manufactured_solution() {
        let prob = gen_stokes_channel(&StokesSpec {
            nx: 6,
            ny: 5,
            ..StokesSpec::default()
        })
        .unwrap();
        let (u, p) = prob.system.direct_solve().unwrap();
        let err = prob.system.relative_error(&u, &p, (&prob.exact_u, &prob.exact_p));
        assert!(err < 1e-8, "{err}");
        assert!(check_hypotheses(&prob.system).unwrap().holds());
    }

    #[test]
    fn oseen_is_nonsymmetric_and_positive_definite() {
        let prob = gen_stokes_channel(&StokesSpec {
            nx: 6,
            ny: 6,
            viscosity: 0.1,
            wind: Some(WindField::Recirculating { strength: 1.0 }),
            ..StokesSpec::default()
        })
        .unwrap();
        assert!(!prob.system.is_symmetric());
        assert!(check_hypotheses(&prob.system).unwrap().holds());
    }

    #[test]
    fn compress_hand_example() {
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let (sys, w0) = compress_rhs(
            SparseMatrix::identity(2),
            a,
            SparseMatrix::identity(1),
            &[1.0, 0.0],
            &[2.0],
        )
        .unwrap();
        assert_eq!(w0, vec![1.0, 0.0]);
        assert_eq!(sys.b(), &[1.0]);
        assert_eq!(recover_w(&[0.5, 0.5], &w0), vec![1.5, 0.5]);
    }
}
