//! Exact dense factorizations used to apply M⁻¹ and N⁻¹, plus the SPSD
//! splitting `C = EᵀFE` used by the augmented-form oracles.

use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::linops::{DenseMatrix, SparseMatrix};

/// Largest dimension densified for an exact factorization.
pub const DENSE_LIMIT: usize = 5000;

/// Relative tolerance used for symmetry checks on stored entries.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    CholeskySpd,
    LuGeneral,
    Diagonal,
}

#[derive(Debug, Clone)]
enum Factor {
    /// Lower triangular `L` with `K = L Lᵀ`.
    Cholesky(DenseMatrix),
    /// Packed unit-lower `L` and upper `U` with `P K = L U`.
    Lu(DenseMatrix),
    Diagonal(Vec<f64>),
}

/// A square operator together with an exact factorization, so that both
/// `apply(x) = K x` and `solve(b) = K⁻¹ b` are available.
#[derive(Debug, Clone)]
pub struct FactorizedOperator {
    dim: usize,
    kind: FactorKind,
    matrix: Option<DenseMatrix>,
    factor: Factor,
    permutation: Vec<usize>,
}

impl FactorizedOperator {
    pub fn from_sparse(kind: FactorKind, k: &SparseMatrix) -> Result<Self> {
        if !k.is_square() {
            return Err(GspError::DimensionMismatch(format!(
                "factorize: matrix is {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        if kind == FactorKind::Diagonal {
            if !k.is_diagonal() {
                return Err(GspError::InvalidInput(
                    "diagonal factorization of a matrix with off-diagonal entries".into(),
                ));
            }
            return Self::diagonal(k.diagonal_values());
        }
        if kind == FactorKind::CholeskySpd {
            let asym = k.relative_asymmetry();
            if asym > SYMMETRY_TOL {
                return Err(GspError::NotSymmetric { asymmetry: asym });
            }
        }
        if k.rows() > DENSE_LIMIT {
            return Err(GspError::TooLarge {
                dim: k.rows(),
                limit: DENSE_LIMIT,
            });
        }
        Self::from_dense(kind, &k.to_dense())
    }

    pub fn from_dense(kind: FactorKind, k: &DenseMatrix) -> Result<Self> {
        if k.rows() != k.cols() {
            return Err(GspError::DimensionMismatch(format!(
                "factorize: matrix is {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        if k.rows() > DENSE_LIMIT {
            return Err(GspError::TooLarge {
                dim: k.rows(),
                limit: DENSE_LIMIT,
            });
        }
        if k.values().iter().any(|v| v.is_nan()) {
            return Err(GspError::NotANumber("factorize"));
        }
        match kind {
            FactorKind::Diagonal => {
                let n = k.rows();
                for j in 0..n {
                    for i in 0..n {
                        if i != j && k[(i, j)] != 0.0 {
                            return Err(GspError::InvalidInput(
                                "diagonal factorization of a matrix with off-diagonal entries"
                                    .into(),
                            ));
                        }
                    }
                }
                Self::diagonal((0..n).map(|i| k[(i, i)]).collect())
            }
            FactorKind::CholeskySpd => {
                let asym = k.relative_asymmetry();
                if asym > SYMMETRY_TOL {
                    return Err(GspError::NotSymmetric { asymmetry: asym });
                }
                let lower = cholesky(k)?;
                Ok(Self {
                    dim: k.rows(),
                    kind,
                    matrix: Some(k.clone()),
                    factor: Factor::Cholesky(lower),
                    permutation: (0..k.rows()).collect(),
                })
            }
            FactorKind::LuGeneral => {
                let (packed, permutation) = lu(k)?;
                Ok(Self {
                    dim: k.rows(),
                    kind,
                    matrix: Some(k.clone()),
                    factor: Factor::Lu(packed),
                    permutation,
                })
            }
        }
    }

    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if let Some((index, &pivot)) = diag.iter().enumerate().find(|(_, d)| **d == 0.0) {
            return Err(GspError::Singular { index, pivot });
        }
        if diag.iter().any(|v| v.is_nan()) {
            return Err(GspError::NotANumber("factorize"));
        }
        Ok(Self {
            dim: diag.len(),
            kind: FactorKind::Diagonal,
            matrix: None,
            permutation: (0..diag.len()).collect(),
            factor: Factor::Diagonal(diag),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Diagonal entries when the operator is of the diagonal kind.
    pub fn diagonal_entries(&self) -> Option<&[f64]> {
        match &self.factor {
            Factor::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    /// The factorized matrix in dense form.
    pub fn to_dense(&self) -> DenseMatrix {
        match (&self.matrix, &self.factor) {
            (Some(m), _) => m.clone(),
            (None, Factor::Diagonal(d)) => DenseMatrix::from_diagonal(d),
            _ => unreachable!("non-diagonal factors always keep their matrix"),
        }
    }

    fn check_len(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dim {
            return Err(GspError::DimensionMismatch(format!(
                "{what}: operator dimension {}, vector length {}",
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// `K x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x, "apply")?;
        match (&self.matrix, &self.factor) {
            (_, Factor::Diagonal(d)) => Ok(d.iter().zip(x).map(|(a, b)| a * b).collect()),
            (Some(m), _) => m.matvec(x),
            _ => unreachable!(),
        }
    }

    /// `K⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b, "solve")?;
        let n = self.dim;
        match &self.factor {
            Factor::Diagonal(d) => Ok(b.iter().zip(d).map(|(x, di)| x / di).collect()),
            Factor::Cholesky(l) => {
                let mut y = b.to_vec();
                // L y = b
                for j in 0..n {
                    y[j] /= l[(j, j)];
                    let yj = y[j];
                    for i in j + 1..n {
                        y[i] -= l[(i, j)] * yj;
                    }
                }
                // Lᵀ x = y
                for i in (0..n).rev() {
                    let col = l.column(i);
                    let mut acc = y[i];
                    for k in i + 1..n {
                        acc -= col[k] * y[k];
                    }
                    y[i] = acc / l[(i, i)];
                }
                Ok(y)
            }
            Factor::Lu(packed) => {
                let mut y: Vec<f64> = self.permutation.iter().map(|&p| b[p]).collect();
                for j in 0..n {
                    let yj = y[j];
                    if yj != 0.0 {
                        for i in j + 1..n {
                            y[i] -= packed[(i, j)] * yj;
                        }
                    }
                }
                for j in (0..n).rev() {
                    y[j] /= packed[(j, j)];
                    let yj = y[j];
                    if yj != 0.0 {
                        for i in 0..j {
                            y[i] -= packed[(i, j)] * yj;
                        }
                    }
                }
                Ok(y)
            }
        }
    }
}

fn cholesky(k: &DenseMatrix) -> Result<DenseMatrix> {
    let n = k.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = k[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d <= 0.0 || d.is_nan() {
            return Err(GspError::NotSpd { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = k[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Gaussian elimination with partial pivoting; returns packed factors and the row permutation.
fn lu(k: &DenseMatrix) -> Result<(DenseMatrix, Vec<usize>)> {
    let n = k.rows();
    let mut a = k.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let tiny = f64::EPSILON * (n.max(1) as f64) * k.max_abs();
    for j in 0..n {
        let (p, pivot) = (j..n)
            .map(|i| (i, a[(i, j)]))
            .fold((j, 0.0f64), |best, cur| if cur.1.abs() > best.1.abs() { cur } else { best });
        if pivot.abs() <= tiny || pivot == 0.0 {
            return Err(GspError::Singular { index: j, pivot });
        }
        if p != j {
            perm.swap(p, j);
            for c in 0..n {
                let tmp = a[(p, c)];
                a[(p, c)] = a[(j, c)];
                a[(j, c)] = tmp;
            }
        }
        for i in j + 1..n {
            a[(i, j)] /= pivot;
        }
        for c in j + 1..n {
            let ajc = a[(j, c)];
            if ajc == 0.0 {
                continue;
            }
            for i in j + 1..n {
                let lij = a[(i, j)];
                a[(i, c)] -= lij * ajc;
            }
        }
    }
    Ok((a, perm))
}

/// Factorizes a sparse square matrix with the requested kind.
pub fn factorize(kind: FactorKind, k: &SparseMatrix) -> Result<FactorizedOperator> {
    FactorizedOperator::from_sparse(kind, k)
}

/// Dense LU solve of a general square system, used by the direct oracle.
pub fn dense_solve(k: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    FactorizedOperator::from_dense(FactorKind::LuGeneral, k)?.solve(b)
}

/// The SPD weight `N` defining the right-space inner products.
#[derive(Debug, Clone)]
pub struct SpdPreconditioner {
    op: FactorizedOperator,
}

impl SpdPreconditioner {
    pub fn identity(n: usize) -> Self {
        Self {
            op: FactorizedOperator::diagonal(vec![1.0; n]).expect("identity is nonsingular"),
        }
    }

    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if let Some((index, &pivot)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(GspError::NotSpd { index, pivot });
        }
        Ok(Self {
            op: FactorizedOperator::diagonal(diag)?,
        })
    }

    /// Diagonal input takes the diagonal fast path; anything else is Cholesky-factorized.
    pub fn from_sparse(n: &SparseMatrix) -> Result<Self> {
        if n.is_square() && n.is_diagonal() {
            return Self::diagonal(n.diagonal_values());
        }
        Ok(Self {
            op: FactorizedOperator::from_sparse(FactorKind::CholeskySpd, n)?,
        })
    }

    pub fn from_operator(op: FactorizedOperator) -> Result<Self> {
        match op.kind() {
            FactorKind::LuGeneral => Err(GspError::InvalidInput(
                "preconditioner must be Cholesky or diagonal".into(),
            )),
            FactorKind::Diagonal => Self::diagonal(op.diagonal_entries().unwrap().to_vec()),
            FactorKind::CholeskySpd => Ok(Self { op }),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &FactorizedOperator {
        &self.op
    }

    /// `N x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.op.apply(x)
    }

    /// `N⁻¹ x`.
    pub fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.op.solve(x)
    }

    /// ‖x‖_N
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        weighted_norm(&self.op, x)
    }

    /// ‖x‖_{N⁻¹}
    pub fn dual_norm(&self, x: &[f64]) -> Result<f64> {
        let y = self.solve(x)?;
        clamp_radicand(crate::linops::dot(x, &y), x)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.op.to_dense()
    }
}

/// Anything that can play the role of `W` in `xᵀ W y`.
pub trait WeightOperator {
    fn weight_dim(&self) -> usize;
    fn weight_apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl WeightOperator for SparseMatrix {
    fn weight_dim(&self) -> usize {
        if self.is_square() {
            self.rows()
        } else {
            usize::MAX
        }
    }

    fn weight_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matvec(x)
    }
}

impl WeightOperator for FactorizedOperator {
    fn weight_dim(&self) -> usize {
        self.dim()
    }

    fn weight_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(x)
    }
}

impl WeightOperator for SpdPreconditioner {
    fn weight_dim(&self) -> usize {
        self.dim()
    }

    fn weight_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(x)
    }
}

/// `xᵀ W y`.
pub fn weighted_inner<W: WeightOperator + ?Sized>(w: &W, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = w.weight_dim();
    if x.len() != n || y.len() != n {
        return Err(GspError::DimensionMismatch(format!(
            "weighted inner product: weight dimension {n}, vectors {} and {}",
            x.len(),
            y.len()
        )));
    }
    if crate::linops::has_nan(x) || crate::linops::has_nan(y) {
        return Err(GspError::NotANumber("weighted inner product"));
    }
    let wy = w.weight_apply(y)?;
    Ok(crate::linops::dot(x, &wy))
}

/// `sqrt(xᵀ W x)`, clamping round-off negatives to zero.
pub fn weighted_norm<W: WeightOperator + ?Sized>(w: &W, x: &[f64]) -> Result<f64> {
    clamp_radicand(weighted_inner(w, x, x)?, x)
}

fn clamp_radicand(value: f64, x: &[f64]) -> Result<f64> {
    if value >= 0.0 {
        return Ok(value.sqrt());
    }
    let floor = -1e-12 * crate::linops::dot(x, x);
    if value >= floor {
        Ok(0.0)
    } else {
        Err(GspError::NegativeRadicand { value })
    }
}

/// Result of splitting an SPSD `C` as `EᵀFE` with `F` SPD.
#[derive(Debug, Clone)]
pub struct SpsdFactors {
    /// l × n
    pub e: DenseMatrix,
    /// l × l diagonal, positive
    pub f: DenseMatrix,
    pub rank: usize,
}

/// Splits `C = EᵀFE` through a dense symmetric eigendecomposition, keeping the
/// eigenpairs with `λ > rank_tol · λ_max`. Eigenvalues come out in descending
/// order and each eigenvector is signed so its largest-magnitude entry is positive.
pub fn spsd_factor(c: &SparseMatrix, rank_tol: f64) -> Result<SpsdFactors> {
    if !c.is_square() {
        return Err(GspError::DimensionMismatch("spsd_factor: C must be square".into()));
    }
    let asym = c.relative_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(GspError::NotSymmetric { asymmetry: asym });
    }
    let n = c.rows();
    let mut dense = c.to_dense();
    // exact symmetrization so the eigensolver sees a symmetric input
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (dense[(i, j)] + dense[(j, i)]);
            dense[(i, j)] = avg;
            dense[(j, i)] = avg;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(dense.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = order.first().map_or(0.0, |&i| eig.eigenvalues[i].max(0.0));

    if let Some(&last) = order.last() {
        let lowest = eig.eigenvalues[last];
        if lowest < -rank_tol * lambda_max || (lambda_max == 0.0 && lowest < 0.0) {
            return Err(GspError::NotSpsd { eigenvalue: lowest });
        }
    }

    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| lambda_max > 0.0 && eig.eigenvalues[i] > rank_tol * lambda_max)
        .collect();
    let rank = kept.len();
    let mut e = DenseMatrix::zeros(rank, n);
    let mut f = DenseMatrix::zeros(rank, rank);
    for (row, &idx) in kept.iter().enumerate() {
        let vec = eig.eigenvectors.column(idx);
        let pivot = vec
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() + 1e-14 { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            e[(row, j)] = sign * vec[j];
        }
        f[(row, row)] = eig.eigenvalues[idx];
    }
    Ok(SpsdFactors { e, f, rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::norm2;

    fn sparse(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&DenseMatrix::from_rows(rows), 0.0)
    }

    #[test]
    fn diagonal_solve() {
        let op = factorize(FactorKind::Diagonal, &SparseMatrix::diagonal(&[2.0, 4.0])).unwrap();
        assert_eq!(op.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn cholesky_solve() {
        let op = factorize(FactorKind::CholeskySpd, &sparse(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let x = op.solve(&[4.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let err = factorize(FactorKind::CholeskySpd, &sparse(&[&[1.0, 2.0], &[2.0, 1.0]]));
        assert!(matches!(err, Err(GspError::NotSpd { .. })));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let err = factorize(FactorKind::CholeskySpd, &sparse(&[&[2.0, 1.0], &[0.0, 2.0]]));
        assert!(matches!(err, Err(GspError::NotSymmetric { .. })));
    }

    #[test]
    fn lu_solve_and_singular() {
        let k = sparse(&[&[0.0, 1.0], &[2.0, 1.0]]);
        let op = factorize(FactorKind::LuGeneral, &k).unwrap();
        let x = op.solve(&[1.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let singular = sparse(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            factorize(FactorKind::LuGeneral, &singular),
            Err(GspError::Singular { .. })
        ));
    }

    #[test]
    fn weighted_inner_examples() {
        let id = SparseMatrix::identity(2);
        assert_eq!(weighted_inner(&id, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);
        let w = SparseMatrix::diagonal(&[2.0, 3.0]);
        assert_eq!(weighted_inner(&w, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 5.0);
        let w = FactorizedOperator::diagonal(vec![4.0]).unwrap();
        assert_eq!(weighted_inner(&w, &[1.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(weighted_norm(&w, &[1.0]).unwrap(), 2.0);
    }

    #[test]
    fn weighted_inner_errors() {
        let id = SparseMatrix::identity(2);
        assert!(matches!(
            weighted_inner(&id, &[1.0], &[1.0, 1.0]),
            Err(GspError::DimensionMismatch(_))
        ));
        assert!(matches!(
            weighted_inner(&id, &[f64::NAN, 1.0], &[1.0, 1.0]),
            Err(GspError::NotANumber(_))
        ));
    }

    #[test]
    fn negative_radicand_is_clamped_or_rejected() {
        let tiny = SparseMatrix::diagonal(&[-1e-14]);
        assert_eq!(weighted_norm(&tiny, &[1.0]).unwrap(), 0.0);
        let neg = SparseMatrix::diagonal(&[-1.0]);
        assert!(matches!(
            weighted_norm(&neg, &[1.0]),
            Err(GspError::NegativeRadicand { .. })
        ));
    }

    #[test]
    fn spsd_factor_examples() {
        let f = spsd_factor(&SparseMatrix::diagonal(&[2.0, 0.0]), 1e-12).unwrap();
        assert_eq!(f.rank, 1);
        assert!((f.f[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((f.e[(0, 0)] - 1.0).abs() < 1e-14 && f.e[(0, 1)].abs() < 1e-14);

        let f = spsd_factor(&SparseMatrix::identity(2), 1e-12).unwrap();
        assert_eq!(f.rank, 2);
        let rebuilt = f.e.transpose().matmul(&f.f).unwrap().matmul(&f.e).unwrap();
        assert!(rebuilt.sub(&DenseMatrix::identity(2)).unwrap().frobenius_norm() < 1e-14);

        let ones = sparse(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let f = spsd_factor(&ones, 1e-12).unwrap();
        assert_eq!(f.rank, 1);
        assert!((f.f[(0, 0)] - 2.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        assert!((f.e[(0, 0)] - s).abs() < 1e-14 && (f.e[(0, 1)] - s).abs() < 1e-14);
    }

    #[test]
    fn spsd_factor_rejects_indefinite_and_asymmetric() {
        let indefinite = sparse(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(spsd_factor(&indefinite, 1e-12), Err(GspError::NotSpsd { .. })));
        let asym = sparse(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(spsd_factor(&asym, 1e-12), Err(GspError::NotSymmetric { .. })));
        let zero = spsd_factor(&SparseMatrix::zeros(3, 3), 1e-12).unwrap();
        assert_eq!(zero.rank, 0);
    }

    #[test]
    fn preconditioner_norms() {
        let n = SpdPreconditioner::diagonal(vec![4.0, 1.0]).unwrap();
        assert_eq!(n.norm(&[1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(n.dual_norm(&[2.0, 0.0]).unwrap(), 1.0);
        assert!(SpdPreconditioner::diagonal(vec![1.0, 0.0]).is_err());
        let full = SpdPreconditioner::from_sparse(&sparse(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert_eq!(full.operator().kind(), FactorKind::CholeskySpd);
        let x = full.solve(&full.apply(&[0.3, -0.7]).unwrap()).unwrap();
        assert!(norm2(&crate::linops::sub(&x, &[0.3, -0.7])) < 1e-15);
    }
}
