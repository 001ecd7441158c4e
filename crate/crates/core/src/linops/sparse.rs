use crate::error::{GspError, Result};
use crate::linops::DenseMatrix;

/// Real matrix in compressed sparse row layout.
///
/// Column indices are strictly increasing within each row, so duplicate
/// `(row, col)` entries cannot be represented. Stored values may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating every layout invariant.
    pub fn try_from_csr(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(GspError::InvalidInput(format!(
                "row offsets have length {}, expected {}",
                row_offsets.len(),
                rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(GspError::InvalidInput(
                "row offsets must start at 0 and end at the number of stored values".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(GspError::InvalidInput(
                "column index and value arrays differ in length".into(),
            ));
        }
        for i in 0..rows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if start > end {
                return Err(GspError::InvalidInput(format!(
                    "row offsets decrease at row {i}"
                )));
            }
            let row = &col_indices[start..end];
            for (pos, &j) in row.iter().enumerate() {
                if j >= cols {
                    return Err(GspError::InvalidInput(format!(
                        "column index {j} out of range in row {i}"
                    )));
                }
                if pos > 0 && row[pos - 1] >= j {
                    return Err(GspError::InvalidInput(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets. Repeated positions are summed,
    /// which is the usual finite-difference assembly convention.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(GspError::InvalidInput(format!(
                    "triplet ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_indices.push(j);
            values.push(v);
            row_offsets[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::try_from_csr(rows, cols, row_offsets, col_indices, values)
    }

    /// Keeps every entry whose magnitude exceeds `drop_below` (use 0.0 to keep all nonzeros).
    pub fn from_dense(dense: &DenseMatrix, drop_below: f64) -> Self {
        let mut row_offsets = Vec::with_capacity(dense.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..dense.rows() {
            for j in 0..dense.cols() {
                let v = dense[(i, j)];
                if v.abs() > drop_below {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Stored entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Value at `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `A x`, accumulated per row in ascending column order.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(GspError::DimensionMismatch(format!(
                "matvec: matrix has {} columns, vector has length {}",
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
        Ok(y)
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(GspError::DimensionMismatch(format!(
                "transpose matvec: matrix has {} rows, vector has length {}",
                self.rows,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                y[self.col_indices[k]] += self.values[k] * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                let dst = next[j];
                col_indices[dst] = i;
                values[dst] = self.values[k];
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut dense = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            dense[(i, j)] = v;
        }
        dense
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|` over stored entries relative to the largest `|a_ij|`.
    pub fn relative_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.relative_asymmetry() <= rel_tol
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, v)| i == j || v == 0.0)
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Entrywise sum of two matrices of the same shape.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(GspError::DimensionMismatch("sparse add: shapes differ".into()));
        }
        let triplets: Vec<_> = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.rows, self.cols, &triplets)
    }

    /// Drops column `col` (and renumbers the ones after it).
    pub fn without_column(&self, col: usize) -> Self {
        let triplets: Vec<_> = self
            .triplets()
            .filter(|&(_, j, _)| j != col)
            .map(|(i, j, v)| (i, if j > col { j - 1 } else { j }, v))
            .collect();
        Self::from_triplets(self.rows, self.cols - 1, &triplets).expect("valid by construction")
    }

    /// Drops row and column `index` of a square matrix.
    pub fn without_row_and_column(&self, index: usize) -> Self {
        let shift = |k: usize| if k > index { k - 1 } else { k };
        let triplets: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| i != index && j != index)
            .map(|(i, j, v)| (shift(i), shift(j), v))
            .collect();
        Self::from_triplets(self.rows - 1, self.cols - 1, &triplets).expect("valid by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(a: f64, b: f64, c: f64, d: f64) -> SparseMatrix {
        SparseMatrix::from_triplets(2, 2, &[(0, 0, a), (0, 1, b), (1, 0, c), (1, 1, d)]).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let id = SparseMatrix::identity(2);
        assert_eq!(id.matvec(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let perm = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(perm.matvec(&[3.0, 4.0]).unwrap(), vec![4.0, 3.0]);
        let a = two_by_two(1.0, 2.0, 3.0, 4.0);
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn transpose_matvec_examples() {
        let id = SparseMatrix::identity(2);
        assert_eq!(id.matvec_transpose(&[5.0, 6.0]).unwrap(), vec![5.0, 6.0]);
        let col = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(col.matvec_transpose(&[1.0, 1.0]).unwrap(), vec![2.0]);
        let a = two_by_two(1.0, 2.0, 3.0, 4.0);
        assert_eq!(a.matvec_transpose(&[1.0, 0.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = two_by_two(1.0, 2.0, 3.0, 4.0);
        assert!(matches!(a.matvec(&[1.0]), Err(GspError::DimensionMismatch(_))));
        assert!(matches!(
            a.matvec_transpose(&[1.0, 2.0, 3.0]),
            Err(GspError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn csr_validation_rejects_bad_layouts() {
        // duplicate column within a row
        assert!(SparseMatrix::try_from_csr(1, 2, vec![0, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
        // column out of range
        assert!(SparseMatrix::try_from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        // decreasing offsets
        assert!(SparseMatrix::try_from_csr(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        // last offset must equal nnz
        assert!(SparseMatrix::try_from_csr(1, 2, vec![0, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn triplet_duplicates_are_summed() {
        let a = SparseMatrix::from_triplets(2, 2, &[(1, 1, 1.0), (0, 0, 2.0), (1, 1, 0.5)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 1), 1.5);
    }

    #[test]
    fn pinning_drops_row_and_column() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 4.0), (2, 0, 4.0)],
        )
        .unwrap();
        let b = a.without_row_and_column(0);
        assert_eq!(b.rows(), 2);
        assert_eq!(b.get(0, 0), 2.0);
        assert_eq!(b.get(1, 1), 3.0);
        assert_eq!(b.nnz(), 2);
        let c = a.without_column(1);
        assert_eq!(c.cols(), 2);
        assert_eq!(c.get(0, 1), 4.0);
    }
}
