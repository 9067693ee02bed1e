use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::OpCounter;

/// Column-major dense real matrix. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major `data`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidArgument(format!("{rows}x{cols} overflows")))?;
        check_len("dense matrix data", len, data.len())?;
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, handy for writing small literals.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_len("row-major data", rows * cols, data.len())?;
        let mut out = Vec::with_capacity(data.len());
        for j in 0..cols {
            for i in 0..rows {
                out.push(data[i * cols + j]);
            }
        }
        Self::new(rows, cols, out)
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            check_len(&format!("column {j}"), rows, c.len())?;
            data.extend_from_slice(c);
        }
        Self::new(rows, columns.len(), data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.cols).map(move |j| self.col(j))
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for &j in indices {
            data.extend_from_slice(self.col(j));
        }
        DenseMatrix {
            rows: self.rows,
            cols: indices.len(),
            data,
        }
    }

    /// Appends a column. The caller guarantees finiteness.
    pub(crate) fn push_column(&mut self, column: &[f64]) {
        debug_assert_eq!(column.len(), self.rows);
        self.data.extend_from_slice(column);
        self.cols += 1;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self` (or its transpose) times `v`.
    ///
    /// Each output entry is accumulated sequentially from zero in ascending
    /// index order, so results are reproducible bit for bit.
    pub fn matvec(&self, v: &[f64], transpose: bool, ctr: &mut OpCounter) -> Result<Vec<f64>> {
        if transpose {
            check_len("dense matvec (transposed) input", self.rows, v.len())?;
            let out = self.columns().map(|c| dot(c, v)).collect();
            ctr.mul_add(self.rows * self.cols);
            Ok(out)
        } else {
            check_len("dense matvec input", self.cols, v.len())?;
            let mut out = vec![0.0; self.rows];
            for (c, &s) in self.columns().zip(v) {
                axpy(s, c, &mut out);
            }
            ctr.mul_add(self.rows * self.cols);
            Ok(out)
        }
    }

    /// `selfᵀ · other`, column by column.
    pub fn transpose_mul(&self, other: &DenseMatrix, ctr: &mut OpCounter) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "transpose_mul: {} rows vs {} rows",
                self.rows, other.rows
            )));
        }
        let mut data = Vec::with_capacity(self.cols * other.cols);
        for b in other.columns() {
            for a in self.columns() {
                data.push(dot(a, b));
            }
        }
        ctr.mul_add(self.rows * self.cols * other.cols);
        Ok(DenseMatrix {
            rows: self.cols,
            cols: other.cols,
            data,
        })
    }

    /// `self - other`, entrywise.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "sub: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

/// Free-function form of [`DenseMatrix::matvec`].
pub fn dense_matvec(
    m: &DenseMatrix,
    v: &[f64],
    transpose: bool,
    ctr: &mut OpCounter,
) -> Result<Vec<f64>> {
    m.matvec(v, transpose, ctr)
}

/// ℓ2 norm of every column. Zero columns yield zero.
pub fn column_norms(m: &DenseMatrix) -> Vec<f64> {
    m.columns().map(norm2).collect()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec() {
        let mut ctr = OpCounter::new();
        let out = DenseMatrix::identity(2).matvec(&[3.0, 4.0], false, &mut ctr).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
        assert_eq!(ctr.multiplications, 4);
    }

    #[test]
    fn two_by_two() {
        // [[1,2],[3,4]] stored column-major
        let m = DenseMatrix::new(2, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let mut ctr = OpCounter::new();
        assert_eq!(m.matvec(&[1.0, 1.0], false, &mut ctr).unwrap(), vec![3.0, 7.0]);
        assert_eq!(m.matvec(&[1.0, 1.0], true, &mut ctr).unwrap(), vec![4.0, 6.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = DenseMatrix::zeros(3, 2);
        let mut ctr = OpCounter::new();
        assert!(matches!(
            m.matvec(&[1.0; 3], false, &mut ctr),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            m.matvec(&[1.0; 2], true, &mut ctr),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn constructor_rejects_non_finite() {
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(column_norms(&DenseMatrix::identity(2)), vec![1.0, 1.0]);
        let m = DenseMatrix::new(2, 2, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(column_norms(&m), vec![5.0, 0.0]);
    }

    #[test]
    fn row_major_literal() {
        let m = DenseMatrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.col(2), &[3.0, 6.0]);
    }
}
