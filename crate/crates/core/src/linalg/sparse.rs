use std::ops::Range;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{DenseMatrix, OpCounter};

/// Compressed sparse-column matrix.
///
/// `col_ptr[j]..col_ptr[j + 1]` indexes the stored entries of column `j`;
/// row indices are strictly increasing within a column and stored values are
/// never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len("col_ptr", cols + 1, col_ptr.len())?;
        check_len("values", row_idx.len(), values.len())?;
        if col_ptr[0] != 0 {
            return Err(Error::InvalidSparse("col_ptr[0] must be 0".into()));
        }
        if col_ptr[cols] != row_idx.len() {
            return Err(Error::InvalidSparse(format!(
                "col_ptr[{cols}] = {} but nnz = {}",
                col_ptr[cols],
                row_idx.len()
            )));
        }
        if let Some(j) = col_ptr.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSparse(format!("col_ptr decreases at column {j}")));
        }
        for j in 0..cols {
            let (a, b) = (col_ptr[j], col_ptr[j + 1]);
            let rows_j = &row_idx[a..b];
            if let Some(&r) = rows_j.iter().find(|&&r| r >= rows) {
                return Err(Error::InvalidSparse(format!(
                    "row index {r} out of range in column {j}"
                )));
            }
            if rows_j.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSparse(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
        }
        check_finite(&values)?;
        if let Some(k) = values.iter().position(|&v| v == 0.0) {
            return Err(Error::InvalidSparse(format!("explicit zero stored at entry {k}")));
        }
        Ok(Self {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from per-column `(row, value)` lists. Entries are sorted by row;
    /// zero values are dropped and duplicate rows rejected.
    pub fn from_columns(rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let cols = columns.len();
        let mut col_ptr = Vec::with_capacity(cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut entries in columns {
            entries.retain(|&(_, v)| v != 0.0);
            entries.sort_by_key(|&(r, _)| r);
            for (r, v) in entries {
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self::new(rows, cols, col_ptr, row_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let columns = m
            .columns()
            .map(|c| c.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        Self::from_columns(m.rows(), columns).expect("dense matrix entries are finite")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for j in 0..self.cols {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                data[j * self.rows + r] = v;
            }
        }
        DenseMatrix::new(self.rows, self.cols, data).expect("finite by invariant")
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
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    #[inline]
    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// `self · v` (or `selfᵀ · v`), touching stored entries only.
    pub fn matvec(&self, v: &[f64], transpose: bool, ctr: &mut OpCounter) -> Result<Vec<f64>> {
        if transpose {
            check_len("sparse matvec (transposed) input", self.rows, v.len())?;
            let mut out = vec![0.0; self.cols];
            self.transpose_matvec_into(0..self.cols, v, &mut out, ctr);
            Ok(out)
        } else {
            check_len("sparse matvec input", self.cols, v.len())?;
            let mut out = vec![0.0; self.rows];
            self.accumulate_columns(0..self.cols, v, &mut out, ctr);
            Ok(out)
        }
    }

    /// `acc += self[:, range] · x_chunk`, where `x_chunk` holds the entries of
    /// `x` for `range`. Columns are visited in ascending order, so chaining
    /// calls over consecutive ranges reproduces a full product exactly.
    pub fn accumulate_columns(
        &self,
        range: Range<usize>,
        x_chunk: &[f64],
        acc: &mut [f64],
        ctr: &mut OpCounter,
    ) {
        debug_assert_eq!(range.len(), x_chunk.len());
        let start = range.start;
        let mut touched = 0;
        for j in range {
            let xj = x_chunk[j - start];
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                acc[r] += v * xj;
            }
            touched += rows.len();
        }
        ctr.mul_add(touched);
    }

    /// `out[k] = self[:, range.start + k] · p` for every column in `range`.
    pub fn transpose_matvec_into(
        &self,
        range: Range<usize>,
        p: &[f64],
        out: &mut [f64],
        ctr: &mut OpCounter,
    ) {
        debug_assert_eq!(range.len(), out.len());
        let start = range.start;
        let mut touched = 0;
        for j in range {
            let (rows, vals) = self.col(j);
            let mut s = 0.0;
            for (&r, &v) in rows.iter().zip(vals) {
                s += v * p[r];
            }
            out[j - start] = s;
            touched += rows.len();
        }
        ctr.mul_add(touched);
    }

    /// Stored entries in the column range.
    pub fn range_nnz(&self, range: Range<usize>) -> usize {
        self.col_ptr[range.end] - self.col_ptr[range.start]
    }
}

/// Free-function form of [`SparseColMatrix::matvec`].
pub fn sparse_matvec(
    v: &SparseColMatrix,
    x: &[f64],
    transpose: bool,
    ctr: &mut OpCounter,
) -> Result<Vec<f64>> {
    v.matvec(x, transpose, ctr)
}

impl DenseMatrix {
    /// `self · s`, used to reconstruct `D·V`.
    pub fn mul_sparse(&self, s: &SparseColMatrix, ctr: &mut OpCounter) -> Result<DenseMatrix> {
        if self.cols() != s.rows() {
            return Err(Error::DimensionMismatch(format!(
                "mul_sparse: {} columns vs {} rows",
                self.cols(),
                s.rows()
            )));
        }
        let m = self.rows();
        let mut data = vec![0.0; m * s.cols()];
        for j in 0..s.cols() {
            let (rows, vals) = s.col(j);
            let out = &mut data[j * m..(j + 1) * m];
            for (&r, &v) in rows.iter().zip(vals) {
                super::axpy(v, self.col(r), out);
            }
            ctr.mul_add(m * rows.len());
        }
        DenseMatrix::new(m, s.cols(), data)
    }
}
