//! Desk-scale experiment drivers: tolerance sweeps and storage comparisons.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cssd::{encode_columns, ColumnSelector, CssdConfig, Factorization};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, OpCounter, PivotedQr};
use crate::solvers::{learning_error, power_method, EigenResult, GramOperator, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta_d: f64,
    pub rank: usize,
    pub nnz_v: usize,
    /// `nnz(V) / nnz(A)`.
    pub density_ratio: f64,
    pub achieved_delta: f64,
    /// Relative error of the leading eigenvalues against the full operator.
    pub delta_l: f64,
    pub factored_mults_per_apply: u64,
    pub full_mults_per_apply: u64,
    pub decompose_seconds: f64,
}

/// Decomposes `a` at every tolerance (largest first, resuming the column
/// selection) and scores the leading `num_eigs` eigenvalues of each factored
/// operator against `reference`.
pub fn delta_sweep(
    a: &DenseMatrix,
    deltas: &[f64],
    base: &CssdConfig,
    reference: &EigenResult,
    solver: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one tolerance".into()));
    }
    let mut order = deltas.to_vec();
    order.sort_by(|x, y| y.total_cmp(x));
    order.dedup();
    for &d in &order {
        CssdConfig { delta_d: d, ..*base }.validate(a.cols())?;
    }
    let nnz_a = a.as_slice().iter().filter(|v| **v != 0.0).count().max(1);
    let num_eigs = reference.len();
    let full = GramOperator::full(a).multiplications_per_apply();
    let mut selector = ColumnSelector::new(a, base.batch_size, base.seed)?;
    let mut rows = Vec::with_capacity(order.len());
    for d in order {
        let start = Instant::now();
        let mut ctr = OpCounter::new();
        selector.advance(d, base.max_cols, &mut ctr)?;
        let f = encode_columns(a, &selector.snapshot(), d, base.max_atoms_per_col, base.seed, &mut ctr)?;
        let seconds = start.elapsed().as_secs_f64();
        let op = GramOperator::factored(&f);
        let approx = power_method(&op, num_eigs, solver, &mut OpCounter::new())?;
        rows.push(SweepRow {
            delta_d: d,
            rank: f.rank(),
            nnz_v: f.nnz(),
            density_ratio: f.nnz() as f64 / nnz_a as f64,
            achieved_delta: f.achieved_delta,
            delta_l: learning_error(&reference.values, &approx.values)?,
            factored_mults_per_apply: op.multiplications_per_apply(),
            full_mults_per_apply: full,
            decompose_seconds: seconds,
        });
    }
    Ok(rows)
}

/// `V` by unconstrained least squares on the same basis, `l×n` and dense.
pub fn least_squares_coefficients(a: &DenseMatrix, basis: &DenseMatrix, ctr: &mut OpCounter) -> Result<DenseMatrix> {
    if a.rows() != basis.rows() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} rows, basis has {}",
            a.rows(),
            basis.rows()
        )));
    }
    let qr = PivotedQr::factor(basis, ctr)?;
    let solved: Vec<(Vec<f64>, OpCounter)> = (0..a.cols())
        .into_par_iter()
        .map(|j| {
            let mut c = OpCounter::new();
            let v = qr.solve(a.col(j), &mut c);
            (v, c)
        })
        .collect();
    let mut cols = Vec::with_capacity(a.cols());
    for (v, c) in solved {
        *ctr += c;
        cols.push(v);
    }
    DenseMatrix::from_columns(basis.cols(), &cols)
}

/// Stored-entry counts of three representations of `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTable {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub nnz_v: usize,
    /// `m·n`.
    pub original: u64,
    /// `m·l + l·n`, dense least-squares coefficients.
    pub least_squares: u64,
    /// `m·l + nnz(V)`, values only.
    pub rankmap: u64,
    /// `rankmap` plus CSC indices: `nnz(V)` row indices and `n + 1` column pointers.
    pub rankmap_indexed: u64,
    pub least_squares_ratio: f64,
    pub rankmap_ratio: f64,
    /// Whether the sparse codes beat least squares once indices are counted.
    pub beneficial: bool,
}

pub fn memory_table(a: &DenseMatrix, f: &Factorization) -> Result<MemoryTable> {
    if a.rows() != f.rows() || a.cols() != f.cols() {
        return Err(Error::DimensionMismatch(format!(
            "data is {}×{}, factorization {}×{}",
            a.rows(),
            a.cols(),
            f.rows(),
            f.cols()
        )));
    }
    let (m, n, l, nnz) = (f.rows() as u64, f.cols() as u64, f.rank() as u64, f.nnz() as u64);
    let original = m * n;
    let least_squares = m * l + l * n;
    let rankmap = m * l + nnz;
    let rankmap_indexed = rankmap + nnz + n + 1;
    Ok(MemoryTable {
        m: f.rows(),
        n: f.cols(),
        l: f.rank(),
        nnz_v: f.nnz(),
        original,
        least_squares,
        rankmap,
        rankmap_indexed,
        least_squares_ratio: original as f64 / least_squares as f64,
        rankmap_ratio: original as f64 / rankmap as f64,
        beneficial: rankmap_indexed < least_squares,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cssd::decompose;
    use crate::datasets::{generate, DatasetKind, DatasetSpec};

    #[test]
    fn rank_one_memory() {
        let col: Vec<f64> = (1..=6).map(f64::from).collect();
        let a = DenseMatrix::from_columns(6, &vec![col; 40]).unwrap();
        let f = decompose(&a, &CssdConfig::new(0.0, 6, 0)).unwrap();
        let t = memory_table(&a, &f).unwrap();
        assert_eq!(t.l, 1);
        assert_eq!(t.rankmap, 6 + 40);
        assert_eq!(t.original, 240);
    }

    #[test]
    fn least_squares_reproduces_exact_data() {
        let a = generate(&DatasetSpec {
            kind: DatasetKind::LowRank { rank: 3 },
            m: 8,
            n: 20,
            noise: 0.0,
            seed: 1,
        })
        .unwrap();
        let f = decompose(&a, &CssdConfig::new(0.0, 8, 3)).unwrap();
        let mut ctr = OpCounter::new();
        let v = least_squares_coefficients(&a, &f.basis, &mut ctr).unwrap();
        assert_eq!((v.rows(), v.cols()), (3, 20));
        for j in 0..20 {
            let mut r = a.col(j).to_vec();
            for k in 0..3 {
                crate::linalg::axpy(-v.get(k, j), f.basis.col(k), &mut r);
            }
            assert!(crate::linalg::norm2(&r) < 1e-9 * crate::linalg::norm2(a.col(j)));
        }
    }
}
