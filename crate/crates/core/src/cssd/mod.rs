//! Column-selection sparse decomposition `A ≈ D·V`.
//!
//! `D` holds normalised columns of `A` chosen by adaptive sampling; `V` holds
//! per-column sparse codes found by batch orthogonal matching pursuit. The
//! error tolerance is relative: every column satisfies
//! `‖a − D v‖₂ ≤ δ_D ‖a‖₂` when the decomposition meets its tolerance.

mod omp;
mod select;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, column_norms, norm2, DenseMatrix, OpCounter, SparseColMatrix};

pub use omp::{omp_encode, BatchOmp, SparseCode};
pub use select::{
    selection_distribution, ColumnSelector, Selection, SelectionDistribution, NUMERICAL_ZERO,
};

/// Residuals at or below this count as meeting a zero tolerance.
pub const RESIDUAL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CssdConfig {
    /// Relative per-column error tolerance, in `[0, 1)`.
    pub delta_d: f64,
    /// Columns drawn per adaptive round.
    pub batch_size: usize,
    /// Upper bound on the number of selected columns.
    pub max_cols: usize,
    /// Upper bound on non-zeros per column of `V`.
    pub max_atoms_per_col: usize,
    pub seed: u64,
}

impl CssdConfig {
    /// Defaults: batch size `max(1, max_cols / 10)`, atom cap `max_cols`.
    pub fn new(delta_d: f64, max_cols: usize, seed: u64) -> Self {
        Self {
            delta_d,
            batch_size: (max_cols / 10).max(1),
            max_cols,
            max_atoms_per_col: max_cols,
            seed,
        }
    }

    /// Defaults sized for `a`: at most `min(m, n)` columns.
    pub fn for_matrix(a: &DenseMatrix, delta_d: f64, seed: u64) -> Self {
        Self::new(delta_d, a.rows().min(a.cols()).max(1), seed)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_max_atoms(mut self, k: usize) -> Self {
        self.max_atoms_per_col = k;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta_d) {
            return Err(Error::InvalidArgument(format!(
                "delta_d must lie in [0, 1), got {}",
                self.delta_d
            )));
        }
        if self.batch_size == 0 || self.batch_size > self.max_cols || self.max_cols > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= batch_size ({}) <= max_cols ({}) <= n ({n})",
                self.batch_size, self.max_cols
            )));
        }
        if self.max_atoms_per_col == 0 {
            return Err(Error::InvalidArgument("max_atoms_per_col must be positive".into()));
        }
        Ok(())
    }
}

/// `A ≈ D·V` together with the provenance needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    /// `D`, `m×l`, unit-norm columns.
    pub basis: DenseMatrix,
    /// `V`, `l×n`.
    pub coeffs: SparseColMatrix,
    /// Source column of each atom of `D`.
    pub selected: Vec<usize>,
    pub delta_d: f64,
    /// Largest per-column relative reconstruction error.
    pub achieved_delta: f64,
    pub seed: u64,
    pub zero_columns: Vec<usize>,
}

impl Factorization {
    /// Assembles a factorization, checking shapes and the unit-norm basis.
    pub fn new(
        basis: DenseMatrix,
        coeffs: SparseColMatrix,
        selected: Vec<usize>,
        delta_d: f64,
        achieved_delta: f64,
        seed: u64,
    ) -> Result<Self> {
        if basis.cols() != coeffs.rows() || selected.len() != basis.cols() {
            return Err(Error::DimensionMismatch(format!(
                "basis {}x{}, coefficients {}x{}, {} selected indices",
                basis.rows(),
                basis.cols(),
                coeffs.rows(),
                coeffs.cols(),
                selected.len()
            )));
        }
        if let Some(j) = column_norms(&basis).iter().position(|n| (n - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidArgument(format!("basis column {j} is not unit norm")));
        }
        let mut sorted = selected.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.last().is_some_and(|&j| j >= coeffs.cols()) {
            return Err(Error::InvalidArgument("selected indices must be distinct and in range".into()));
        }
        Ok(Self {
            basis,
            coeffs,
            selected,
            delta_d,
            achieved_delta,
            seed,
            zero_columns: Vec::new(),
        })
    }

    /// Number of atoms `l`.
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn rows(&self) -> usize {
        self.basis.rows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.nnz()
    }

    /// `nnz(V) / (m·n)`.
    pub fn density_ratio(&self) -> f64 {
        self.nnz() as f64 / (self.rows() * self.cols()) as f64
    }

    pub fn meets_tolerance(&self) -> bool {
        self.achieved_delta <= self.delta_d.max(RESIDUAL_FLOOR)
    }

    pub fn reconstruct(&self, ctr: &mut OpCounter) -> Result<DenseMatrix> {
        self.basis.mul_sparse(&self.coeffs, ctr)
    }
}

/// Runs column selection followed by sparse coding of every column.
pub fn decompose(a: &DenseMatrix, cfg: &CssdConfig) -> Result<Factorization> {
    decompose_counted(a, cfg, &mut OpCounter::new())
}

pub fn decompose_counted(
    a: &DenseMatrix,
    cfg: &CssdConfig,
    ctr: &mut OpCounter,
) -> Result<Factorization> {
    cfg.validate(a.cols())?;
    let mut selector = ColumnSelector::new(a, cfg.batch_size, cfg.seed)?;
    selector.advance(cfg.delta_d, cfg.max_cols, ctr)?;
    let selection = selector.snapshot();
    encode_columns(a, &selection, cfg.delta_d, cfg.max_atoms_per_col, cfg.seed, ctr)
}

/// Adaptive column selection only.
pub fn select_columns(a: &DenseMatrix, cfg: &CssdConfig, ctr: &mut OpCounter) -> Result<Selection> {
    cfg.validate(a.cols())?;
    let mut selector = ColumnSelector::new(a, cfg.batch_size, cfg.seed)?;
    selector.advance(cfg.delta_d, cfg.max_cols, ctr)?;
    Ok(selector.snapshot())
}

/// Sparse-codes every column of `a` against a selection. Selected columns
/// encode as their own atom scaled by their original norm.
pub fn encode_columns(
    a: &DenseMatrix,
    selection: &Selection,
    delta_d: f64,
    k_max: usize,
    seed: u64,
    ctr: &mut OpCounter,
) -> Result<Factorization> {
    let basis = &selection.basis;
    let omp = BatchOmp::new(basis, ctr)?;
    let mut atom_of = vec![None; a.cols()];
    for (pos, &j) in selection.selected.iter().enumerate() {
        atom_of[j] = Some(pos);
    }

    let encoded: Vec<Result<(Vec<(usize, f64)>, f64, OpCounter)>> = (0..a.cols())
        .into_par_iter()
        .map(|j| {
            let mut c = OpCounter::new();
            let col = a.col(j);
            let entries: Vec<(usize, f64)> = match atom_of[j] {
                Some(pos) => vec![(pos, norm2(col))],
                None => {
                    let code = omp.encode(col, delta_d, k_max, &mut c)?;
                    code.indices.into_iter().zip(code.coefficients).collect()
                }
            };
            let rel = relative_error(basis, col, &entries, &mut c);
            Ok((entries, rel, c))
        })
        .collect();

    let mut columns = Vec::with_capacity(a.cols());
    let mut achieved: f64 = 0.0;
    for item in encoded {
        let (entries, rel, c) = item?;
        achieved = achieved.max(rel);
        columns.push(entries);
        *ctr += c;
    }
    let coeffs = SparseColMatrix::from_columns(basis.cols(), columns)?;
    Ok(Factorization {
        basis: basis.clone(),
        coeffs,
        selected: selection.selected.clone(),
        delta_d,
        achieved_delta: achieved,
        seed,
        zero_columns: selection.zero_columns.clone(),
    })
}

/// Exact `‖a − D v‖ / ‖a‖`, zero for a zero column.
fn relative_error(basis: &DenseMatrix, a: &[f64], code: &[(usize, f64)], ctr: &mut OpCounter) -> f64 {
    let na = norm2(a);
    if na == 0.0 {
        return 0.0;
    }
    let mut r = a.to_vec();
    for &(i, v) in code {
        axpy(-v, basis.col(i), &mut r);
    }
    ctr.mul_add(a.len() * (code.len() + 1));
    norm2(&r) / na
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_one(m: usize, n: usize) -> DenseMatrix {
        let u: Vec<f64> = (0..m).map(|i| 1.0 + i as f64).collect();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| u.iter().map(|x| x * (j as f64 - 2.5)).collect())
            .collect();
        DenseMatrix::from_columns(m, &cols).unwrap()
    }

    #[test]
    fn rank_one_selects_one_column() {
        let a = rank_one(5, 8);
        for delta in [0.0, 0.3] {
            let cfg = CssdConfig::new(delta, 5, 7).with_batch_size(1);
            let f = decompose(&a, &cfg).unwrap();
            assert_eq!(f.rank(), 1);
            assert_eq!(f.nnz(), 8);
            assert!(f.meets_tolerance());
        }
    }

    #[test]
    fn config_validation() {
        assert!(CssdConfig::new(1.0, 3, 0).validate(10).is_err());
        assert!(CssdConfig::new(-0.1, 3, 0).validate(10).is_err());
        assert!(CssdConfig::new(0.1, 11, 0).validate(10).is_err());
        assert!(CssdConfig::new(0.1, 3, 0).with_batch_size(4).validate(10).is_err());
        assert!(CssdConfig::new(0.1, 3, 0).validate(10).is_ok());
        assert_eq!(CssdConfig::new(0.1, 35, 0).batch_size, 3);
        assert_eq!(CssdConfig::new(0.1, 5, 0).batch_size, 1);
    }

    #[test]
    fn loose_tolerance_stops_after_first_batch() {
        // Pairwise non-parallel columns spread over three axes.
        let mut cols = Vec::new();
        for j in 0..9 {
            let mut c = vec![0.1 * (j + 1) as f64; 3];
            c[j % 3] = 1.0;
            cols.push(c);
        }
        let a = DenseMatrix::from_columns(3, &cols).unwrap();
        let cfg = CssdConfig::new(1.0 - 1e-12, 3, 1).with_batch_size(2);
        let sel = select_columns(&a, &cfg, &mut OpCounter::new()).unwrap();
        assert_eq!(sel.selected.len(), 2);
        assert_eq!(sel.rounds, 1);
    }
}
