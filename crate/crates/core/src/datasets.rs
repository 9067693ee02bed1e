//! Seeded synthetic data matrices.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_matrix, MatrixFormat};
use crate::linalg::{axpy, dot, norm2, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetKind {
    /// `A = U·W`, Gaussian `U` (`m×r`) and `W` (`r×n`).
    LowRank { rank: usize },
    /// Each column a Gaussian combination inside one of `subspaces` random
    /// `dim`-dimensional subspaces, chosen uniformly per column.
    UnionOfSubspaces { subspaces: usize, dim: usize },
    /// `A = D·V` with orthonormal `D` (`m × blocks·dim`) and `V`
    /// block-diagonal over contiguous, balanced column ranges.
    BlockDiagonalV { blocks: usize, dim: usize },
    File { path: PathBuf, format: MatrixFormat },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    pub m: usize,
    pub n: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, DatasetKind::File { .. }) {
            return Ok(());
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset dimensions must be positive, got {}×{}",
                self.m, self.n
            )));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::InvalidArgument(format!("noise must be >= 0, got {}", self.noise)));
        }
        let (inner, what) = match self.kind {
            DatasetKind::LowRank { rank } => (rank, "rank"),
            DatasetKind::UnionOfSubspaces { subspaces, dim } => {
                if subspaces == 0 {
                    return Err(Error::InvalidArgument("need at least one subspace".into()));
                }
                (dim, "subspace dimension")
            }
            DatasetKind::BlockDiagonalV { blocks, dim } => {
                if blocks == 0 || blocks > self.n {
                    return Err(Error::InvalidArgument(format!(
                        "need 1 <= blocks <= n, got {blocks}"
                    )));
                }
                (blocks * dim, "blocks × dim")
            }
            DatasetKind::File { .. } => unreachable!(),
        };
        if inner == 0 || inner >= self.m {
            return Err(Error::InvalidArgument(format!(
                "{what} must be in 1..m (m = {}), got {inner}",
                self.m
            )));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `k` orthonormal `m`-vectors from Gram–Schmidt on Gaussian draws.
fn orthonormal(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    while q.len() < k {
        let mut v = gaussian(rng, m);
        for _ in 0..2 {
            for u in &q {
                let s = dot(u, &v);
                axpy(-s, u, &mut v);
            }
        }
        let nv = norm2(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            q.push(v);
        }
    }
    q
}

fn combine(basis: &[Vec<f64>], w: &[f64], m: usize) -> Vec<f64> {
    let mut col = vec![0.0; m];
    for (b, &c) in basis.iter().zip(w) {
        axpy(c, b, &mut col);
    }
    col
}

/// Builds the matrix described by `spec`.
pub fn generate(spec: &DatasetSpec) -> Result<DenseMatrix> {
    generate_labeled(spec).map(|(a, _)| a)
}

/// Like [`generate`], also returning the subspace (or block) of each column.
/// Low-rank and file data label every column 0.
pub fn generate_labeled(spec: &DatasetSpec) -> Result<(DenseMatrix, Vec<u32>)> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (columns, labels): (Vec<Vec<f64>>, Vec<u32>) = match &spec.kind {
        DatasetKind::File { path, format } => {
            let a = load_matrix(path, *format)?;
            let n = a.cols();
            return Ok((a, vec![0; n]));
        }
        DatasetKind::LowRank { rank } => {
            let u: Vec<Vec<f64>> = (0..*rank).map(|_| gaussian(&mut rng, m)).collect();
            (0..n)
                .map(|_| (combine(&u, &gaussian(&mut rng, *rank), m), 0))
                .unzip()
        }
        DatasetKind::UnionOfSubspaces { subspaces, dim } => {
            let bases: Vec<Vec<Vec<f64>>> = (0..*subspaces)
                .map(|_| (0..*dim).map(|_| gaussian(&mut rng, m)).collect())
                .collect();
            (0..n)
                .map(|_| {
                    let k = rng.random_range(0..*subspaces);
                    (combine(&bases[k], &gaussian(&mut rng, *dim), m), k as u32)
                })
                .unzip()
        }
        DatasetKind::BlockDiagonalV { blocks, dim } => {
            let d = orthonormal(&mut rng, m, blocks * dim);
            let bounds = crate::distexec::plan_matrix_partition(n, *blocks)?.chunks;
            let mut cols = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for (b, range) in bounds.iter().enumerate() {
                let atoms = &d[b * dim..(b + 1) * dim];
                for _ in range.clone() {
                    cols.push(combine(atoms, &gaussian(&mut rng, *dim), m));
                    labels.push(b as u32);
                }
            }
            (cols, labels)
        }
    };
    let mut a = DenseMatrix::from_columns(m, &columns)?.into_vec();
    if spec.noise > 0.0 {
        for v in a.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += spec.noise * e;
        }
    }
    Ok((DenseMatrix::new(m, n, a)?, labels))
}
