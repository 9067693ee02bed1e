//! Shared fixtures for the kernel benchmarks.

use rankmap::datasets::{generate, DatasetKind, DatasetSpec};
use rankmap::{decompose, CssdConfig, DenseMatrix, Factorization};

/// Exactly low-rank data, `m×n` of rank `r`.
pub fn low_rank(m: usize, n: usize, r: usize, seed: u64) -> DenseMatrix {
    generate(&DatasetSpec {
        kind: DatasetKind::LowRank { rank: r },
        m,
        n,
        noise: 0.0,
        seed,
    })
    .expect("valid benchmark dataset")
}

/// Union-of-subspaces data with `k` subspaces of dimension `r`.
pub fn subspaces(m: usize, n: usize, k: usize, r: usize, seed: u64) -> DenseMatrix {
    generate(&DatasetSpec {
        kind: DatasetKind::UnionOfSubspaces { subspaces: k, dim: r },
        m,
        n,
        noise: 0.0,
        seed,
    })
    .expect("valid benchmark dataset")
}

pub fn factor(a: &DenseMatrix, delta_d: f64, seed: u64) -> Factorization {
    decompose(a, &CssdConfig::for_matrix(a, delta_d, seed)).expect("decomposition")
}
