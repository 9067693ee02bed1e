use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseColMatrix;

/// Balanced contiguous split of `0..n` into `parts` ranges; the first
/// `n % parts` ranges get one extra element.
pub(crate) fn balanced_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Column-chunk assignment for the matrix-based model.
///
/// Worker `w` owns columns `chunks[w]` of `V` and the matching entries of `x`;
/// `D` lives on a separate central node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub n: usize,
    pub chunks: Vec<Range<usize>>,
}

impl PartitionPlan {
    pub fn n_c(&self) -> usize {
        self.chunks.len()
    }
}

pub fn plan_matrix_partition(n: usize, n_c: usize) -> Result<PartitionPlan> {
    if n_c == 0 || n_c > n {
        return Err(Error::InvalidArgument(format!(
            "worker count must satisfy 1 <= n_c <= n, got n_c = {n_c}, n = {n}"
        )));
    }
    Ok(PartitionPlan {
        n,
        chunks: balanced_ranges(n, n_c),
    })
}

/// Vertex-cut placement of the three-layer graph `X – P – R`.
///
/// `X_j` masters are split into contiguous chunks; every edge `X_j – P_i`
/// (a non-zero `V[i, j]`) lives with the master of `X_j`. Masters of all
/// `P_i` and of `R` sit on the central node together with the `P – R` edges,
/// so `X` and `R` are never replicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphPlan {
    pub n: usize,
    pub l: usize,
    pub x_masters: Vec<Range<usize>>,
    /// Workers holding at least one edge of `P_i`, ascending.
    pub holders: Vec<Vec<usize>>,
    /// `rep(P_i) = max(1, |holders[i]|)`; an isolated vertex counts its master.
    pub rep_counts: Vec<usize>,
    /// `P` vertices with a copy on each worker, ascending.
    pub held: Vec<Vec<usize>>,
    pub edges_per_worker: Vec<usize>,
}

impl GraphPlan {
    pub fn n_c(&self) -> usize {
        self.x_masters.len()
    }

    /// `Σ rep(P_i)`.
    pub fn total_replicas(&self) -> usize {
        self.rep_counts.iter().sum()
    }

    /// Worker that follows `worker` in the holder chain of `P_i`, if any.
    pub(crate) fn next_holder(&self, vertex: usize, worker: usize) -> Option<usize> {
        let h = &self.holders[vertex];
        let pos = h.binary_search(&worker).ok()?;
        h.get(pos + 1).copied()
    }

    pub(crate) fn prev_holder(&self, vertex: usize, worker: usize) -> Option<usize> {
        let h = &self.holders[vertex];
        let pos = h.binary_search(&worker).ok()?;
        pos.checked_sub(1).map(|p| h[p])
    }
}

pub fn plan_graph_partition(v: &SparseColMatrix, n_c: usize) -> Result<GraphPlan> {
    if n_c == 0 {
        return Err(Error::InvalidArgument("worker count must be positive".into()));
    }
    let l = v.rows();
    let x_masters = balanced_ranges(v.cols(), n_c);
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); l];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); n_c];
    let mut edges_per_worker = vec![0; n_c];
    let mut mark = vec![usize::MAX; l];
    for (w, range) in x_masters.iter().enumerate() {
        for j in range.clone() {
            let (rows, _) = v.col(j);
            edges_per_worker[w] += rows.len();
            for &i in rows {
                if mark[i] != w {
                    mark[i] = w;
                    holders[i].push(w);
                    held[w].push(i);
                }
            }
        }
        held[w].sort_unstable();
    }
    let rep_counts = holders.iter().map(|h| h.len().max(1)).collect();
    Ok(GraphPlan {
        n: v.cols(),
        l,
        x_masters,
        holders,
        rep_counts,
        held,
        edges_per_worker,
    })
}
