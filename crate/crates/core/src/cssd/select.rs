use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{column_norms, dot, DenseMatrix, OpCounter, PivotedQr};

/// Relative residuals at or below this are treated as exactly zero.
pub const NUMERICAL_ZERO: f64 = 1e-10;

/// Adaptive sampling distribution over the columns of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDistribution {
    /// Sums to one, or is all zero when every column is already represented.
    pub probabilities: Vec<f64>,
    /// Relative residual `‖a_i − A_S A_S⁺ a_i‖ / ‖a_i‖` per column; zero on `S`.
    pub scores: Vec<f64>,
    /// Columns with zero norm; their score is defined as zero.
    pub zero_columns: Vec<usize>,
}

impl SelectionDistribution {
    pub fn is_converged(&self) -> bool {
        self.probabilities.iter().all(|&p| p == 0.0)
    }
}

/// Sampling probabilities proportional to each column's relative residual
/// against the span of `selected`. An empty selection gives the uniform
/// distribution.
pub fn selection_distribution(
    a: &DenseMatrix,
    selected: &[usize],
    ctr: &mut OpCounter,
) -> Result<SelectionDistribution> {
    let n = a.cols();
    if let Some(&bad) = selected.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidArgument(format!("selected column {bad} out of range")));
    }
    let norms = column_norms(a);
    ctr.mul_add(a.rows() * n);
    let zero_columns: Vec<usize> = (0..n).filter(|&j| norms[j] == 0.0).collect();
    if selected.is_empty() {
        let p = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        return Ok(SelectionDistribution {
            probabilities: vec![p; n],
            scores: norms.iter().map(|&v| if v == 0.0 { 0.0 } else { 1.0 }).collect(),
            zero_columns,
        });
    }
    let qr = PivotedQr::factor(&a.select_columns(selected), ctr)?;
    let mut in_set = vec![false; n];
    for &j in selected {
        in_set[j] = true;
    }
    let scores = relative_residuals(a, &qr, &norms, &in_set, ctr);
    Ok(SelectionDistribution {
        probabilities: normalize(&scores),
        scores,
        zero_columns,
    })
}

fn relative_residuals(
    a: &DenseMatrix,
    qr: &PivotedQr,
    norms: &[f64],
    in_set: &[bool],
    ctr: &mut OpCounter,
) -> Vec<f64> {
    let results: Vec<(f64, OpCounter)> = (0..a.cols())
        .into_par_iter()
        .map(|j| {
            let mut c = OpCounter::new();
            if in_set[j] || norms[j] == 0.0 {
                return (0.0, c);
            }
            let score = qr.residual_norm(a.col(j), &mut c) / norms[j];
            (if score <= NUMERICAL_ZERO { 0.0 } else { score }, c)
        })
        .collect();
    let mut scores = Vec::with_capacity(results.len());
    for (s, c) in results {
        scores.push(s);
        *ctr += c;
    }
    scores
}

fn normalize(scores: &[f64]) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    if total == 0.0 {
        vec![0.0; scores.len()]
    } else {
        scores.iter().map(|s| s / total).collect()
    }
}

/// Result of the sequential selection stage.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Selected columns normalised to unit norm, in selection order.
    pub basis: DenseMatrix,
    pub selected: Vec<usize>,
    /// Largest relative residual among unselected columns at the last check.
    pub max_residual: f64,
    pub rounds: usize,
    pub zero_columns: Vec<usize>,
}

/// Resumable adaptive column sampler.
///
/// Calling [`advance`](Self::advance) with a smaller tolerance continues from
/// the current selection with the same random stream, so selections only grow.
pub struct ColumnSelector<'a> {
    a: &'a DenseMatrix,
    norms: Vec<f64>,
    rng: ChaCha8Rng,
    batch_size: usize,
    selected: Vec<usize>,
    in_set: Vec<bool>,
    /// Orthonormal basis of the selection, used to reject dependent draws.
    ortho: Vec<Vec<f64>>,
    basis: DenseMatrix,
    max_residual: f64,
    rounds: usize,
    zero_columns: Vec<usize>,
}

impl<'a> ColumnSelector<'a> {
    pub fn new(a: &'a DenseMatrix, batch_size: usize, seed: u64) -> Result<Self> {
        if a.cols() == 0 || a.rows() == 0 {
            return Err(Error::Degenerate("empty matrix".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        let norms = column_norms(a);
        if norms.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate("matrix is entirely zero".into()));
        }
        let zero_columns = (0..a.cols()).filter(|&j| norms[j] == 0.0).collect();
        Ok(Self {
            a,
            norms,
            rng: ChaCha8Rng::seed_from_u64(seed),
            batch_size,
            selected: Vec::new(),
            in_set: vec![false; a.cols()],
            ortho: Vec::new(),
            basis: DenseMatrix::zeros(a.rows(), 0),
            max_residual: f64::INFINITY,
            rounds: 0,
            zero_columns,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    /// Selects batches until every unselected column has relative residual at
    /// most `delta_d`, no independent column remains, or `max_cols` is reached.
    pub fn advance(&mut self, delta_d: f64, max_cols: usize, ctr: &mut OpCounter) -> Result<()> {
        if self.selected.is_empty() {
            let weights: Vec<f64> =
                self.norms.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
            let count = self.batch_size.min(max_cols);
            self.draw_batch(weights, count, ctr);
            self.rounds += 1;
        }
        let threshold = delta_d.max(NUMERICAL_ZERO);
        loop {
            let qr = PivotedQr::factor(&self.basis, ctr)?;
            let scores = relative_residuals(self.a, &qr, &self.norms, &self.in_set, ctr);
            self.max_residual = scores.iter().copied().fold(0.0, f64::max);
            if self.max_residual <= threshold || self.selected.len() >= max_cols {
                return Ok(());
            }
            let count = self.batch_size.min(max_cols - self.selected.len());
            if self.draw_batch(scores, count, ctr) == 0 {
                // Every remaining draw was numerically dependent on the selection.
                return Ok(());
            }
            self.rounds += 1;
        }
    }

    /// Draws up to `count` columns without replacement from `weights`. Draws
    /// in the span of the selection so far are discarded; after `count` such
    /// rejections the batch ends early.
    fn draw_batch(&mut self, mut weights: Vec<f64>, count: usize, ctr: &mut OpCounter) -> usize {
        let mut added = 0;
        let mut rejected = 0;
        while added < count && rejected < count {
            let Some(j) = sample(&mut self.rng, &weights) else {
                break;
            };
            weights[j] = 0.0;
            if self.try_add(j, ctr) {
                added += 1;
            } else {
                rejected += 1;
            }
        }
        added
    }

    fn try_add(&mut self, j: usize, ctr: &mut OpCounter) -> bool {
        let col = self.a.col(j);
        let mut r = col.to_vec();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for q in &self.ortho {
                let s = dot(q, &r);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= s * qi;
                }
            }
        }
        ctr.mul_add(4 * r.len() * self.ortho.len());
        let rn = dot(&r, &r).sqrt();
        if rn <= NUMERICAL_ZERO * self.norms[j] {
            return false;
        }
        r.iter_mut().for_each(|v| *v /= rn);
        self.ortho.push(r);
        let inv = 1.0 / self.norms[j];
        let unit: Vec<f64> = col.iter().map(|v| v * inv).collect();
        self.basis.push_column(&unit);
        self.selected.push(j);
        self.in_set[j] = true;
        true
    }

    pub fn snapshot(&self) -> Selection {
        Selection {
            basis: self.basis.clone(),
            selected: self.selected.clone(),
            max_residual: self.max_residual,
            rounds: self.rounds,
            zero_columns: self.zero_columns.clone(),
        }
    }
}

/// Index drawn with probability proportional to `weights`, or `None` if all
/// weights are zero.
fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(j);
            if acc > target {
                return Some(j);
            }
        }
    }
    last
}
