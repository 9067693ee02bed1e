//! Batch orthogonal matching pursuit.
//!
//! The dictionary Gram `DᵀD` is computed once and shared by every signal.
//! Per signal only `Dᵀa` touches the ambient dimension; atom selection,
//! the progressive Cholesky factor of the active Gram block and the residual
//! energy all live in coefficient space.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, DenseMatrix, OpCounter};

/// Largest correlation, relative to `‖a‖`, below which the residual is
/// treated as orthogonal to the whole dictionary.
const CORRELATION_FLOOR: f64 = 1e-10;
/// Smallest admissible squared sine between a new atom and the active span.
const PIVOT_FLOOR: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-10;

/// Sparse coefficients of one signal, sorted by atom index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `‖a − Dv‖ / ‖a‖` as tracked by the residual-energy recurrence.
    pub tracked_residual: f64,
}

impl SparseCode {
    pub fn empty(tracked_residual: f64) -> Self {
        Self {
            indices: Vec::new(),
            coefficients: Vec::new(),
            tracked_residual,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn to_dense(&self, atoms: usize) -> Vec<f64> {
        let mut v = vec![0.0; atoms];
        for (&i, &c) in self.indices.iter().zip(&self.coefficients) {
            v[i] = c;
        }
        v
    }
}

pub struct BatchOmp<'a> {
    dict: &'a DenseMatrix,
    /// `DᵀD`, column-major `l×l`.
    gram: DenseMatrix,
}

impl<'a> BatchOmp<'a> {
    /// Precomputes the dictionary Gram. Atoms must have unit ℓ2 norm.
    pub fn new(dict: &'a DenseMatrix, ctr: &mut OpCounter) -> Result<Self> {
        let gram = dict.transpose_mul(dict, ctr)?;
        for j in 0..dict.cols() {
            if (gram.get(j, j).sqrt() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "dictionary atom {j} is not unit norm"
                )));
            }
        }
        Ok(Self { dict, gram })
    }

    pub fn atoms(&self) -> usize {
        self.dict.cols()
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    /// Greedy sparse code of `a`: stops once the relative residual is at most
    /// `delta_d` or `k_max` atoms are active.
    pub fn encode(
        &self,
        a: &[f64],
        delta_d: f64,
        k_max: usize,
        ctr: &mut OpCounter,
    ) -> Result<SparseCode> {
        check_len("signal", self.dict.rows(), a.len())?;
        let norm_sq = dot(a, a);
        ctr.mul_add(a.len());
        if norm_sq == 0.0 {
            return Ok(SparseCode::empty(0.0));
        }
        let alpha0 = self.dict.matvec(a, true, ctr)?;
        Ok(self.encode_correlations(&alpha0, norm_sq, delta_d, k_max, ctr))
    }

    /// Core loop given `α⁰ = Dᵀa` and `‖a‖²`.
    pub fn encode_correlations(
        &self,
        alpha0: &[f64],
        norm_sq: f64,
        delta_d: f64,
        k_max: usize,
        ctr: &mut OpCounter,
    ) -> SparseCode {
        let l = self.atoms();
        let k_max = k_max.min(l);
        let target = delta_d * delta_d * norm_sq;
        let corr_floor = CORRELATION_FLOOR * norm_sq.sqrt();

        let mut energy = norm_sq;
        if energy <= target {
            return SparseCode::empty(1.0);
        }

        let mut alpha = alpha0.to_vec();
        let mut usable = vec![true; l];
        let mut active: Vec<usize> = Vec::with_capacity(k_max);
        // Lower-triangular Cholesky factor of the active Gram block, row-major
        // with stride k_max.
        let mut chol = vec![0.0; k_max * k_max];
        let mut gamma: Vec<f64> = Vec::new();
        let mut w = vec![0.0; k_max];
        let mut prev_delta = 0.0;

        while energy > target && active.len() < k_max {
            let mut best = None;
            let mut best_abs = corr_floor;
            for (j, &c) in alpha.iter().enumerate() {
                if usable[j] && c.abs() > best_abs {
                    best_abs = c.abs();
                    best = Some(j);
                }
            }
            let Some(k) = best else { break };

            let s = active.len();
            if s > 0 {
                // Solve L w = G[I, k].
                for i in 0..s {
                    let mut acc = self.gram.get(active[i], k);
                    for (jj, &wj) in w.iter().enumerate().take(i) {
                        acc -= chol[i * k_max + jj] * wj;
                    }
                    w[i] = acc / chol[i * k_max + i];
                }
                ctr.mul_add(s * (s + 1) / 2);
                let pivot = 1.0 - dot(&w[..s], &w[..s]);
                if pivot <= PIVOT_FLOOR {
                    usable[k] = false;
                    continue;
                }
                chol[s * k_max..s * k_max + s].copy_from_slice(&w[..s]);
                chol[s * k_max + s] = pivot.sqrt();
            } else {
                chol[0] = 1.0;
            }
            active.push(k);
            usable[k] = false;

            // γ = (L Lᵀ)⁻¹ α⁰_I
            let s = active.len();
            let mut y = vec![0.0; s];
            for i in 0..s {
                let mut acc = alpha0[active[i]];
                for (jj, &yj) in y.iter().enumerate().take(i) {
                    acc -= chol[i * k_max + jj] * yj;
                }
                y[i] = acc / chol[i * k_max + i];
            }
            gamma = vec![0.0; s];
            for i in (0..s).rev() {
                let mut acc = y[i];
                for (jj, &gj) in gamma.iter().enumerate().skip(i + 1) {
                    acc -= chol[jj * k_max + i] * gj;
                }
                gamma[i] = acc / chol[i * k_max + i];
            }
            ctr.mul_add(s * (s + 1));

            // β = G_I γ, α = α⁰ − β
            let mut beta = vec![0.0; l];
            for (&atom, &g) in active.iter().zip(&gamma) {
                crate::linalg::axpy(g, self.gram.col(atom), &mut beta);
            }
            ctr.mul_add(l * s);
            for ((a, &a0), &b) in alpha.iter_mut().zip(alpha0).zip(&beta) {
                *a = a0 - b;
            }
            ctr.add(l);

            // ‖r‖² recurrence: δₙ = γᵀ β_I, ε ← ε − δₙ + δₙ₋₁
            let delta: f64 = active.iter().zip(&gamma).map(|(&i, &g)| g * beta[i]).sum();
            ctr.mul_add(s);
            energy = energy - delta + prev_delta;
            prev_delta = delta;
        }

        // Atoms picked early can end with a numerically zero coefficient once
        // the support spans the signal; they are not stored.
        let mut pairs: Vec<(usize, f64)> = active
            .into_iter()
            .zip(gamma)
            .filter(|&(_, c)| c.abs() > corr_floor)
            .collect();
        pairs.sort_by_key(|&(i, _)| i);
        let (indices, coefficients) = pairs.into_iter().unzip();
        SparseCode {
            indices,
            coefficients,
            tracked_residual: (energy.max(0.0) / norm_sq).sqrt(),
        }
    }
}

/// One-shot orthogonal matching pursuit of `a` over the unit-norm columns of `d`.
pub fn omp_encode(
    d: &DenseMatrix,
    a: &[f64],
    delta_d: f64,
    k_max: usize,
    ctr: &mut OpCounter,
) -> Result<SparseCode> {
    BatchOmp::new(d, ctr)?.encode(a, delta_d, k_max, ctr)
}
