use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, DenseMatrix, OpCounter};
use crate::solvers::fista::random_unit;
use crate::solvers::{GramApply, SolverConfig};

/// Below this fraction of the leading eigenvalue an iterate is treated as
/// lying in the null space of the operator.
const NULL_SPACE_RATIO: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// Descending.
    pub values: Vec<f64>,
    /// `n × k`, column `i` pairs with `values[i]`. Each vector is signed so its
    /// largest-magnitude entry is positive.
    pub vectors: Vec<Vec<f64>>,
    /// Iterations spent on each eigenpair.
    pub iterations: Vec<usize>,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vectors_matrix(&self, n: usize) -> Result<DenseMatrix> {
        DenseMatrix::from_columns(n, &self.vectors)
    }
}

/// Leading `num_eigs` eigenpairs of a symmetric positive semi-definite
/// operator by power iteration with deflation.
///
/// Deflation re-orthogonalises every iterate against the eigenvectors found
/// so far, leaving the operator itself untouched. Eigenpair `k` is accepted
/// once `‖Gx − σx‖ ≤ tolerance·σ`.
pub fn power_method<G: GramApply + ?Sized>(
    op: &G,
    num_eigs: usize,
    cfg: &SolverConfig,
    ctr: &mut OpCounter,
) -> Result<EigenResult> {
    cfg.validate()?;
    let n = op.dim();
    if num_eigs > n {
        return Err(Error::InvalidArgument(format!(
            "requested {num_eigs} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let mut found = EigenResult {
        values: Vec::with_capacity(num_eigs),
        vectors: Vec::with_capacity(num_eigs),
        iterations: Vec::with_capacity(num_eigs),
    };

    for k in 0..num_eigs {
        let mut x = random_unit(n, cfg.seed.wrapping_add(k as u64));
        deflate(&mut x, &found.vectors, ctr);
        if !normalize(&mut x, ctr) {
            x = fallback_direction(n, &found.vectors, ctr);
        }
        let mut accepted = None;
        for iteration in 1..=cfg.max_iters {
            // Residual of the deflated operator, so errors in earlier
            // eigenvectors do not put a floor under this one.
            let mut y = op.apply(&x, ctr)?;
            deflate(&mut y, &found.vectors, ctr);
            let sigma = dot(&x, &y);
            let residual = y
                .iter()
                .zip(&x)
                .map(|(yi, xi)| (yi - sigma * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            ctr.mul_add(3 * n);
            if !sigma.is_finite() || !residual.is_finite() {
                return Err(Error::Diverged {
                    iteration,
                    step_size: 0.0,
                });
            }
            let lead = found.values.first().copied().unwrap_or(sigma);
            let ny = norm2(&y);
            let null = ny <= NULL_SPACE_RATIO * lead.abs() || ny == 0.0;
            if residual <= cfg.tolerance * sigma.abs() || null {
                accepted = Some((if null { 0.0 } else { sigma }, iteration));
                break;
            }
            let mut next = y;
            if !normalize(&mut next, ctr) {
                accepted = Some((0.0, iteration));
                break;
            }
            x = next;
        }
        match accepted {
            Some((sigma, iters)) => {
                orient(&mut x);
                found.values.push(sigma);
                found.vectors.push(x);
                found.iterations.push(iters);
            }
            None => {
                return Err(Error::NotConverged {
                    index: k,
                    max_iters: cfg.max_iters,
                    partial: Box::new(sorted(found)),
                });
            }
        }
    }
    Ok(sorted(found))
}

fn deflate(x: &mut [f64], basis: &[Vec<f64>], ctr: &mut OpCounter) {
    for q in basis {
        let s = dot(q, x);
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi -= s * qi;
        }
    }
    ctr.mul_add(2 * x.len() * basis.len());
}

fn normalize(x: &mut [f64], ctr: &mut OpCounter) -> bool {
    let nx = norm2(x);
    ctr.mul_add(x.len());
    if nx == 0.0 || !nx.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= nx);
    true
}

/// First coordinate axis with a non-trivial component outside `basis`.
fn fallback_direction(n: usize, basis: &[Vec<f64>], ctr: &mut OpCounter) -> Vec<f64> {
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        deflate(&mut e, basis, ctr);
        deflate(&mut e, basis, ctr);
        if norm2(&e) > 1e-8 && normalize(&mut e, ctr) {
            return e;
        }
    }
    vec![0.0; n]
}

fn orient(x: &mut [f64]) {
    let pivot = x
        .iter()
        .copied()
        .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
    if pivot < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

fn sorted(mut r: EigenResult) -> EigenResult {
    let mut order: Vec<usize> = (0..r.values.len()).collect();
    order.sort_by(|&a, &b| r.values[b].total_cmp(&r.values[a]));
    r.values = order.iter().map(|&i| r.values[i]).collect();
    r.iterations = order.iter().map(|&i| r.iterations[i]).collect();
    let mut vectors = std::mem::take(&mut r.vectors);
    r.vectors = order.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::GramOperator;

    fn cfg() -> SolverConfig {
        SolverConfig {
            max_iters: 5000,
            tolerance: 1e-10,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn diagonal() {
        let a = DenseMatrix::from_row_major(2, 2, &[2.0, 0.0, 0.0, 1.0]).unwrap();
        let r = power_method(&GramOperator::full(&a), 2, &cfg(), &mut OpCounter::new()).unwrap();
        assert!((r.values[0] - 4.0).abs() < 1e-12);
        assert!((r.values[1] - 1.0).abs() < 1e-12);
        assert!((r.vectors[0][0] - 1.0).abs() < 1e-9 && r.vectors[0][1].abs() < 1e-6);
        assert!((r.vectors[1][1] - 1.0).abs() < 1e-9 && r.vectors[1][0].abs() < 1e-6);
    }

    #[test]
    fn zero_eigs_is_empty() {
        let a = DenseMatrix::identity(3);
        let r = power_method(&GramOperator::full(&a), 0, &cfg(), &mut OpCounter::new()).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn too_many_eigs_is_rejected() {
        let a = DenseMatrix::identity(3);
        assert!(power_method(&GramOperator::full(&a), 4, &cfg(), &mut OpCounter::new()).is_err());
    }

    #[test]
    fn null_space_eigenvalues_are_zero() {
        // Rank one: G = u uᵀ with u = (1, 1, 1).
        let a = DenseMatrix::from_row_major(1, 3, &[1.0, 1.0, 1.0]).unwrap();
        let r = power_method(&GramOperator::full(&a), 3, &cfg(), &mut OpCounter::new()).unwrap();
        assert!((r.values[0] - 3.0).abs() < 1e-12);
        assert_eq!(&r.values[1..], &[0.0, 0.0]);
    }

    #[test]
    fn iteration_cap_returns_converged_prefix() {
        // Nearly degenerate pair after a well separated leading eigenvalue.
        let a = DenseMatrix::from_row_major(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.9999]).unwrap();
        let c = SolverConfig {
            max_iters: 60,
            ..cfg()
        };
        match power_method(&GramOperator::full(&a), 3, &c, &mut OpCounter::new()) {
            Err(Error::NotConverged { index, partial, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(partial.len(), 1);
                assert!((partial.values[0] - 9.0).abs() < 1e-9);
            }
            other => panic!("expected partial result, got {other:?}"),
        }
    }
}
