use serde::{Deserialize, Serialize};

use crate::cssd::Factorization;
use crate::error::{check_len, Result};
use crate::linalg::{DenseMatrix, OpCounter};

/// Anything that can apply a symmetric `n×n` Gram operator.
pub trait GramApply: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], ctr: &mut OpCounter) -> Result<Vec<f64>>;
}

/// How a factored operator evaluates `Dᵀ(D p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramFlow {
    /// `p = Vx`, `r = Dp`, `q = Dᵀr`, `z = Vᵀq`.
    FourStep,
    /// Steps two and three replaced by one multiply with a cached `DᵀD`.
    Collapsed,
}

/// `G = AᵀA`, either directly or through a factorization `A ≈ DV`.
#[derive(Debug, Clone)]
pub enum GramOperator<'a> {
    Full(&'a DenseMatrix),
    Factored {
        factors: &'a Factorization,
        flow: GramFlow,
        dtd: Option<DenseMatrix>,
    },
}

impl<'a> GramOperator<'a> {
    pub fn full(a: &'a DenseMatrix) -> Self {
        GramOperator::Full(a)
    }

    pub fn factored(factors: &'a Factorization) -> Self {
        GramOperator::Factored {
            factors,
            flow: GramFlow::FourStep,
            dtd: None,
        }
    }

    /// Factored operator that caches `DᵀD` once, charging its cost to `ctr`.
    pub fn factored_collapsed(factors: &'a Factorization, ctr: &mut OpCounter) -> Result<Self> {
        let dtd = factors.basis.transpose_mul(&factors.basis, ctr)?;
        Ok(GramOperator::Factored {
            factors,
            flow: GramFlow::Collapsed,
            dtd: Some(dtd),
        })
    }

    pub fn flow(&self) -> Option<GramFlow> {
        match self {
            GramOperator::Full(_) => None,
            GramOperator::Factored { flow, .. } => Some(*flow),
        }
    }

    pub fn factors(&self) -> Option<&'a Factorization> {
        match self {
            GramOperator::Full(_) => None,
            GramOperator::Factored { factors, .. } => Some(factors),
        }
    }

    /// `Aᵀy`, or `VᵀDᵀy` for a factored operator.
    pub fn rhs(&self, y: &[f64], ctr: &mut OpCounter) -> Result<Vec<f64>> {
        match self {
            GramOperator::Full(a) => a.matvec(y, true, ctr),
            GramOperator::Factored { factors, .. } => {
                let p = factors.basis.matvec(y, true, ctr)?;
                factors.coeffs.matvec(&p, true, ctr)
            }
        }
    }

    /// Multiplications charged by one application.
    pub fn multiplications_per_apply(&self) -> u64 {
        match self {
            GramOperator::Full(a) => 2 * (a.rows() * a.cols()) as u64,
            GramOperator::Factored { factors, flow, .. } => {
                let l = factors.rank();
                let middle = match flow {
                    GramFlow::FourStep => 2 * l * factors.rows(),
                    GramFlow::Collapsed => l * l,
                };
                (2 * factors.nnz() + middle) as u64
            }
        }
    }
}

/// Middle of the factored product, `q = Dᵀ(D p)` or `q = (DᵀD) p`.
pub(crate) fn factored_middle(
    basis: &DenseMatrix,
    dtd: Option<&DenseMatrix>,
    p: &[f64],
    ctr: &mut OpCounter,
) -> Result<Vec<f64>> {
    match dtd {
        Some(g) => g.matvec(p, false, ctr),
        None => {
            let r = basis.matvec(p, false, ctr)?;
            basis.matvec(&r, true, ctr)
        }
    }
}

impl GramApply for GramOperator<'_> {
    fn dim(&self) -> usize {
        match self {
            GramOperator::Full(a) => a.cols(),
            GramOperator::Factored { factors, .. } => factors.cols(),
        }
    }

    fn apply(&self, x: &[f64], ctr: &mut OpCounter) -> Result<Vec<f64>> {
        check_len("gram operand", self.dim(), x.len())?;
        match self {
            GramOperator::Full(a) => {
                let ax = a.matvec(x, false, ctr)?;
                a.matvec(&ax, true, ctr)
            }
            GramOperator::Factored { factors, dtd, .. } => {
                let p = factors.coeffs.matvec(x, false, ctr)?;
                let q = factored_middle(&factors.basis, dtd.as_ref(), &p, ctr)?;
                factors.coeffs.matvec(&q, true, ctr)
            }
        }
    }
}
