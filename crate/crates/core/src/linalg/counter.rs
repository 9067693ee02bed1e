use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Floating-point operation tally owned by a caller and threaded through kernels.
///
/// Kernels accumulate from zero, so every product they form is followed by
/// exactly one addition into an accumulator: additions equal multiplications
/// for the product kernels, and reductions count their own additions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub multiplications: u64,
    pub additions: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn mul_add(&mut self, n: usize) {
        self.multiplications += n as u64;
        self.additions += n as u64;
    }

    #[inline]
    pub fn mul(&mut self, n: usize) {
        self.multiplications += n as u64;
    }

    #[inline]
    pub fn add(&mut self, n: usize) {
        self.additions += n as u64;
    }

    /// Difference `self - earlier`, for measuring a span of work.
    pub fn since(&self, earlier: &OpCounter) -> OpCounter {
        OpCounter {
            multiplications: self.multiplications - earlier.multiplications,
            additions: self.additions - earlier.additions,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.multiplications += rhs.multiplications;
        self.additions += rhs.additions;
    }
}

impl std::iter::Sum for OpCounter {
    fn sum<I: Iterator<Item = OpCounter>>(iter: I) -> Self {
        let mut total = OpCounter::default();
        for c in iter {
            total += c;
        }
        total
    }
}
