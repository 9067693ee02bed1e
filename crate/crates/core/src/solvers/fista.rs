use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{dot, norm2, OpCounter};
use crate::solvers::GramApply;

/// Iterations used to estimate the largest eigenvalue for the automatic step.
pub const LIPSCHITZ_ITERS: usize = 50;
/// Safety factor on the estimated Lipschitz constant; the power estimate
/// approaches the largest eigenvalue from below.
const LIPSCHITZ_INFLATION: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// `1 / L̂` with `L̂` from a short power iteration on the operator.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step_size: StepSize,
    /// ℓ1 weight.
    pub lambda: f64,
    /// Iteration cap (per eigenpair for the power method).
    pub max_iters: usize,
    /// Relative change `‖x⁺ − x‖/‖x⁺‖` for FISTA; relative eigen-residual for
    /// the power method.
    pub tolerance: f64,
    /// FISTA momentum; off gives plain iterative soft thresholding.
    pub momentum: bool,
    /// Evaluate the objective every iteration (one extra operator apply).
    pub record_objective: bool,
    /// Seeds the random start vectors.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: StepSize::Auto,
            lambda: 0.0,
            max_iters: 1000,
            tolerance: 1e-8,
            momentum: true,
            record_objective: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let StepSize::Fixed(g) = self.step_size {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {g}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `½xᵀGx − xᵀAᵀy + λ‖x‖₁`, which differs from `½‖Ax − y‖² + λ‖x‖₁` by
    /// the constant `½‖y‖²`.
    pub objective: Option<f64>,
    /// `‖G y − Aᵀy‖` at the gradient point.
    pub residual_norm: f64,
    pub x_change: f64,
    /// Cumulative operation counts at the end of the iteration.
    pub cost: OpCounter,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.objective)
    }
}

#[derive(Debug, Clone)]
pub struct FistaOutcome {
    pub x: Vec<f64>,
    pub trace: IterationTrace,
    pub step_size: f64,
    pub converged: bool,
}

/// Entrywise `sign(v)·max(|v| − τ, 0)`.
pub fn soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink(x, tau)).collect()
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Upper estimate of the largest eigenvalue of `op` from a fixed number of
/// power iterations started at a seeded random vector.
pub fn estimate_lipschitz<G: GramApply + ?Sized>(
    op: &G,
    iters: usize,
    seed: u64,
    ctr: &mut OpCounter,
) -> Result<f64> {
    let n = op.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = random_unit(n, seed);
    let mut est = 0.0;
    for _ in 0..iters {
        let y = op.apply(&x, ctr)?;
        let ny = norm2(&y);
        ctr.mul_add(n);
        est = ny;
        if ny == 0.0 {
            break;
        }
        x = y.into_iter().map(|v| v / ny).collect();
        ctr.mul(n);
    }
    Ok(est * LIPSCHITZ_INFLATION)
}

pub(crate) fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    x
}

/// Minimises `½‖Ax − y‖² + λ‖x‖₁` through the Gram operator `G = AᵀA`
/// given the precomputed `Aᵀy`, starting from zero.
pub fn fista_solve<G: GramApply + ?Sized>(
    op: &G,
    aty: &[f64],
    cfg: &SolverConfig,
    ctr: &mut OpCounter,
) -> Result<FistaOutcome> {
    fista_solve_with(op, aty, cfg, ctr, |_, _| false)
}

/// [`fista_solve`] with an observer called after every iteration with the
/// iteration index and current iterate; returning `true` stops the solve.
pub fn fista_solve_with<G, F>(
    op: &G,
    aty: &[f64],
    cfg: &SolverConfig,
    ctr: &mut OpCounter,
    mut stop: F,
) -> Result<FistaOutcome>
where
    G: GramApply + ?Sized,
    F: FnMut(usize, &[f64]) -> bool,
{
    cfg.validate()?;
    let n = op.dim();
    check_len("Aᵀy", n, aty.len())?;
    check_finite(aty)?;

    let step = match cfg.step_size {
        StepSize::Fixed(g) => g,
        StepSize::Auto => {
            let l = estimate_lipschitz(op, LIPSCHITZ_ITERS, cfg.seed, ctr)?;
            if l > 0.0 {
                1.0 / l
            } else {
                1.0
            }
        }
    };
    let tau = step * cfg.lambda;

    let mut x = vec![0.0; n];
    let mut point = x.clone();
    let mut t = 1.0_f64;
    let mut trace = IterationTrace::default();
    let mut converged = false;

    for iteration in 1..=cfg.max_iters {
        let g_point = op.apply(&point, ctr)?;
        let grad: Vec<f64> = g_point.iter().zip(aty).map(|(g, b)| g - b).collect();
        let residual_norm = norm2(&grad);
        let x_next: Vec<f64> = point
            .iter()
            .zip(&grad)
            .map(|(p, g)| shrink(p - step * g, tau))
            .collect();
        ctr.mul_add(3 * n);

        let diff: Vec<f64> = x_next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let nd = norm2(&diff);
        let nx = norm2(&x_next);
        let x_change = if nx > 0.0 { nd / nx } else { nd };

        if !residual_norm.is_finite() || !x_change.is_finite() {
            return Err(Error::Diverged {
                iteration,
                step_size: step,
            });
        }

        if cfg.momentum {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            point = x_next.iter().zip(&diff).map(|(a, d)| a + beta * d).collect();
            ctr.mul_add(n);
            t = t_next;
        } else {
            point.clone_from(&x_next);
        }
        x = x_next;

        let objective = if cfg.record_objective {
            Some(objective_value(op, &x, aty, cfg.lambda, ctr)?)
        } else {
            None
        };
        trace.records.push(IterationRecord {
            iteration,
            objective,
            residual_norm,
            x_change,
            cost: *ctr,
        });

        if x_change <= cfg.tolerance {
            converged = true;
            break;
        }
        if stop(iteration, &x) {
            break;
        }
    }

    Ok(FistaOutcome {
        x,
        trace,
        step_size: step,
        converged,
    })
}

/// `½xᵀGx − xᵀb + λ‖x‖₁`.
pub fn objective_value<G: GramApply + ?Sized>(
    op: &G,
    x: &[f64],
    aty: &[f64],
    lambda: f64,
    ctr: &mut OpCounter,
) -> Result<f64> {
    let gx = op.apply(x, ctr)?;
    ctr.mul_add(2 * x.len());
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    Ok(0.5 * dot(x, &gx) - dot(x, aty) + lambda * l1)
}
