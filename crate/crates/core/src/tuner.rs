//! Choosing the decomposition tolerance from a learning-error target.
//!
//! Starting from `delta_d_max`, the tolerance is halved until the evaluated
//! learning error meets the target. Column selection is resumed between
//! rounds, so every round's basis extends the previous one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cssd::{encode_columns, ColumnSelector, Factorization, Selection};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, OpCounter};
use crate::solvers::{
    fista_solve, learning_error, power_method, GramOperator, SolverConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub delta_d_max: f64,
    /// Halving stops once the tolerance drops below this floor.
    pub delta_d_min: f64,
    /// `f64::INFINITY` accepts the first round.
    pub target_delta_l: f64,
    pub max_rounds: usize,
    /// Encode and evaluate every tolerance of the halving sequence at once,
    /// then keep the largest one meeting the target.
    pub parallel: bool,
    pub batch_size: usize,
    pub max_cols: usize,
    pub max_atoms_per_col: usize,
    pub seed: u64,
}

impl TuneConfig {
    pub fn new(target_delta_l: f64, max_cols: usize, seed: u64) -> Self {
        TuneConfig {
            delta_d_max: 0.4,
            delta_d_min: 1e-3,
            target_delta_l,
            max_rounds: 64,
            parallel: false,
            batch_size: (max_cols / 10).max(1),
            max_cols,
            max_atoms_per_col: max_cols,
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0 < self.delta_d_min && self.delta_d_min < self.delta_d_max && self.delta_d_max < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must satisfy 0 < min < max < 1, got min = {}, max = {}",
                self.delta_d_min, self.delta_d_max
            )));
        }
        if !(self.target_delta_l > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning-error target must be positive, got {}",
                self.target_delta_l
            )));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("at least one tuning round is needed".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.max_cols || self.max_cols > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= batch ({}) <= max_cols ({}) <= n ({n})",
                self.batch_size, self.max_cols
            )));
        }
        Ok(())
    }

    /// `delta_d_max, delta_d_max/2, …` down to the floor, capped at `max_rounds`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut d = self.delta_d_max;
        while d >= self.delta_d_min && out.len() < self.max_rounds {
            out.push(d);
            d /= 2.0;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRound {
    pub delta_d: f64,
    pub delta_l: f64,
    pub rank: usize,
    pub nnz: usize,
    pub achieved_delta: f64,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub delta_d: f64,
    pub factorization: Factorization,
    pub trace: Vec<TuneRound>,
}

fn round(f: &Factorization, delta_d: f64, delta_l: f64) -> TuneRound {
    TuneRound {
        delta_d,
        delta_l,
        rank: f.rank(),
        nnz: f.nnz(),
        achieved_delta: f.achieved_delta,
        selected: f.selected.clone(),
    }
}

fn unreachable(trace: &[TuneRound]) -> Error {
    let best = trace
        .iter()
        .min_by(|a, b| a.delta_l.total_cmp(&b.delta_l))
        .expect("at least one round");
    Error::TargetUnreachable {
        best_delta_d: best.delta_d,
        best_delta_l: best.delta_l,
    }
}

pub fn tune<E>(a: &DenseMatrix, cfg: &TuneConfig, evaluate: E) -> Result<TuneOutcome>
where
    E: Fn(&Factorization) -> Result<f64> + Sync,
{
    tune_counted(a, cfg, evaluate, &mut OpCounter::new())
}

pub fn tune_counted<E>(
    a: &DenseMatrix,
    cfg: &TuneConfig,
    evaluate: E,
    ctr: &mut OpCounter,
) -> Result<TuneOutcome>
where
    E: Fn(&Factorization) -> Result<f64> + Sync,
{
    cfg.validate(a.cols())?;
    let schedule = cfg.schedule();
    let mut selector = ColumnSelector::new(a, cfg.batch_size, cfg.seed)?;
    let encode = |sel: &Selection, d: f64, c: &mut OpCounter| {
        encode_columns(a, sel, d, cfg.max_atoms_per_col, cfg.seed, c)
    };

    if cfg.parallel {
        let mut selections = Vec::with_capacity(schedule.len());
        for &d in &schedule {
            selector.advance(d, cfg.max_cols, ctr)?;
            selections.push(selector.snapshot());
        }
        let evaluated: Vec<Result<(Factorization, f64, OpCounter)>> = selections
            .par_iter()
            .zip(&schedule)
            .map(|(sel, &d)| {
                let mut c = OpCounter::new();
                let f = encode(sel, d, &mut c)?;
                let dl = evaluate(&f)?;
                Ok((f, dl, c))
            })
            .collect();
        let mut trace = Vec::with_capacity(schedule.len());
        let mut chosen = None;
        for (item, &d) in evaluated.into_iter().zip(&schedule) {
            let (f, dl, c) = item?;
            *ctr += c;
            trace.push(round(&f, d, dl));
            if chosen.is_none() && dl <= cfg.target_delta_l {
                chosen = Some((d, f));
            }
        }
        return match chosen {
            Some((delta_d, factorization)) => Ok(TuneOutcome {
                delta_d,
                factorization,
                trace,
            }),
            None => Err(unreachable(&trace)),
        };
    }

    let mut trace = Vec::with_capacity(schedule.len());
    for &d in &schedule {
        selector.advance(d, cfg.max_cols, ctr)?;
        let f = encode(&selector.snapshot(), d, ctr)?;
        let dl = evaluate(&f)?;
        trace.push(round(&f, d, dl));
        if dl <= cfg.target_delta_l {
            return Ok(TuneOutcome {
                delta_d: d,
                factorization: f,
                trace,
            });
        }
    }
    Err(unreachable(&trace))
}

/// Learning error of the top `num_eigs` eigenvalues against those of the
/// full Gram operator, which are computed once up front.
pub fn eigenvalue_evaluator(
    a: &DenseMatrix,
    num_eigs: usize,
    cfg: SolverConfig,
) -> Result<impl Fn(&Factorization) -> Result<f64> + Sync> {
    let reference = power_method(&GramOperator::full(a), num_eigs, &cfg, &mut OpCounter::new())?;
    let values = reference.values;
    Ok(move |f: &Factorization| {
        let approx = power_method(&GramOperator::factored(f), num_eigs, &cfg, &mut OpCounter::new())?;
        learning_error(&values, &approx.values)
    })
}

/// Mean learning error of FISTA solutions over `probes` Gaussian signals,
/// solved concurrently.
pub fn fista_evaluator(
    a: &DenseMatrix,
    probes: usize,
    cfg: SolverConfig,
    seed: u64,
) -> Result<impl Fn(&Factorization) -> Result<f64> + Sync> {
    if probes == 0 {
        return Err(Error::InvalidArgument("need at least one probe signal".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signals: Vec<Vec<f64>> = (0..probes)
        .map(|_| (0..a.rows()).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let full = GramOperator::full(a);
    let references: Vec<(Vec<f64>, Vec<f64>)> = signals
        .par_iter()
        .map(|y| {
            let mut c = OpCounter::new();
            let aty = full.rhs(y, &mut c)?;
            let x = fista_solve(&full, &aty, &cfg, &mut c)?.x;
            Ok((y.clone(), x))
        })
        .collect::<Result<_>>()?;
    Ok(move |f: &Factorization| {
        let op = GramOperator::factored(f);
        let errs: Vec<f64> = references
            .par_iter()
            .map(|(y, x_ref)| {
                let mut c = OpCounter::new();
                let aty = op.rhs(y, &mut c)?;
                let x = fista_solve(&op, &aty, &cfg, &mut c)?.x;
                learning_error(x_ref, &x)
            })
            .collect::<Result<_>>()?;
        Ok(errs.iter().sum::<f64>() / errs.len() as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate, DatasetKind, DatasetSpec};

    fn low_rank() -> DenseMatrix {
        generate(&DatasetSpec {
            kind: DatasetKind::LowRank { rank: 3 },
            m: 12,
            n: 60,
            noise: 0.0,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn halving_schedule() {
        let cfg = TuneConfig::new(0.1, 10, 0);
        let s = cfg.schedule();
        assert_eq!(s[..4], [0.4, 0.2, 0.1, 0.05]);
        assert_eq!(s.len(), 9);
        assert!(*s.last().unwrap() >= 1e-3);
    }

    #[test]
    fn infinite_target_stops_after_one_round() {
        let a = low_rank();
        let out = tune(&a, &TuneConfig::new(f64::INFINITY, 10, 1), |_| Ok(1.0)).unwrap();
        assert_eq!(out.delta_d, 0.4);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn unreachable_target_reports_best_round() {
        let a = low_rank();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let err = tune(&a, &TuneConfig::new(1e-3, 10, 1), |_| {
            let k = calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(1.0 / (k + 1) as f64)
        })
        .unwrap_err();
        match err {
            Error::TargetUnreachable { best_delta_l, best_delta_d } => {
                assert_eq!(best_delta_l, 1.0 / 9.0);
                assert_eq!(best_delta_d, 0.4 / 256.0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn parallel_matches_sequential_choice() {
        let a = low_rank();
        let eval = |f: &Factorization| Ok(f.achieved_delta);
        let mut cfg = TuneConfig::new(0.05, 10, 2);
        let seq = tune(&a, &cfg, eval).unwrap();
        cfg.parallel = true;
        let par = tune(&a, &cfg, eval).unwrap();
        assert_eq!(seq.delta_d, par.delta_d);
        assert_eq!(seq.factorization, par.factorization);
    }

    #[test]
    fn rejects_bad_config() {
        let a = low_rank();
        let mut cfg = TuneConfig::new(0.0, 10, 0);
        assert!(tune(&a, &cfg, |_| Ok(0.0)).is_err());
        cfg.target_delta_l = 0.1;
        cfg.delta_d_min = 0.5;
        assert!(tune(&a, &cfg, |_| Ok(0.0)).is_err());
    }
}
