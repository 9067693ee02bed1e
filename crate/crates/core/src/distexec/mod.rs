//! In-process simulation of the two distributed execution models for the
//! factored Gram operator, with exact communication, flop and memory tallies.

mod exec;
mod plan;
mod report;

pub use exec::{memory_layout, run_distributed, DistributedOperator, Plan, Schedule};
pub use plan::{plan_graph_partition, plan_matrix_partition, GraphPlan, PartitionPlan};
pub use report::{
    CostCounters, CostReport, ExecModel, Message, NodeId, Tag, MEMORY_CONVENTION,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cssd::Factorization;
use crate::error::Result;
use crate::linalg::{norm2, OpCounter};
use crate::solvers::{GramApply, GramFlow, GramOperator};

/// Serial report for the uncompressed `AᵀA` baseline on one node.
pub fn full_baseline_report(m: usize, n: usize, applies: u64, wall_time_s: Option<f64>) -> CostReport {
    let per = 2 * (m * n) as u64;
    CostReport {
        model: ExecModel::Full,
        n_c: 1,
        l: 0,
        nnz_v: 0,
        counters: CostCounters {
            multiplications: per * applies,
            additions: per * applies,
            communicated_values: 0,
            cross_worker_values: 0,
            messages: 0,
            applies,
            memory_entries: vec![(m * n + n + m) as u64],
            memory_entries_total: (m * n + n + m) as u64,
            index_entries: vec![0],
        },
        wall_time_s,
    }
}

/// One row of a model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: ExecModel,
    pub n_c: usize,
    pub l: usize,
    pub nnz_v: usize,
    pub density: f64,
    pub iterations: usize,
    pub communicated_per_iteration: u64,
    pub cross_worker_per_iteration: u64,
    pub multiplications_per_iteration: u64,
    pub max_worker_memory: u64,
    pub central_memory: u64,
    pub total_memory: u64,
    pub total_replicas: Option<usize>,
    pub wall_time_s: f64,
}

/// Runs `iterations` normalised power steps under both models for every
/// worker count.
pub fn compare_models(
    factors: &Factorization,
    n_c_list: &[usize],
    iterations: usize,
    schedule: Schedule,
) -> Result<Vec<ModelRow>> {
    let n = factors.cols();
    let density = factors.nnz() as f64 / (factors.rank() * n).max(1) as f64;
    let mut rows = Vec::with_capacity(2 * n_c_list.len());
    for &n_c in n_c_list {
        let plans = [
            Plan::Matrix(plan_matrix_partition(n, n_c)?),
            Plan::Graph(plan_graph_partition(&factors.coeffs, n_c)?),
        ];
        for plan in &plans {
            let (_, report) = run_distributed(plan, factors, GramFlow::FourStep, schedule, |op| {
                power_steps(op, iterations)
            })?;
            let it = iterations.max(1) as u64;
            rows.push(ModelRow {
                model: report.model,
                n_c,
                l: report.l,
                nnz_v: report.nnz_v,
                density,
                iterations,
                communicated_per_iteration: report.counters.communicated_values / it,
                cross_worker_per_iteration: report.counters.cross_worker_values / it,
                multiplications_per_iteration: report.counters.multiplications / it,
                max_worker_memory: report.max_worker_memory(),
                central_memory: report.central_memory(),
                total_memory: report.counters.memory_entries_total,
                total_replicas: match plan {
                    Plan::Graph(g) => Some(g.total_replicas()),
                    Plan::Matrix(_) => None,
                },
                wall_time_s: report.wall_time_s.unwrap_or(0.0),
            });
        }
    }
    Ok(rows)
}

/// Serial factored reference for a comparison table.
pub fn serial_factored_row(factors: &Factorization, iterations: usize) -> Result<ModelRow> {
    let op = GramOperator::factored(factors);
    let start = Instant::now();
    let mut ctr = OpCounter::new();
    let x0 = vec![1.0 / (factors.cols() as f64).sqrt(); factors.cols()];
    let mut x = x0;
    for _ in 0..iterations {
        x = op.apply(&x, &mut ctr)?;
        normalise(&mut x);
    }
    let it = iterations.max(1) as u64;
    let mem = (factors.nnz() + factors.rank() * factors.rows() + factors.cols() + factors.rows()) as u64;
    Ok(ModelRow {
        model: ExecModel::Full,
        n_c: 1,
        l: factors.rank(),
        nnz_v: factors.nnz(),
        density: factors.nnz() as f64 / (factors.rank() * factors.cols()).max(1) as f64,
        iterations,
        communicated_per_iteration: 0,
        cross_worker_per_iteration: 0,
        multiplications_per_iteration: op.multiplications_per_apply().min(ctr.multiplications / it),
        max_worker_memory: mem,
        central_memory: 0,
        total_memory: mem,
        total_replicas: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn power_steps<G: GramApply + ?Sized>(op: &G, iterations: usize) -> Result<Vec<f64>> {
    let n = op.dim();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut ctr = OpCounter::new();
    for _ in 0..iterations {
        x = op.apply(&x, &mut ctr)?;
        normalise(&mut x);
    }
    Ok(x)
}

fn normalise(x: &mut [f64]) {
    let nx = norm2(x);
    if nx > 0.0 {
        x.iter_mut().for_each(|v| *v /= nx);
    }
}
