use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rankmap::cssd::BatchOmp;
use rankmap::distexec::{plan_graph_partition, plan_matrix_partition, DistributedOperator, Plan, Schedule};
use rankmap::solvers::GramFlow;
use rankmap::{decompose, CssdConfig, GramApply, GramOperator, OpCounter};
use rankmap_bench::{factor, low_rank, subspaces};

fn gram_apply(c: &mut Criterion) {
    let mut g = c.benchmark_group("gram_apply");
    for &(m, n) in &[(128usize, 4000usize), (256, 16000)] {
        let a = subspaces(m, n, 8, 4, 1);
        let f = factor(&a, 0.0, 1);
        let x: Vec<f64> = (0..n).map(|j| (j as f64).sin()).collect();
        g.throughput(Throughput::Elements(n as u64));
        let full = GramOperator::full(&a);
        g.bench_with_input(BenchmarkId::new("full", n), &x, |b, x| {
            b.iter(|| full.apply(black_box(x), &mut OpCounter::new()).unwrap())
        });
        let fact = GramOperator::factored(&f);
        g.bench_with_input(BenchmarkId::new("factored", n), &x, |b, x| {
            b.iter(|| fact.apply(black_box(x), &mut OpCounter::new()).unwrap())
        });
        let collapsed = GramOperator::factored_collapsed(&f, &mut OpCounter::new()).unwrap();
        g.bench_with_input(BenchmarkId::new("collapsed", n), &x, |b, x| {
            b.iter(|| collapsed.apply(black_box(x), &mut OpCounter::new()).unwrap())
        });
    }
    g.finish();
}

fn distributed(c: &mut Criterion) {
    let mut g = c.benchmark_group("distributed_apply");
    let a = low_rank(64, 8000, 16, 2);
    let f = factor(&a, 0.05, 2);
    let x = vec![1.0; 8000];
    for n_c in [1, 4, 8] {
        let plans = [
            ("matrix", Plan::Matrix(plan_matrix_partition(8000, n_c).unwrap())),
            ("graph", Plan::Graph(plan_graph_partition(&f.coeffs, n_c).unwrap())),
        ];
        for (name, plan) in &plans {
            for (label, schedule) in [("seq", Schedule::Sequential), ("threads", Schedule::Threaded)] {
                let op = DistributedOperator::new(plan, &f, GramFlow::FourStep, schedule).unwrap();
                g.bench_function(BenchmarkId::new(format!("{name}/{label}"), n_c), |b| {
                    b.iter(|| op.apply(black_box(&x), &mut OpCounter::new()).unwrap())
                });
            }
        }
    }
    g.finish();
}

fn omp(c: &mut Criterion) {
    let mut g = c.benchmark_group("batch_omp");
    let a = low_rank(128, 2000, 32, 3);
    let f = factor(&a, 0.0, 3);
    let coder = BatchOmp::new(&f.basis, &mut OpCounter::new()).unwrap();
    for delta in [0.1, 0.01, 0.0] {
        g.bench_function(BenchmarkId::from_parameter(delta), |b| {
            b.iter(|| {
                let mut ctr = OpCounter::new();
                for j in 0..64 {
                    black_box(coder.encode(a.col(j), delta, f.rank(), &mut ctr).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn decomposition(c: &mut Criterion) {
    let mut g = c.benchmark_group("decompose");
    g.sample_size(10);
    let a = subspaces(128, 5000, 10, 5, 4);
    for delta in [0.2, 0.05, 0.0] {
        let cfg = CssdConfig::for_matrix(&a, delta, 4);
        g.bench_function(BenchmarkId::from_parameter(delta), |b| b.iter(|| decompose(black_box(&a), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gram_apply, distributed, omp, decomposition);
criterion_main!(benches);
