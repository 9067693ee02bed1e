use rankmap::cssd::{decompose, CssdConfig};
use rankmap::datasets::{generate, generate_labeled, DatasetKind, DatasetSpec};
use rankmap::distexec::{
    compare_models, full_baseline_report, plan_graph_partition, plan_matrix_partition, run_distributed, ExecModel,
    Plan, Schedule,
};
use rankmap::experiments::{least_squares_coefficients, memory_table};
use rankmap::solvers::{classify, fista_solve, power_method, GramApply, GramFlow, GramOperator, SolverConfig};
use rankmap::tuner::{tune, TuneConfig};
use rankmap::{DenseMatrix, Error, OpCounter, SparseColMatrix};

fn spec(kind: DatasetKind, m: usize, n: usize, noise: f64, seed: u64) -> DatasetSpec {
    DatasetSpec {
        kind,
        m,
        n,
        noise,
        seed,
    }
}

#[test]
fn generated_low_rank_has_exact_rank() {
    let a = generate(&spec(DatasetKind::LowRank { rank: 5 }, 20, 100, 0.0, 1)).unwrap();
    let s = nalgebra::DMatrix::from_column_slice(20, 100, a.as_slice()).singular_values();
    let mut s: Vec<f64> = s.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    assert!(s[5] < 1e-10 * s[0]);
    assert!(s[4] > 1e-3 * s[0]);
}

#[test]
fn union_of_subspaces_codes_stay_in_their_subspace() {
    let (a, labels) =
        generate_labeled(&spec(DatasetKind::UnionOfSubspaces { subspaces: 3, dim: 4 }, 40, 300, 0.0, 2)).unwrap();
    let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, 2)).unwrap();
    let atom_labels: Vec<u32> = f.selected.iter().map(|&j| labels[j]).collect();
    for j in 0..f.cols() {
        let (rows, vals) = f.coeffs.col(j);
        assert!(rows.len() <= 4);
        let mut x = vec![0.0; f.rank()];
        for (&r, &v) in rows.iter().zip(vals) {
            x[r] = v;
        }
        assert_eq!(classify(&x, &atom_labels).unwrap().class, labels[j]);
    }
}

#[test]
fn memory_table_orders_representations() {
    let a = generate(&spec(DatasetKind::UnionOfSubspaces { subspaces: 5, dim: 4 }, 64, 1000, 0.0, 3)).unwrap();
    let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, 3)).unwrap();
    let t = memory_table(&a, &f).unwrap();
    assert!(t.rankmap < t.least_squares && t.least_squares < t.original);
    assert!(t.beneficial);

    // Unstructured data coded with every atom: no gain once indices count.
    let mut rng_data = Vec::with_capacity(8 * 200);
    for k in 0..8 * 200 {
        rng_data.push(((k * 7919) % 1013) as f64 / 1013.0 - 0.5);
    }
    let b = DenseMatrix::new(8, 200, rng_data).unwrap();
    let g = decompose(&b, &CssdConfig::for_matrix(&b, 0.0, 3)).unwrap();
    let t = memory_table(&b, &g).unwrap();
    assert!(t.rankmap_indexed >= t.least_squares);
    assert!(!t.beneficial);
    let v = least_squares_coefficients(&b, &g.basis, &mut OpCounter::new()).unwrap();
    assert_eq!((v.rows(), v.cols()), (g.rank(), 200));
}

#[test]
fn tuner_rounds_extend_and_tighten() {
    let a = generate(&spec(DatasetKind::LowRank { rank: 10 }, 40, 400, 1e-2, 4)).unwrap();
    let cfg = TuneConfig::new(1e-2, 40, 4);
    let out = tune(&a, &cfg, |f| Ok(f.achieved_delta)).unwrap();
    for r in &out.trace {
        assert!(r.achieved_delta <= r.delta_d);
    }
    for w in out.trace.windows(2) {
        assert!(w[1].selected.starts_with(&w[0].selected));
        assert_eq!(w[1].delta_d, w[0].delta_d / 2.0);
    }
    assert!(out.factorization.achieved_delta <= 1e-2);
}

#[test]
fn tuner_on_exact_rank_reaches_tiny_error() {
    let a = generate(&spec(DatasetKind::LowRank { rank: 4 }, 20, 200, 0.0, 5)).unwrap();
    let mut cfg = TuneConfig::new(1e-9, 20, 5);
    cfg.delta_d_min = 1e-12;
    cfg.max_rounds = 64;
    let out = tune(&a, &cfg, |f| Ok(f.achieved_delta)).unwrap();
    assert!(out.factorization.rank() >= 4);
    assert!(out.trace.last().unwrap().delta_l <= 1e-9);
}

#[test]
fn tuner_reports_unreachable_target() {
    let a = generate(&spec(DatasetKind::LowRank { rank: 4 }, 20, 200, 0.0, 6)).unwrap();
    let err = tune(&a, &TuneConfig::new(1e-3, 20, 6), |_| Ok(0.5)).unwrap_err();
    assert!(matches!(err, Error::TargetUnreachable { best_delta_l, .. } if best_delta_l == 0.5));
}

fn block_diagonal(n_c: usize, per_block: usize, n: usize) -> SparseColMatrix {
    let chunks = plan_matrix_partition(n, n_c).unwrap().chunks;
    let mut cols = Vec::new();
    for (w, r) in chunks.iter().enumerate() {
        for j in r.clone() {
            cols.push((0..per_block).map(|k| (w * per_block + k, 1.0 + (j % 3) as f64)).collect());
        }
    }
    SparseColMatrix::from_columns(n_c * per_block, cols).unwrap()
}

#[test]
fn graph_model_needs_no_replica_traffic_on_block_diagonal_codes() {
    let (n_c, per_block, n) = (4, 4, 80);
    let a = generate(&spec(DatasetKind::BlockDiagonalV { blocks: n_c, dim: per_block }, 40, n, 0.0, 7)).unwrap();
    let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, 7)).unwrap();
    let v = block_diagonal(n_c, per_block, n);
    assert_eq!(plan_graph_partition(&v, n_c).unwrap().total_replicas(), v.rows());

    let graph = Plan::Graph(plan_graph_partition(&f.coeffs, n_c).unwrap());
    let matrix = Plan::Matrix(plan_matrix_partition(n, n_c).unwrap());
    let x = vec![1.0; n];
    let (_, gr) = run_distributed(&graph, &f, GramFlow::FourStep, Schedule::Sequential, |op| {
        op.apply(&x, &mut OpCounter::new())
    })
    .unwrap();
    let (_, mr) = run_distributed(&matrix, &f, GramFlow::FourStep, Schedule::Sequential, |op| {
        op.apply(&x, &mut OpCounter::new())
    })
    .unwrap();
    let Plan::Graph(g) = &graph else { unreachable!() };
    assert_eq!(gr.counters.cross_worker_values, 2 * (g.total_replicas() - g.l) as u64);
    assert!(gr.counters.communicated_values <= mr.counters.communicated_values);
}

#[test]
fn model_comparison_trends() {
    let a = generate(&spec(DatasetKind::LowRank { rank: 16 }, 64, 600, 0.0, 8)).unwrap();
    let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, 8)).unwrap();
    let rows = compare_models(&f, &[1, 2, 4], 3, Schedule::Sequential).unwrap();
    assert_eq!(rows.len(), 6);
    let at = |model, n_c| rows.iter().find(|r| r.model == model && r.n_c == n_c).unwrap();
    // Same arithmetic in every configuration.
    let flops = at(ExecModel::Matrix, 1).multiplications_per_iteration;
    assert!(rows.iter().all(|r| r.multiplications_per_iteration == flops));
    // Dense codes: the graph model pays for its edges.
    assert!(at(ExecModel::Graph, 4).total_memory > at(ExecModel::Matrix, 4).total_memory);
    for n_c in [1, 2, 4] {
        assert_eq!(at(ExecModel::Matrix, n_c).communicated_per_iteration, (2 * 16 * n_c) as u64);
    }

    let base = full_baseline_report(64, 600, 3, None);
    assert_eq!(base.counters.multiplications, 3 * 2 * 64 * 600);
    let json = base.to_json().unwrap();
    for key in ["\"model\"", "\"n_c\"", "\"l\"", "\"nnz_V\"", "\"counters\"", "\"wall_time_s\""] {
        assert!(json.contains(key), "{key} missing from {json}");
    }
}

#[test]
fn matrix_model_traffic_grows_with_rank() {
    let mut last = 0;
    for r in [4, 8, 16] {
        let a = generate(&spec(DatasetKind::LowRank { rank: r }, 40, 200, 0.0, 9)).unwrap();
        let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, 9)).unwrap();
        let rows = compare_models(&f, &[4], 1, Schedule::Threaded).unwrap();
        let m = rows.iter().find(|r| r.model == ExecModel::Matrix).unwrap();
        let g = rows.iter().find(|r| r.model == ExecModel::Graph).unwrap();
        assert_eq!(m.communicated_per_iteration, (8 * r) as u64);
        assert!(g.communicated_per_iteration <= 2 * g.total_replicas.unwrap() as u64);
        assert!(m.communicated_per_iteration > last);
        last = m.communicated_per_iteration;
    }
}

#[test]
fn factored_solvers_track_full_ones() {
    let a = generate(&spec(DatasetKind::LowRank { rank: 6 }, 30, 150, 0.0, 10)).unwrap();
    let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, 10)).unwrap();
    let (full, fact) = (GramOperator::full(&a), GramOperator::factored(&f));
    let cfg = SolverConfig {
        max_iters: 10_000,
        tolerance: 1e-11,
        ..SolverConfig::default()
    };
    let e1 = power_method(&full, 4, &cfg, &mut OpCounter::new()).unwrap();
    let e2 = power_method(&fact, 4, &cfg, &mut OpCounter::new()).unwrap();
    for (x, y) in e1.values.iter().zip(&e2.values) {
        assert!((x - y).abs() <= 1e-8 * x);
    }
    let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    let c = SolverConfig {
        lambda: 0.5,
        max_iters: 3000,
        tolerance: 1e-12,
        ..SolverConfig::default()
    };
    let x1 = fista_solve(&full, &full.rhs(&y, &mut OpCounter::new()).unwrap(), &c, &mut OpCounter::new()).unwrap();
    let x2 = fista_solve(&fact, &fact.rhs(&y, &mut OpCounter::new()).unwrap(), &c, &mut OpCounter::new()).unwrap();
    let err = rankmap::solvers::learning_error(&x1.x, &x2.x).unwrap();
    assert!(err < 1e-6, "learning error {err}");
}
