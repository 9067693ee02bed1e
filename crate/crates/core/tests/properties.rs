use proptest::prelude::*;
use rankmap::cssd::{decompose, CssdConfig};
use rankmap::datasets::{generate, DatasetKind, DatasetSpec};
use rankmap::distexec::{plan_graph_partition, plan_matrix_partition, DistributedOperator, Plan, Schedule};
use rankmap::io::{decode_raw, encode_raw, matrix_market_coordinate, read_sparse_matrix_market_str};
use rankmap::solvers::{classify, soft_threshold, GramApply, GramFlow, GramOperator};
use rankmap::{DenseMatrix, OpCounter, SparseColMatrix};

fn dense(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-1e6f64..1e6, m * n).prop_map(move |d| DenseMatrix::new(m, n, d).unwrap())
    })
}

fn sparse() -> impl Strategy<Value = SparseColMatrix> {
    (1usize..12, 1usize..60).prop_flat_map(|(l, n)| {
        prop::collection::vec(prop::collection::btree_map(0..l, 0.1f64..5.0, 0..=l), n).prop_map(move |cols| {
            SparseColMatrix::from_columns(l, cols.into_iter().map(|c| c.into_iter().collect()).collect()).unwrap()
        })
    })
}

fn low_rank(m: usize, n: usize, r: usize, seed: u64) -> DenseMatrix {
    generate(&DatasetSpec {
        kind: DatasetKind::LowRank { rank: r },
        m,
        n,
        noise: 0.0,
        seed,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raw_round_trip(a in dense(9, 9)) {
        let back = decode_raw(&encode_raw(&a).unwrap()).unwrap();
        prop_assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn coordinate_round_trip(v in sparse()) {
        prop_assert_eq!(read_sparse_matrix_market_str(&matrix_market_coordinate(&v)).unwrap(), v);
    }

    #[test]
    fn balanced_partition(n in 1usize..500, n_c in 1usize..40) {
        prop_assume!(n_c <= n);
        let plan = plan_matrix_partition(n, n_c).unwrap();
        let sizes: Vec<usize> = plan.chunks.iter().map(|r| r.len()).collect();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(plan.chunks.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn chunked_accumulation_matches_serial(v in sparse(), cut in 0usize..60) {
        let n = v.cols();
        let cut = cut.min(n);
        let x: Vec<f64> = (0..n).map(|j| (j as f64 * 0.7).cos()).collect();
        let serial = v.matvec(&x, false, &mut OpCounter::new()).unwrap();
        let mut acc = vec![0.0; v.rows()];
        v.accumulate_columns(0..cut, &x[..cut], &mut acc, &mut OpCounter::new());
        v.accumulate_columns(cut..n, &x[cut..], &mut acc, &mut OpCounter::new());
        prop_assert_eq!(acc, serial);
    }

    #[test]
    fn replica_bound_and_edge_ownership(v in sparse(), n_c in 1usize..10) {
        let g = plan_graph_partition(&v, n_c).unwrap();
        let l = v.rows();
        prop_assert!(l <= g.total_replicas() && g.total_replicas() <= l * n_c);
        prop_assert_eq!(g.edges_per_worker.iter().sum::<usize>(), v.nnz());
    }

    #[test]
    fn soft_threshold_shrinks(v in prop::collection::vec(-10.0f64..10.0, 0..20), tau in 0.0f64..5.0) {
        let s = soft_threshold(&v, tau);
        for (a, b) in v.iter().zip(&s) {
            prop_assert!((b.abs() - (a.abs() - tau).max(0.0)).abs() < 1e-12);
            prop_assert!(*b == 0.0 || b.signum() == a.signum());
        }
    }

    #[test]
    fn classify_picks_largest_mass(x in prop::collection::vec(-3.0f64..3.0, 1..30), k in 1u32..5) {
        let labels: Vec<u32> = (0..x.len() as u32).map(|i| i % k).collect();
        let c = classify(&x, &labels).unwrap();
        let best = c.scores[&c.class];
        prop_assert!(c.scores.values().all(|&s| s <= best));
        prop_assert!(c.scores.iter().all(|(&lab, &s)| s < best || lab >= c.class));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_meets_tolerance(seed in 0u64..1000, r in 1usize..6, delta in prop::sample::select(vec![0.0, 0.01, 0.1, 0.3])) {
        let a = low_rank(12, 40, r, seed);
        let f = decompose(&a, &CssdConfig::for_matrix(&a, delta, seed)).unwrap();
        prop_assert!(f.meets_tolerance(), "achieved {} for delta {}", f.achieved_delta, delta);
        prop_assert!(f.rank() <= r);
        let mut sel = f.selected.clone();
        sel.sort_unstable();
        sel.dedup();
        prop_assert_eq!(sel.len(), f.rank());
        for j in 0..f.cols() {
            prop_assert!(f.coeffs.col_nnz(j) <= f.rank());
        }
    }

    #[test]
    fn distributed_apply_is_bitwise_serial(seed in 0u64..1000, n_c in 1usize..9, threaded in any::<bool>()) {
        let a = low_rank(10, 30, 3, seed);
        let f = decompose(&a, &CssdConfig::for_matrix(&a, 0.0, seed)).unwrap();
        let x: Vec<f64> = (0..30).map(|j| ((j as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let serial = GramOperator::factored(&f).apply(&x, &mut OpCounter::new()).unwrap();
        let schedule = if threaded { Schedule::Threaded } else { Schedule::Sequential };
        for plan in [
            Plan::Matrix(plan_matrix_partition(30, n_c).unwrap()),
            Plan::Graph(plan_graph_partition(&f.coeffs, n_c).unwrap()),
        ] {
            let op = DistributedOperator::new(&plan, &f, GramFlow::FourStep, schedule).unwrap();
            let mut ctr = OpCounter::new();
            prop_assert_eq!(op.apply(&x, &mut ctr).unwrap(), serial.clone());
            let report = op.report(None);
            prop_assert_eq!(ctr.multiplications, 2 * (f.nnz() + f.rank() * 10) as u64);
            if let Plan::Matrix(_) = plan {
                prop_assert_eq!(report.counters.communicated_values, (2 * f.rank() * n_c) as u64);
            }
        }
    }
}
