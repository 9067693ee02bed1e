use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use rankmap::cssd::{decompose_counted, CssdConfig, Factorization};
use rankmap::datasets::{generate_labeled, DatasetKind, DatasetSpec};
use rankmap::distexec::{
    compare_models, full_baseline_report, plan_graph_partition, plan_matrix_partition, serial_factored_row,
    CostReport, DistributedOperator, ModelRow, Plan, Schedule, MEMORY_CONVENTION,
};
use rankmap::experiments::{delta_sweep, memory_table};
use rankmap::io::{load_factorization, load_matrix, save_factorization, save_matrix, MatrixFormat};
use rankmap::solvers::{
    fista_solve, learning_error, power_method, psnr, EigenResult, GramApply, GramFlow, GramOperator, SolverConfig,
};
use rankmap::tuner::{eigenvalue_evaluator, fista_evaluator, tune_counted, TuneConfig, TuneRound};
use rankmap::{DenseMatrix, OpCounter};

use crate::output::{ensure_dir, write_csv, write_json, write_values_csv, Timing, REPORT_FILE};
use crate::{
    BenchCommand, Cli, Command, CssdArgs, DecomposeArgs, Evaluator, GenArgs, Kind, Model, OperatorArgs,
    SolveCommand, TuneArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers as usize)
        .build_global()
        .context("configuring the thread pool")?;
    let ctx = Ctx {
        seed: cli.seed,
        workers: cli.workers as usize,
    };
    match cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Decompose(a) => decompose(&ctx, a),
        Command::Solve { solver } => solve(&ctx, solver),
        Command::Tune(a) => tune(&ctx, a),
        Command::Bench { table } => bench(&ctx, table),
    }
}

struct Ctx {
    seed: u64,
    workers: usize,
}

fn load(path: &Path) -> Result<DenseMatrix> {
    load_matrix(path, MatrixFormat::from_path(path)).with_context(|| format!("reading {}", path.display()))
}

fn cssd_config(a: &DenseMatrix, args: &CssdArgs, seed: u64) -> CssdConfig {
    let mut cfg = CssdConfig::for_matrix(a, args.delta_d, seed);
    if let Some(c) = args.max_cols {
        cfg = CssdConfig::new(args.delta_d, c, seed);
    }
    if let Some(b) = args.batch_size {
        cfg = cfg.with_batch_size(b);
    }
    if let Some(k) = args.max_atoms {
        cfg = cfg.with_max_atoms(k);
    }
    cfg
}

#[derive(Serialize)]
struct FactorSummary {
    m: usize,
    n: usize,
    l: usize,
    nnz_v: usize,
    /// `nnz(V) / (m·n)`.
    density_ratio: f64,
    /// `nnz(V) / nnz(A)`.
    nnz_ratio_to_data: Option<f64>,
    delta_d: f64,
    achieved_delta: f64,
    zero_columns: usize,
}

fn summarize(f: &Factorization, a: Option<&DenseMatrix>) -> FactorSummary {
    let nnz_a = a.map(|a| a.as_slice().iter().filter(|v| **v != 0.0).count().max(1));
    FactorSummary {
        m: f.rows(),
        n: f.cols(),
        l: f.rank(),
        nnz_v: f.nnz(),
        density_ratio: f.density_ratio(),
        nnz_ratio_to_data: nnz_a.map(|z| f.nnz() as f64 / z as f64),
        delta_d: f.delta_d,
        achieved_delta: f.achieved_delta,
        zero_columns: f.zero_columns.len(),
    }
}

fn gen(ctx: &Ctx, a: GenArgs) -> Result<()> {
    let kind = match a.kind {
        Kind::LowRank => DatasetKind::LowRank { rank: a.rank },
        Kind::UnionOfSubspaces => DatasetKind::UnionOfSubspaces {
            subspaces: a.subspaces,
            dim: a.rank,
        },
        Kind::BlockDiagonalV => DatasetKind::BlockDiagonalV {
            blocks: a.subspaces,
            dim: a.rank,
        },
    };
    let spec = DatasetSpec {
        kind,
        m: a.m,
        n: a.n,
        noise: a.noise,
        seed: ctx.seed,
    };
    let (data, labels) = generate_labeled(&spec)?;
    if let Some(dir) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    save_matrix(&a.output, &data, MatrixFormat::from_path(&a.output))?;
    if let Some(path) = &a.labels {
        #[derive(Serialize)]
        struct Label {
            column: usize,
            label: u32,
        }
        let rows: Vec<Label> = labels.iter().enumerate().map(|(column, &label)| Label { column, label }).collect();
        write_csv(path, &rows)?;
    }
    println!("{}", a.output.display());
    Ok(())
}

#[derive(Serialize)]
struct DecomposeReport {
    command: &'static str,
    input: PathBuf,
    config: CssdConfig,
    factorization: FactorSummary,
    operations: OpCounter,
    files: Vec<PathBuf>,
}

fn decompose(ctx: &Ctx, args: DecomposeArgs) -> Result<()> {
    let mut timing = Timing::default();
    let a = timing.time("load", || load(&args.input))?;
    let cfg = cssd_config(&a, &args.cssd, ctx.seed);
    let mut ops = OpCounter::new();
    let f = timing.time("decompose", || decompose_counted(&a, &cfg, &mut ops))?;
    let files = save_factorization(&args.output, &f)?;
    let report = DecomposeReport {
        command: "decompose",
        input: args.input,
        config: cfg,
        factorization: summarize(&f, Some(&a)),
        operations: ops,
        files: files.iter().filter_map(|p| p.file_name().map(PathBuf::from)).collect(),
    };
    write_json(&args.output.join(REPORT_FILE), &report)?;
    timing.write(&args.output)?;
    println!("l = {}, nnz(V) = {}, achieved delta = {:e}", f.rank(), f.nnz(), f.achieved_delta);
    Ok(())
}

/// Counts operator applications for the serial reports.
struct Counted<'a, G: ?Sized> {
    inner: &'a G,
    applies: AtomicU64,
}

impl<'a, G: GramApply + ?Sized> Counted<'a, G> {
    fn new(inner: &'a G) -> Self {
        Counted {
            inner,
            applies: AtomicU64::new(0),
        }
    }
}

impl<G: GramApply + ?Sized> GramApply for Counted<'_, G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], ctr: &mut OpCounter) -> rankmap::Result<Vec<f64>> {
        self.applies.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x, ctr)
    }
}

enum Backend {
    Full(DenseMatrix),
    Serial(Factorization),
    Distributed(Factorization, Plan),
}

#[derive(Serialize)]
struct OperatorEcho {
    model: &'static str,
    workers: usize,
    factors: Option<PathBuf>,
    data: Option<PathBuf>,
}

struct Prepared {
    backend: Backend,
    data: Option<DenseMatrix>,
    echo: OperatorEcho,
}

fn prepare(ctx: &Ctx, op: &OperatorArgs) -> Result<Prepared> {
    let model = if op.full { Some(Model::Full) } else { op.model };
    let data = op.data.as_deref().map(load).transpose()?;
    let factors = || -> Result<Factorization> {
        let dir = op.factors.as_deref().ok_or_else(|| anyhow!("--factors is required for the factored operator"))?;
        load_factorization(dir).with_context(|| format!("reading factors from {}", dir.display()))
    };
    let (backend, name) = match model {
        Some(Model::Full) => {
            let a = data.clone().ok_or_else(|| anyhow!("--data is required for the full operator"))?;
            (Backend::Full(a), "full")
        }
        None => (Backend::Serial(factors()?), "factored"),
        Some(Model::Matrix) => {
            let f = factors()?;
            let plan = Plan::Matrix(plan_matrix_partition(f.cols(), ctx.workers)?);
            (Backend::Distributed(f, plan), "matrix")
        }
        Some(Model::Graph) => {
            let f = factors()?;
            let plan = Plan::Graph(plan_graph_partition(&f.coeffs, ctx.workers)?);
            (Backend::Distributed(f, plan), "graph")
        }
    };
    if let (Some(a), Backend::Serial(f) | Backend::Distributed(f, _)) = (&data, &backend) {
        if (a.rows(), a.cols()) != (f.rows(), f.cols()) {
            bail!("data is {}×{} but the factors are {}×{}", a.rows(), a.cols(), f.rows(), f.cols());
        }
    }
    Ok(Prepared {
        backend,
        data,
        echo: OperatorEcho {
            model: name,
            workers: ctx.workers,
            factors: op.factors.clone(),
            data: op.data.clone(),
        },
    })
}

/// Runs `solve` on the selected operator and returns its result with a cost
/// report and the wall time.
fn with_operator<T>(
    backend: &Backend,
    solve: impl FnOnce(&dyn GramApply) -> rankmap::Result<T>,
) -> Result<(T, Option<CostReport>, f64)> {
    let start = std::time::Instant::now();
    Ok(match backend {
        Backend::Full(a) => {
            let full = GramOperator::full(a);
            let op = Counted::new(&full);
            let out = solve(&op)?;
            let applies = op.applies.load(Ordering::Relaxed);
            (out, Some(full_baseline_report(a.rows(), a.cols(), applies, None)), start.elapsed().as_secs_f64())
        }
        Backend::Serial(f) => {
            let out = solve(&GramOperator::factored(f))?;
            (out, None, start.elapsed().as_secs_f64())
        }
        Backend::Distributed(f, plan) => {
            let op = DistributedOperator::new(plan, f, GramFlow::FourStep, Schedule::Threaded)?;
            let out = solve(&op)?;
            (out, Some(op.report(None)), start.elapsed().as_secs_f64())
        }
    })
}

fn rhs(backend: &Backend, y: &[f64], ctr: &mut OpCounter) -> Result<Vec<f64>> {
    Ok(match backend {
        Backend::Full(a) => GramOperator::full(a).rhs(y, ctr)?,
        Backend::Serial(f) | Backend::Distributed(f, _) => GramOperator::factored(f).rhs(y, ctr)?,
    })
}

fn solver_config(ctx: &Ctx, op: &OperatorArgs) -> SolverConfig {
    SolverConfig {
        max_iters: op.max_iters,
        tolerance: op.tol,
        seed: ctx.seed,
        ..SolverConfig::default()
    }
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    objective: Option<f64>,
    residual_norm: f64,
    x_change: f64,
    multiplications: u64,
    additions: u64,
}

#[derive(Serialize)]
struct FistaMetrics {
    iterations: usize,
    converged: bool,
    step_size: f64,
    nnz_x: usize,
    final_objective: Option<f64>,
    /// `Ax` against the signal, peak `max|y|`; needs `--data`.
    psnr_db: Option<f64>,
}

#[derive(Serialize)]
struct SolveReport<C: Serialize, M: Serialize> {
    command: &'static str,
    operator: OperatorEcho,
    config: C,
    metrics: M,
    operations: OpCounter,
    cost: Option<CostReport>,
    memory_convention: Option<&'static str>,
}

#[derive(Serialize)]
struct FistaEcho {
    solver: SolverConfig,
    signal: Option<PathBuf>,
    column: Option<usize>,
}

#[derive(Serialize)]
struct PowerEcho {
    solver: SolverConfig,
    eigs: usize,
}

#[derive(Serialize)]
struct PowerMetrics {
    values: Vec<f64>,
    iterations: Vec<usize>,
    /// Against the full operator's eigenvalues; needs `--data` on a factored run.
    delta_l: Option<f64>,
}

fn solve(ctx: &Ctx, cmd: SolveCommand) -> Result<()> {
    match cmd {
        SolveCommand::Fista {
            op,
            lambda,
            no_momentum,
            signal,
            column,
        } => {
            let p = prepare(ctx, &op)?;
            let y = match (&signal, column) {
                (Some(path), _) => load(path)?.into_vec(),
                (None, Some(j)) => {
                    let a = p.data.as_ref().expect("clap requires --data with --column");
                    if j >= a.cols() {
                        bail!("column {j} out of range for {} columns", a.cols());
                    }
                    a.col(j).to_vec()
                }
                (None, None) => unreachable!("clap requires a signal"),
            };
            let cfg = SolverConfig {
                lambda,
                momentum: !no_momentum,
                ..solver_config(ctx, &op)
            };
            let mut ops = OpCounter::new();
            let aty = rhs(&p.backend, &y, &mut ops)?;
            let (out, cost, wall) = with_operator(&p.backend, |g| fista_solve(g, &aty, &cfg, &mut ops))?;
            let psnr_db = match &p.data {
                Some(a) => {
                    let ax = a.matvec(&out.x, false, &mut OpCounter::new())?;
                    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    Some(psnr(&y, &ax, peak)?)
                }
                None => None,
            };
            ensure_dir(&op.output)?;
            write_values_csv(&op.output.join("solution.csv"), &out.x)?;
            let trace: Vec<TraceRow> = out
                .trace
                .records
                .iter()
                .map(|r| TraceRow {
                    iteration: r.iteration,
                    objective: r.objective,
                    residual_norm: r.residual_norm,
                    x_change: r.x_change,
                    multiplications: r.cost.multiplications,
                    additions: r.cost.additions,
                })
                .collect();
            write_csv(&op.output.join("trace.csv"), &trace)?;
            let report = SolveReport {
                command: "solve fista",
                memory_convention: cost.as_ref().map(|_| MEMORY_CONVENTION),
                operator: p.echo,
                config: FistaEcho {
                    solver: cfg,
                    signal,
                    column,
                },
                metrics: FistaMetrics {
                    iterations: out.trace.len(),
                    converged: out.converged,
                    step_size: out.step_size,
                    nnz_x: out.x.iter().filter(|v| **v != 0.0).count(),
                    final_objective: out.trace.last_objective(),
                    psnr_db,
                },
                operations: ops,
                cost,
            };
            write_json(&op.output.join(REPORT_FILE), &report)?;
            let mut timing = Timing::default();
            timing.record("solve", wall);
            timing.write(&op.output)
        }
        SolveCommand::Power { op, eigs } => {
            let p = prepare(ctx, &op)?;
            let cfg = solver_config(ctx, &op);
            let mut ops = OpCounter::new();
            let (res, cost, wall) = with_operator(&p.backend, |g| power_method(g, eigs, &cfg, &mut ops))?;
            let delta_l = match (&p.backend, &p.data) {
                (Backend::Full(_), _) | (_, None) => None,
                (_, Some(a)) => {
                    let reference = power_method(&GramOperator::full(a), eigs, &cfg, &mut OpCounter::new())?;
                    Some(learning_error(&reference.values, &res.values)?)
                }
            };
            ensure_dir(&op.output)?;
            write_eigen(&op.output, &res)?;
            let report = SolveReport {
                command: "solve power",
                memory_convention: cost.as_ref().map(|_| MEMORY_CONVENTION),
                operator: p.echo,
                config: PowerEcho { solver: cfg, eigs },
                metrics: PowerMetrics {
                    values: res.values.clone(),
                    iterations: res.iterations.clone(),
                    delta_l,
                },
                operations: ops,
                cost,
            };
            write_json(&op.output.join(REPORT_FILE), &report)?;
            let mut timing = Timing::default();
            timing.record("solve", wall);
            timing.write(&op.output)
        }
    }
}

fn write_eigen(dir: &Path, res: &EigenResult) -> Result<()> {
    write_values_csv(&dir.join("eigenvalues.csv"), &res.values)?;
    if let Some(n) = res.vectors.first().map(Vec::len) {
        save_matrix(&dir.join("eigenvectors.mtx"), &res.vectors_matrix(n)?, MatrixFormat::MatrixMarket)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TuneReport {
    command: &'static str,
    input: PathBuf,
    evaluator: &'static str,
    config: TuneConfig,
    chosen_delta_d: f64,
    factorization: FactorSummary,
    trace: Vec<TuneRound>,
    operations: OpCounter,
}

fn tune(ctx: &Ctx, args: TuneArgs) -> Result<()> {
    let mut timing = Timing::default();
    let a = timing.time("load", || load(&args.input))?;
    let max_cols = args.max_cols.unwrap_or(a.rows().min(a.cols()).max(1));
    let cfg = TuneConfig {
        delta_d_max: args.delta_d_max,
        delta_d_min: args.delta_d_min,
        parallel: args.parallel,
        ..TuneConfig::new(args.target_delta_l, max_cols, ctx.seed)
    };
    let solver = SolverConfig {
        seed: ctx.seed,
        ..SolverConfig::default()
    };
    let mut ops = OpCounter::new();
    let (outcome, name) = timing.time("tune", || -> Result<_> {
        Ok(match args.evaluator {
            Evaluator::Eigen => {
                let eval = eigenvalue_evaluator(&a, args.eigs, solver)?;
                (tune_counted(&a, &cfg, eval, &mut ops)?, "eigen")
            }
            Evaluator::Fista => {
                let s = SolverConfig {
                    lambda: args.lambda,
                    ..solver
                };
                let eval = fista_evaluator(&a, args.probes, s, ctx.seed)?;
                (tune_counted(&a, &cfg, eval, &mut ops)?, "fista")
            }
        })
    })?;
    save_factorization(&args.output, &outcome.factorization)?;
    let report = TuneReport {
        command: "tune",
        input: args.input,
        evaluator: name,
        config: cfg,
        chosen_delta_d: outcome.delta_d,
        factorization: summarize(&outcome.factorization, Some(&a)),
        trace: outcome.trace,
        operations: ops,
    };
    write_json(&args.output.join(REPORT_FILE), &report)?;
    timing.write(&args.output)?;
    println!("delta_d = {}", outcome.delta_d);
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow {
    delta_d: f64,
    l: usize,
    nnz_v: usize,
    metric: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct ModelCsvRow {
    model: String,
    n_c: usize,
    l: usize,
    nnz_v: usize,
    density: f64,
    iterations: usize,
    communicated_per_iteration: u64,
    cross_worker_per_iteration: u64,
    multiplications_per_iteration: u64,
    max_worker_memory: u64,
    central_memory: u64,
    total_memory: u64,
    total_replicas: Option<usize>,
}

impl ModelCsvRow {
    fn new(r: &ModelRow, label: &str) -> Self {
        ModelCsvRow {
            model: label.to_string(),
            n_c: r.n_c,
            l: r.l,
            nnz_v: r.nnz_v,
            density: r.density,
            iterations: r.iterations,
            communicated_per_iteration: r.communicated_per_iteration,
            cross_worker_per_iteration: r.cross_worker_per_iteration,
            multiplications_per_iteration: r.multiplications_per_iteration,
            max_worker_memory: r.max_worker_memory,
            central_memory: r.central_memory,
            total_memory: r.total_memory,
            total_replicas: r.total_replicas,
        }
    }
}

fn bench(ctx: &Ctx, cmd: BenchCommand) -> Result<()> {
    let mut timing = Timing::default();
    match cmd {
        BenchCommand::Sweep {
            input,
            deltas,
            eigs,
            max_cols,
            output,
        } => {
            let a = load(&input)?;
            let base = match max_cols {
                Some(c) => CssdConfig::new(0.0, c, ctx.seed),
                None => CssdConfig::for_matrix(&a, 0.0, ctx.seed),
            };
            let solver = SolverConfig {
                seed: ctx.seed,
                max_iters: 5000,
                tolerance: 1e-10,
                ..SolverConfig::default()
            };
            let reference = timing.time("reference", || {
                power_method(&GramOperator::full(&a), eigs, &solver, &mut OpCounter::new())
            })?;
            let rows = delta_sweep(&a, &deltas, &base, &reference, &solver)?;
            let mut out = Vec::with_capacity(rows.len() * 5);
            for r in &rows {
                timing.record(&format!("decompose_delta_{}", r.delta_d), r.decompose_seconds);
                for (metric, value) in [
                    ("density_ratio", r.density_ratio),
                    ("achieved_delta", r.achieved_delta),
                    ("delta_l", r.delta_l),
                    ("factored_mults_per_apply", r.factored_mults_per_apply as f64),
                    ("full_mults_per_apply", r.full_mults_per_apply as f64),
                ] {
                    out.push(SweepCsvRow {
                        delta_d: r.delta_d,
                        l: r.rank,
                        nnz_v: r.nnz_v,
                        metric,
                        value,
                    });
                }
            }
            ensure_dir(&output)?;
            write_csv(&output.join("sweep.csv"), &out)?;
            timing.write(&output)
        }
        BenchCommand::Models {
            factors,
            workers_list,
            iterations,
            output,
        } => {
            let f = load_factorization(&factors).with_context(|| format!("reading factors from {}", factors.display()))?;
            let schedule = if ctx.workers > 1 { Schedule::Threaded } else { Schedule::Sequential };
            let rows = timing.time("models", || compare_models(&f, &workers_list, iterations, schedule))?;
            let serial = timing.time("serial", || serial_factored_row(&f, iterations))?;
            let mut out = vec![ModelCsvRow::new(&serial, "serial_factored")];
            for r in &rows {
                timing.record(&format!("{}_{}", r.model, r.n_c), r.wall_time_s);
                out.push(ModelCsvRow::new(r, &r.model.to_string()));
            }
            ensure_dir(&output)?;
            write_csv(&output.join("models.csv"), &out)?;
            fs::write(output.join("memory_convention.txt"), format!("{MEMORY_CONVENTION}\n"))?;
            timing.write(&output)
        }
        BenchCommand::Memory { input, cssd, output } => {
            let a = load(&input)?;
            let cfg = cssd_config(&a, &cssd, ctx.seed);
            let f = timing.time("decompose", || decompose_counted(&a, &cfg, &mut OpCounter::new()))?;
            let table = memory_table(&a, &f)?;
            ensure_dir(&output)?;
            write_csv(&output.join("memory.csv"), &[table])?;
            timing.write(&output)
        }
    }
}
