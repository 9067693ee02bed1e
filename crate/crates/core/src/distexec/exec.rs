use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::ops::Range;
use std::sync::Mutex;
use std::time::Instant;

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};

use crate::cssd::Factorization;
use crate::distexec::plan::{GraphPlan, PartitionPlan};
use crate::distexec::report::{CostCounters, CostReport, ExecModel, Message, NodeId, Tag};
use crate::error::{check_len, Error, Result};
use crate::linalg::{DenseMatrix, OpCounter};
use crate::solvers::{factored_middle, GramApply, GramFlow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum Plan {
    Matrix(PartitionPlan),
    Graph(GraphPlan),
}

impl Plan {
    pub fn model(&self) -> ExecModel {
        match self {
            Plan::Matrix(_) => ExecModel::Matrix,
            Plan::Graph(_) => ExecModel::Graph,
        }
    }

    pub fn n_c(&self) -> usize {
        match self {
            Plan::Matrix(p) => p.n_c(),
            Plan::Graph(g) => g.n_c(),
        }
    }

    fn chunks(&self) -> &[Range<usize>] {
        match self {
            Plan::Matrix(p) => &p.chunks,
            Plan::Graph(g) => &g.x_masters,
        }
    }
}

/// How simulated nodes are driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// One thread, nodes stepped in a fixed order over in-memory queues.
    #[default]
    Sequential,
    /// One OS thread per node, messages over channels.
    Threaded,
}

#[derive(Debug, Default, Clone, Copy)]
struct Traffic {
    values: u64,
    cross_worker: u64,
    messages: u64,
}

impl Traffic {
    fn record(&mut self, msg: &Message) {
        self.values += msg.payload.len() as u64;
        self.messages += 1;
        if matches!((msg.source, msg.dest), (NodeId::Worker(_), NodeId::Worker(_))) {
            self.cross_worker += msg.payload.len() as u64;
        }
    }

    fn merge(&mut self, o: Traffic) {
        self.values += o.values;
        self.cross_worker += o.cross_worker;
        self.messages += o.messages;
    }
}

trait Endpoint {
    fn send(&mut self, msg: Message) -> Result<()>;
    fn recv(&mut self, tag: Tag) -> Result<Message>;
}

fn slot(node: NodeId, n_c: usize) -> usize {
    match node {
        NodeId::Worker(w) => w,
        NodeId::Central => n_c,
    }
}

fn check_tag(msg: Message, tag: Tag) -> Result<Message> {
    if msg.tag != tag {
        return Err(Error::PlanMismatch(format!(
            "expected a {tag:?} message, got {:?} from {:?}",
            msg.tag, msg.source
        )));
    }
    Ok(msg)
}

struct QueueEndpoint<'q> {
    me: usize,
    n_c: usize,
    queues: &'q RefCell<Vec<VecDeque<Message>>>,
    traffic: Traffic,
}

impl Endpoint for QueueEndpoint<'_> {
    fn send(&mut self, msg: Message) -> Result<()> {
        self.traffic.record(&msg);
        let dest = slot(msg.dest, self.n_c);
        self.queues.borrow_mut()[dest].push_back(msg);
        Ok(())
    }

    fn recv(&mut self, tag: Tag) -> Result<Message> {
        let msg = self.queues.borrow_mut()[self.me].pop_front().ok_or_else(|| {
            Error::PlanMismatch(format!("node {} scheduled before its input arrived", self.me))
        })?;
        check_tag(msg, tag)
    }
}

struct ChannelEndpoint {
    n_c: usize,
    rx: Receiver<Message>,
    tx: Vec<Sender<Message>>,
    traffic: Traffic,
}

impl Endpoint for ChannelEndpoint {
    fn send(&mut self, msg: Message) -> Result<()> {
        self.traffic.record(&msg);
        let dest = slot(msg.dest, self.n_c);
        self.tx[dest]
            .send(msg)
            .map_err(|_| Error::PlanMismatch("peer node hung up".into()))
    }

    fn recv(&mut self, tag: Tag) -> Result<Message> {
        let msg = self
            .rx
            .recv()
            .map_err(|_| Error::PlanMismatch("peer node hung up".into()))?;
        check_tag(msg, tag)
    }
}

/// Per-worker message routing of the graph model.
#[derive(Debug, Clone)]
struct GraphRoutes {
    /// Distinct upstream replicas per worker; also the broadcast destinations.
    upstream: Vec<Vec<usize>>,
    /// Downstream node and the `P` vertices sent there, per worker.
    downstream: Vec<BTreeMap<NodeKey, Vec<usize>>>,
    /// Workers holding the last replica of some vertex, with those vertices.
    central_sources: BTreeMap<usize, Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum NodeKey {
    Worker(usize),
    Central,
}

impl From<NodeKey> for NodeId {
    fn from(k: NodeKey) -> Self {
        match k {
            NodeKey::Worker(w) => NodeId::Worker(w),
            NodeKey::Central => NodeId::Central,
        }
    }
}

impl GraphRoutes {
    fn new(plan: &GraphPlan) -> Self {
        let n_c = plan.n_c();
        let mut upstream = vec![Vec::new(); n_c];
        let mut downstream = vec![BTreeMap::new(); n_c];
        let mut central_sources: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for w in 0..n_c {
            for &i in &plan.held[w] {
                if let Some(p) = plan.prev_holder(i, w) {
                    upstream[w].push(p);
                }
                match plan.next_holder(i, w) {
                    Some(nx) => downstream[w]
                        .entry(NodeKey::Worker(nx))
                        .or_insert_with(Vec::new)
                        .push(i),
                    None => {
                        downstream[w].entry(NodeKey::Central).or_insert_with(Vec::new).push(i);
                        central_sources.entry(w).or_default().push(i);
                    }
                }
            }
            upstream[w].sort_unstable();
            upstream[w].dedup();
        }
        GraphRoutes {
            upstream,
            downstream,
            central_sources,
        }
    }
}

struct Shared<'a> {
    plan: &'a Plan,
    factors: &'a Factorization,
    dtd: Option<&'a DenseMatrix>,
    routes: Option<&'a GraphRoutes>,
}

impl Shared<'_> {
    fn l(&self) -> usize {
        self.factors.rank()
    }

    /// Reduce phase of worker `w`: fold the local columns into the running
    /// `p` and pass it downstream.
    fn worker_reduce<E: Endpoint>(&self, w: usize, ep: &mut E, x: &[f64], ctr: &mut OpCounter) -> Result<()> {
        let v = &self.factors.coeffs;
        let range = self.plan.chunks()[w].clone();
        let x_chunk = &x[range.clone()];
        match self.plan {
            Plan::Matrix(p) => {
                let mut acc = if w == 0 {
                    vec![0.0; self.l()]
                } else {
                    ep.recv(Tag::Reduce)?.payload
                };
                v.accumulate_columns(range, x_chunk, &mut acc, ctr);
                let dest = if w + 1 < p.n_c() {
                    NodeId::Worker(w + 1)
                } else {
                    NodeId::Central
                };
                ep.send(Message {
                    source: NodeId::Worker(w),
                    dest,
                    tag: Tag::Reduce,
                    vertices: Vec::new(),
                    payload: acc,
                })
            }
            Plan::Graph(_) => {
                let routes = self.routes.expect("graph routes");
                let mut acc = vec![0.0; self.l()];
                for _ in 0..routes.upstream[w].len() {
                    let msg = ep.recv(Tag::Reduce)?;
                    for (&i, &val) in msg.vertices.iter().zip(&msg.payload) {
                        acc[i] = val;
                    }
                }
                v.accumulate_columns(range, x_chunk, &mut acc, ctr);
                for (&dest, vertices) in &routes.downstream[w] {
                    ep.send(Message {
                        source: NodeId::Worker(w),
                        dest: dest.into(),
                        tag: Tag::Reduce,
                        payload: vertices.iter().map(|&i| acc[i]).collect(),
                        vertices: vertices.clone(),
                    })?;
                }
                Ok(())
            }
        }
    }

    /// Central node: gather `p`, apply the dense middle, send `q` back.
    fn central<E: Endpoint>(&self, ep: &mut E, ctr: &mut OpCounter) -> Result<()> {
        let l = self.l();
        match self.plan {
            Plan::Matrix(p) => {
                let acc = ep.recv(Tag::Reduce)?.payload;
                let q = factored_middle(&self.factors.basis, self.dtd, &acc, ctr)?;
                for w in 0..p.n_c() {
                    ep.send(Message {
                        source: NodeId::Central,
                        dest: NodeId::Worker(w),
                        tag: Tag::Broadcast,
                        vertices: Vec::new(),
                        payload: q.clone(),
                    })?;
                }
                Ok(())
            }
            Plan::Graph(_) => {
                let routes = self.routes.expect("graph routes");
                let mut acc = vec![0.0; l];
                for _ in 0..routes.central_sources.len() {
                    let msg = ep.recv(Tag::Reduce)?;
                    for (&i, &val) in msg.vertices.iter().zip(&msg.payload) {
                        acc[i] = val;
                    }
                }
                let q = factored_middle(&self.factors.basis, self.dtd, &acc, ctr)?;
                for (&w, vertices) in &routes.central_sources {
                    ep.send(Message {
                        source: NodeId::Central,
                        dest: NodeId::Worker(w),
                        tag: Tag::Broadcast,
                        payload: vertices.iter().map(|&i| q[i]).collect(),
                        vertices: vertices.clone(),
                    })?;
                }
                Ok(())
            }
        }
    }

    /// Broadcast phase of worker `w`: receive `q`, forward it upstream along
    /// replica chains, and compute the local slice of `z = Vᵀq`.
    fn worker_finish<E: Endpoint>(&self, w: usize, ep: &mut E, ctr: &mut OpCounter) -> Result<Vec<f64>> {
        let range = self.plan.chunks()[w].clone();
        let mut z = vec![0.0; range.len()];
        let q = match self.plan {
            Plan::Matrix(_) => ep.recv(Tag::Broadcast)?.payload,
            Plan::Graph(g) => {
                let routes = self.routes.expect("graph routes");
                let mut q = vec![0.0; self.l()];
                for _ in 0..routes.downstream[w].len() {
                    let msg = ep.recv(Tag::Broadcast)?;
                    for (&i, &val) in msg.vertices.iter().zip(&msg.payload) {
                        q[i] = val;
                    }
                }
                for &up in &routes.upstream[w] {
                    let vertices: Vec<usize> = g.held[w]
                        .iter()
                        .copied()
                        .filter(|&i| g.prev_holder(i, w) == Some(up))
                        .collect();
                    ep.send(Message {
                        source: NodeId::Worker(w),
                        dest: NodeId::Worker(up),
                        tag: Tag::Broadcast,
                        payload: vertices.iter().map(|&i| q[i]).collect(),
                        vertices,
                    })?;
                }
                q
            }
        };
        self.factors.coeffs.transpose_matvec_into(range, &q, &mut z, ctr);
        Ok(z)
    }

    fn apply_sequential(&self, x: &[f64], ctr: &mut OpCounter) -> Result<(Vec<f64>, Traffic)> {
        let n_c = self.plan.n_c();
        let queues = RefCell::new(vec![VecDeque::new(); n_c + 1]);
        let mut eps: Vec<QueueEndpoint> = (0..=n_c)
            .map(|me| QueueEndpoint {
                me,
                n_c,
                queues: &queues,
                traffic: Traffic::default(),
            })
            .collect();
        for (w, ep) in eps.iter_mut().take(n_c).enumerate() {
            self.worker_reduce(w, ep, x, ctr)?;
        }
        self.central(&mut eps[n_c], ctr)?;
        // Broadcast forwarding runs from high to low worker ids.
        let mut parts = vec![Vec::new(); n_c];
        for w in (0..n_c).rev() {
            parts[w] = self.worker_finish(w, &mut eps[w], ctr)?;
        }
        let mut traffic = Traffic::default();
        eps.iter().for_each(|e| traffic.merge(e.traffic));
        Ok((parts.concat(), traffic))
    }

    fn apply_threaded(&self, x: &[f64], ctr: &mut OpCounter) -> Result<(Vec<f64>, Traffic)> {
        let n_c = self.plan.n_c();
        let (tx, rx): (Vec<_>, Vec<_>) = (0..=n_c).map(|_| crossbeam_channel::unbounded()).unzip();
        let mut eps: Vec<ChannelEndpoint> = rx
            .into_iter()
            .map(|rx| ChannelEndpoint {
                n_c,
                rx,
                tx: tx.clone(),
                traffic: Traffic::default(),
            })
            .collect();
        drop(tx);
        let mut central_ep = eps.pop().expect("central endpoint");
        let outcome = std::thread::scope(|s| {
            let handles: Vec<_> = eps
                .into_iter()
                .enumerate()
                .map(|(w, mut ep)| {
                    s.spawn(move || -> Result<(Vec<f64>, OpCounter, Traffic)> {
                        let mut local = OpCounter::new();
                        self.worker_reduce(w, &mut ep, x, &mut local)?;
                        let z = self.worker_finish(w, &mut ep, &mut local)?;
                        Ok((z, local, ep.traffic))
                    })
                })
                .collect();
            let mut central_ctr = OpCounter::new();
            let central = self.central(&mut central_ep, &mut central_ctr);
            let results: Vec<_> = handles
                .into_iter()
                .map(|h| h.join().expect("worker thread panicked"))
                .collect();
            (central.map(|_| (central_ctr, central_ep.traffic)), results)
        });
        let (central, results) = outcome;
        let (central_ctr, mut traffic) = central?;
        let mut parts = Vec::with_capacity(n_c);
        let mut worker_ctr = OpCounter::new();
        for r in results {
            let (z, c, t) = r?;
            parts.push(z);
            worker_ctr += c;
            traffic.merge(t);
        }
        *ctr += worker_ctr;
        *ctr += central_ctr;
        Ok((parts.concat(), traffic))
    }
}

#[derive(Debug, Default)]
struct Tally {
    flops: OpCounter,
    traffic: Traffic,
    applies: u64,
}

/// `G ≈ VᵀDᵀDV` evaluated by simulated nodes exchanging messages.
///
/// Results are bitwise identical to the serial factored operator: the reduce
/// chain visits columns in ascending order regardless of the worker count.
pub struct DistributedOperator<'a> {
    plan: &'a Plan,
    factors: &'a Factorization,
    dtd: Option<DenseMatrix>,
    routes: Option<GraphRoutes>,
    schedule: Schedule,
    tally: Mutex<Tally>,
}

impl<'a> DistributedOperator<'a> {
    pub fn new(
        plan: &'a Plan,
        factors: &'a Factorization,
        flow: GramFlow,
        schedule: Schedule,
    ) -> Result<Self> {
        let n = factors.cols();
        let (plan_n, plan_l) = match plan {
            Plan::Matrix(p) => (p.n, None),
            Plan::Graph(g) => (g.n, Some(g.l)),
        };
        if plan_n != n || plan_l.is_some_and(|l| l != factors.rank()) {
            return Err(Error::PlanMismatch(format!(
                "plan covers n = {plan_n}{} but the factorization is {}×{n}",
                plan_l.map(|l| format!(", l = {l}")).unwrap_or_default(),
                factors.rank()
            )));
        }
        if let Plan::Graph(g) = plan {
            if let Some(bad) = (0..g.n_c()).find(|&w| {
                g.edges_per_worker[w] != factors.coeffs.range_nnz(g.x_masters[w].clone())
            }) {
                return Err(Error::PlanMismatch(format!(
                    "graph plan edge count on worker {bad} does not match V"
                )));
            }
        }
        let mut tally = Tally::default();
        let dtd = match flow {
            GramFlow::FourStep => None,
            GramFlow::Collapsed => Some(factors.basis.transpose_mul(&factors.basis, &mut tally.flops)?),
        };
        let routes = match plan {
            Plan::Graph(g) => Some(GraphRoutes::new(g)),
            Plan::Matrix(_) => None,
        };
        Ok(DistributedOperator {
            plan,
            factors,
            dtd,
            routes,
            schedule,
            tally: Mutex::new(tally),
        })
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    /// Snapshot of the accumulated counters.
    pub fn report(&self, wall_time_s: Option<f64>) -> CostReport {
        let t = self.tally.lock().expect("tally lock");
        let (memory_entries, index_entries) = memory_layout(self.plan, self.factors);
        CostReport {
            model: self.plan.model(),
            n_c: self.plan.n_c(),
            l: self.factors.rank(),
            nnz_v: self.factors.nnz(),
            counters: CostCounters {
                multiplications: t.flops.multiplications,
                additions: t.flops.additions,
                communicated_values: t.traffic.values,
                cross_worker_values: t.traffic.cross_worker,
                messages: t.traffic.messages,
                applies: t.applies,
                memory_entries_total: memory_entries.iter().sum(),
                memory_entries,
                index_entries,
            },
            wall_time_s,
        }
    }
}

impl GramApply for DistributedOperator<'_> {
    fn dim(&self) -> usize {
        self.factors.cols()
    }

    fn apply(&self, x: &[f64], ctr: &mut OpCounter) -> Result<Vec<f64>> {
        check_len("gram operand", self.dim(), x.len())?;
        let shared = Shared {
            plan: self.plan,
            factors: self.factors,
            dtd: self.dtd.as_ref(),
            routes: self.routes.as_ref(),
        };
        let mut local = OpCounter::new();
        let (z, traffic) = match self.schedule {
            Schedule::Sequential => shared.apply_sequential(x, &mut local)?,
            Schedule::Threaded => shared.apply_threaded(x, &mut local)?,
        };
        *ctr += local;
        let mut t = self.tally.lock().expect("tally lock");
        t.flops += local;
        t.traffic.merge(traffic);
        t.applies += 1;
        Ok(z)
    }
}

/// Resident reals and index entries per node, workers first, central last.
pub fn memory_layout(plan: &Plan, factors: &Factorization) -> (Vec<u64>, Vec<u64>) {
    let v = &factors.coeffs;
    let (l, m) = (factors.rank() as u64, factors.rows() as u64);
    let mut mem = Vec::with_capacity(plan.n_c() + 1);
    let mut idx = Vec::with_capacity(plan.n_c() + 1);
    match plan {
        Plan::Matrix(p) => {
            for r in &p.chunks {
                let nnz = v.range_nnz(r.clone()) as u64;
                mem.push(nnz + r.len() as u64);
                idx.push(nnz + r.len() as u64 + 1);
            }
            mem.push(l * m + m);
            idx.push(0);
        }
        Plan::Graph(g) => {
            for (w, r) in g.x_masters.iter().enumerate() {
                let edges = g.edges_per_worker[w] as u64;
                mem.push(edges + r.len() as u64 + g.held[w].len() as u64);
                idx.push(2 * edges);
            }
            mem.push(l * m + l + m);
            idx.push(2 * l * m);
        }
    }
    (mem, idx)
}

/// Runs `solve` against a distributed operator built from `plan`, returning
/// its result with the accumulated cost report.
pub fn run_distributed<T, F>(
    plan: &Plan,
    factors: &Factorization,
    flow: GramFlow,
    schedule: Schedule,
    solve: F,
) -> Result<(T, CostReport)>
where
    F: FnOnce(&DistributedOperator<'_>) -> Result<T>,
{
    let op = DistributedOperator::new(plan, factors, flow, schedule)?;
    let start = Instant::now();
    let out = solve(&op)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((out, op.report(Some(elapsed))))
}
