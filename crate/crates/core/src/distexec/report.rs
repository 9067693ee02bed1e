use serde::{Deserialize, Serialize};

/// Execution model a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecModel {
    Matrix,
    Graph,
    /// Serial `AᵀA` baseline.
    Full,
}

impl std::fmt::Display for ExecModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExecModel::Matrix => "matrix",
            ExecModel::Graph => "graph",
            ExecModel::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Worker(usize),
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Reduce,
    Broadcast,
}

/// A typed inter-node message. `vertices` names the `P` vertices a
/// graph-model payload refers to and is empty for dense `l`-vectors; only the
/// payload counts as communication.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub source: NodeId,
    pub dest: NodeId,
    pub tag: Tag,
    pub vertices: Vec<usize>,
    pub payload: Vec<f64>,
}

/// Memory counting convention used by every report: `memory_entries` counts
/// resident reals (matrix values, vertex values, vectors); `index_entries`
/// counts integer indices (CSC row indices and column pointers, or two
/// endpoints per graph edge). Transient `l`-vector message buffers are not
/// counted.
pub const MEMORY_CONVENTION: &str =
    "memory_entries = resident reals per node (workers then central); index_entries = integer indices per node";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCounters {
    pub multiplications: u64,
    pub additions: u64,
    /// Reals that crossed a node boundary.
    pub communicated_values: u64,
    /// Part of `communicated_values` exchanged directly between workers.
    pub cross_worker_values: u64,
    pub messages: u64,
    /// Operator applications covered by the counters.
    pub applies: u64,
    pub memory_entries: Vec<u64>,
    pub memory_entries_total: u64,
    pub index_entries: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub model: ExecModel,
    pub n_c: usize,
    pub l: usize,
    #[serde(rename = "nnz_V")]
    pub nnz_v: usize,
    pub counters: CostCounters,
    /// Kept apart from the counters; counters are deterministic, timings are not.
    pub wall_time_s: Option<f64>,
}

impl CostReport {
    pub fn communicated_per_apply(&self) -> u64 {
        if self.counters.applies == 0 {
            0
        } else {
            self.counters.communicated_values / self.counters.applies
        }
    }

    pub fn max_worker_memory(&self) -> u64 {
        let m = &self.counters.memory_entries;
        m[..m.len().saturating_sub(1)].iter().copied().max().unwrap_or(0)
    }

    pub fn central_memory(&self) -> u64 {
        self.counters.memory_entries.last().copied().unwrap_or(0)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
