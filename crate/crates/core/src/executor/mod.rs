//! Single-threaded execution of dataflow graphs.
//!
//! Every edge carries one token, the whole collection produced by its
//! source vertex, and every vertex fires once in topological order.
//! Streams are materialized from their (finite) sources and consumed by
//! incremental windowing.

mod io;
mod ops;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ast::{OpKind, Sink, Source};
use crate::collections::{SemCollection, WindowingPolicy};
use crate::dataflow::{DataflowGraph, VertexKind};

pub use io::{conform, read_source, render, write_sink, IoError};
pub use ops::{
    exec_combine, exec_flatmap, exec_fold_reduce, exec_map, exec_merge, exec_pair, exec_partitioned, exec_reduce,
    exec_unary, exec_unbounded_elementwise, exec_windowed, windows, Chunking, OpConfig, OpError, OpResult,
};

pub type Token = Arc<SemCollection>;

#[derive(Debug, Clone)]
pub struct ExecConfig {
    /// Tumbling batch policy for element-wise and per-key operators on
    /// streams.
    pub batch: WindowingPolicy,
    /// `from-replay` names bound to files.
    pub replay: BTreeMap<String, PathBuf>,
    /// `from-socket`/`to-socket` names bound to `host:port` addresses.
    pub socket: BTreeMap<String, String>,
    /// Replaces the path of every `from-file` source.
    pub input: Option<PathBuf>,
    /// Replaces the path of every `to-file` sink.
    pub output: Option<PathBuf>,
    /// Directory that relative paths in the program are resolved against.
    pub base_dir: Option<PathBuf>,
    pub deterministic_merge: bool,
    pub seed: Option<u64>,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            batch: WindowingPolicy::tumbling(1000),
            replay: BTreeMap::new(),
            socket: BTreeMap::new(),
            input: None,
            output: None,
            base_dir: None,
            deterministic_merge: true,
            seed: None,
        }
    }
}

impl ExecConfig {
    pub fn with_batch(mut self, n: u64) -> Self {
        self.batch = WindowingPolicy::tumbling(n);
        self
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn bind_replay(mut self, name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        self.replay.insert(name.into(), path.into());
        self
    }

    pub fn bind_socket(mut self, name: impl Into<String>, addr: impl Into<String>) -> Self {
        self.socket.insert(name.into(), addr.into());
        self
    }

    fn input_path(&self, name: &str) -> PathBuf {
        self.input.clone().unwrap_or_else(|| io::resolve(self.base_dir.as_deref(), name))
    }

    fn output_path(&self, name: &str) -> PathBuf {
        self.output.clone().unwrap_or_else(|| io::resolve(self.base_dir.as_deref(), name))
    }

    fn replay_path(&self, name: &str) -> PathBuf {
        self.replay.get(name).cloned().unwrap_or_else(|| io::resolve(self.base_dir.as_deref(), name))
    }

    fn socket_addr(&self, name: &str) -> String {
        self.socket.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    fn op_config(&self) -> OpConfig {
        OpConfig {
            batch: self.batch,
            chunking: Chunking::Sized(self.batch.size as usize),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("only top-level pipelines (∅ → ∅) can run")]
    NotTopLevel,
    #[error("{0}")]
    Config(String),
    #[error("vertex `{vertex}`: {source}")]
    Op { vertex: String, source: OpError },
    #[error("vertex `{vertex}`: {source}")]
    Io { vertex: String, source: IoError },
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeReport {
    pub from: usize,
    pub to: usize,
    pub from_label: String,
    pub to_label: String,
    pub items: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SinkReport {
    pub vertex: usize,
    pub label: String,
    pub target: String,
    pub items: usize,
    pub sha256: String,
    #[serde(skip)]
    pub lines: Vec<String>,
    #[serde(skip)]
    pub token: Token,
}

#[derive(Debug, Clone, Serialize)]
pub struct LateReport {
    pub vertex: usize,
    pub label: String,
    pub dropped: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub edges: Vec<EdgeReport>,
    pub sinks: Vec<SinkReport>,
    pub late: Vec<LateReport>,
}

impl RunReport {
    /// The first sink with the given label.
    pub fn sink(&self, label: &str) -> Option<&SinkReport> {
        self.sinks.iter().find(|s| s.label == label)
    }
}

fn check_overrides(g: &DataflowGraph, cfg: &ExecConfig) -> Result<(), ExecError> {
    let count = |pred: &dyn Fn(&OpKind) -> bool| {
        g.vertices
            .iter()
            .filter(|v| matches!(&v.kind, VertexKind::Op(op) if pred(&op.kind)))
            .count()
    };
    if cfg.output.is_some() && count(&|k| matches!(k, OpKind::Collect(Sink::File(_), _))) > 1 {
        return Err(ExecError::Config("an output override needs exactly one file sink".into()));
    }
    if cfg.input.is_some() && count(&|k| matches!(k, OpKind::Emit(Source::File(_), _))) > 1 {
        return Err(ExecError::Config("an input override needs exactly one file source".into()));
    }
    if !cfg.batch.is_tumbling() {
        return Err(ExecError::Config(format!("execution batching must be tumbling, got {}", cfg.batch)));
    }
    Ok(())
}

/// Runs a top-level graph, writing `to-stdout` sinks to standard output.
pub fn run_graph(g: &DataflowGraph, cfg: &ExecConfig) -> Result<RunReport, ExecError> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_graph_to(g, cfg, &mut lock)
}

/// Runs a top-level graph, writing `to-stdout` sinks to `stdout`.
pub fn run_graph_to(
    g: &DataflowGraph,
    cfg: &ExecConfig,
    stdout: &mut dyn std::io::Write,
) -> Result<RunReport, ExecError> {
    if g.input.is_some() || g.output.is_some() || g.vertices.is_empty() {
        return Err(ExecError::NotTopLevel);
    }
    check_overrides(g, cfg)?;
    let order = g.topological_order().ok_or_else(|| ExecError::Config("graph has a cycle".into()))?;
    let op_cfg = cfg.op_config();
    let mut rng = match cfg.seed {
        Some(s) => StdRng::seed_from_u64(s),
        None => StdRng::from_entropy(),
    };
    let mut tokens: HashMap<usize, Token> = HashMap::new();
    let mut report = RunReport::default();
    for v in order {
        let vertex = g.vertex(v);
        let label = vertex.label();
        let op_err = |source| ExecError::Op {
            vertex: label.clone(),
            source,
        };
        let io_err = |source| ExecError::Io {
            vertex: label.clone(),
            source,
        };
        let inputs: Vec<Token> = g.inputs(v).iter().map(|e| tokens[&e.from].clone()).collect();
        let mut late = 0;
        let out = match &vertex.kind {
            VertexKind::Merge => {
                let refs: Vec<&SemCollection> = inputs.iter().map(|t| t.as_ref()).collect();
                Some(exec_merge(&refs, cfg.deterministic_merge, &mut rng).map_err(op_err)?)
            }
            VertexKind::Op(op) => match (&op.kind, inputs.as_slice()) {
                (OpKind::Emit(src, ty), []) => Some(read_source(src, ty, cfg).map_err(io_err)?),
                (OpKind::Collect(sink, ty), [c]) => {
                    let (target, lines) = write_sink(sink, ty, c, cfg, stdout).map_err(io_err)?;
                    let mut hasher = Sha256::new();
                    for l in &lines {
                        hasher.update(l.as_bytes());
                        hasher.update(b"\n");
                    }
                    report.sinks.push(SinkReport {
                        vertex: v,
                        label: label.clone(),
                        target,
                        items: c.len(),
                        sha256: hex::encode(hasher.finalize()),
                        lines,
                        token: c.clone(),
                    });
                    None
                }
                (_, [c]) => Some(exec_unary(op, c, &op_cfg, &mut late).map_err(op_err)?),
                (_, [a, b]) => Some(exec_pair(op, a, b, &op_cfg, &mut late).map_err(op_err)?),
                (_, ins) => {
                    return Err(ExecError::Config(format!(
                        "vertex `{label}` has {} inputs",
                        ins.len()
                    )))
                }
            },
        };
        if late > 0 {
            report.late.push(LateReport {
                vertex: v,
                label: label.clone(),
                dropped: late,
            });
        }
        if let Some(out) = out {
            tokens.insert(v, Arc::new(out));
        }
    }
    let mut edges = g.edges.clone();
    edges.sort();
    report.edges = edges
        .iter()
        .map(|e| EdgeReport {
            from: e.from,
            to: e.to,
            from_label: g.vertex(e.from).label(),
            to_label: g.vertex(e.to).label(),
            items: tokens.get(&e.from).map_or(0, |t| t.len()),
        })
        .collect();
    Ok(report)
}
