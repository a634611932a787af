//! Lowering pipelines to semantic dataflow graphs.

use std::collections::HashMap;
use std::fmt::Write;

use crate::ast::{OpKind, Operator, Pipeline, PipelineKind};

pub type VertexId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum VertexKind {
    Op(Operator),
    /// Merge node μ.
    Merge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
}

impl Vertex {
    pub fn label(&self) -> String {
        match &self.kind {
            VertexKind::Op(op) => op.label(),
            VertexKind::Merge => "μ".to_string(),
        }
    }

    /// Structural label: the operator in normal form, ignoring names.
    fn shape(&self) -> String {
        match &self.kind {
            VertexKind::Op(op) => op.normalize().to_string(),
            VertexKind::Merge => "μ".to_string(),
        }
    }
}

/// `port` orders the inputs of a vertex: left/right for binary operators,
/// operand order for μ, always 0 for unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub port: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataflowGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub input: Option<VertexId>,
    pub output: Option<VertexId>,
}

struct Sub {
    input: Option<VertexId>,
    output: Option<VertexId>,
}

impl DataflowGraph {
    fn add(&mut self, kind: VertexKind) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, kind });
        id
    }

    fn connect(&mut self, from: VertexId, to: VertexId, port: usize) {
        self.edges.push(Edge { from, to, port });
    }

    fn lower(&mut self, p: &Pipeline) -> Sub {
        match &p.kind {
            PipelineKind::New(op) => {
                let v = self.add(VertexKind::Op(op.clone()));
                match op.kind {
                    OpKind::Emit(..) => Sub { input: None, output: Some(v) },
                    OpKind::Collect(..) => Sub { input: Some(v), output: None },
                    _ => Sub { input: Some(v), output: Some(v) },
                }
            }
            PipelineKind::To(src, dests) => {
                let s = self.lower(src);
                let mut outputs = Vec::new();
                for d in dests {
                    let g = self.lower(d);
                    if let (Some(o), Some(i)) = (s.output, g.input) {
                        self.connect(o, i, 0);
                    }
                    outputs.extend(g.output);
                }
                // A single output needs no merge node.
                let output = match outputs.len() {
                    0 => None,
                    1 => Some(outputs[0]),
                    _ => Some(self.merge_node(&outputs)),
                };
                Sub { input: s.input, output }
            }
            PipelineKind::Pair(a, b, op) => {
                let ga = self.lower(a);
                let gb = self.lower(b);
                let v = self.add(VertexKind::Op(op.clone()));
                for (port, g) in [&ga, &gb].into_iter().enumerate() {
                    if let Some(o) = g.output {
                        self.connect(o, v, port);
                    }
                }
                Sub { input: ga.input.or(gb.input), output: Some(v) }
            }
            PipelineKind::Merge(..) => {
                // Nested merges share one n-ary merge node.
                let mut operands = Vec::new();
                p.merge_operands(&mut operands);
                let mut input = None;
                let mut outputs = Vec::new();
                for q in operands {
                    let g = self.lower(q);
                    input = input.or(g.input);
                    outputs.extend(g.output);
                }
                Sub { input, output: Some(self.merge_node(&outputs)) }
            }
        }
    }

    fn merge_node(&mut self, inputs: &[VertexId]) -> VertexId {
        let mu = self.add(VertexKind::Merge);
        for (port, &v) in inputs.iter().enumerate() {
            self.connect(v, mu, port);
        }
        mu
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    /// Incoming edges of `v`, by port.
    pub fn inputs(&self, v: VertexId) -> Vec<Edge> {
        let mut es: Vec<Edge> = self.edges.iter().copied().filter(|e| e.to == v).collect();
        es.sort_by_key(|e| e.port);
        es
    }

    pub fn outputs(&self, v: VertexId) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.from == v).collect()
    }

    /// Vertices in a topological order, lowest id first among ready ones.
    /// `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<VertexId>> {
        let mut indeg = vec![0usize; self.vertices.len()];
        for e in &self.edges {
            indeg[e.to] += 1;
        }
        let mut ready: std::collections::BTreeSet<VertexId> =
            (0..self.vertices.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for e in self.outputs(v) {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    ready.insert(e.to);
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }

    pub fn merge_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.kind == VertexKind::Merge).count()
    }

    /// Graphviz text; vertices and edges in id order.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph pico {\n    rankdir=LR;\n");
        for v in &self.vertices {
            match &v.kind {
                VertexKind::Merge => writeln!(out, "    n{} [label=\"μ\", shape=point];", v.id),
                VertexKind::Op(op) => {
                    let shape = match op.kind {
                        OpKind::Emit(..) | OpKind::Collect(..) => "box",
                        _ => "ellipse",
                    };
                    writeln!(out, "    n{} [label=\"{}\", shape={shape}];", v.id, escape(&v.label()))
                }
            }
            .expect("writing to a String cannot fail");
        }
        let mut edges = self.edges.clone();
        edges.sort();
        for e in edges {
            let binary = matches!(&self.vertices[e.to].kind, VertexKind::Op(op) if op.kind.is_binary());
            if binary {
                writeln!(out, "    n{} -> n{} [headlabel=\"{}\"];", e.from, e.to, e.port + 1)
            } else {
                writeln!(out, "    n{} -> n{};", e.from, e.to)
            }
            .expect("writing to a String cannot fail");
        }
        out.push_str("}\n");
        out
    }

    /// Graph isomorphism respecting vertex shapes, edge ports (for binary
    /// operators) and the input/output vertices.
    pub fn is_isomorphic(&self, other: &DataflowGraph) -> bool {
        if self.vertices.len() != other.vertices.len() || self.edges.len() != other.edges.len() {
            return false;
        }
        let a: Vec<_> = (0..self.vertices.len()).map(|v| self.signature(v)).collect();
        let b: Vec<_> = (0..other.vertices.len()).map(|v| other.signature(v)).collect();
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort();
        sb.sort();
        if sa != sb {
            return false;
        }
        let mine = self.edge_counts();
        let theirs = other.edge_counts();
        let mut search = Search {
            a: &a,
            b: &b,
            mine: &mine,
            theirs: &theirs,
            mapping: vec![usize::MAX; a.len()],
            used: vec![false; b.len()],
        };
        search.extend(0)
    }

    fn signature(&self, v: VertexId) -> (String, usize, usize, bool, bool) {
        (
            self.vertices[v].shape(),
            self.inputs(v).len(),
            self.outputs(v).len(),
            self.input == Some(v),
            self.output == Some(v),
        )
    }

    /// Edge multiplicities keyed by (from, to, port); ports only count for
    /// binary operators, whose inputs are not interchangeable.
    fn edge_counts(&self) -> HashMap<(VertexId, VertexId, usize), usize> {
        let mut counts = HashMap::new();
        for e in &self.edges {
            let ported = matches!(&self.vertices[e.to].kind, VertexKind::Op(op) if op.kind.is_binary());
            *counts.entry((e.from, e.to, if ported { e.port } else { 0 })).or_insert(0) += 1;
        }
        counts
    }
}

type Signature = (String, usize, usize, bool, bool);
type EdgeCounts = HashMap<(VertexId, VertexId, usize), usize>;

struct Search<'a> {
    a: &'a [Signature],
    b: &'a [Signature],
    mine: &'a EdgeCounts,
    theirs: &'a EdgeCounts,
    mapping: Vec<usize>,
    used: Vec<bool>,
}

impl Search<'_> {
    fn extend(&mut self, v: usize) -> bool {
        if v == self.a.len() {
            return true;
        }
        for w in 0..self.b.len() {
            if self.used[w] || self.a[v] != self.b[w] {
                continue;
            }
            self.mapping[v] = w;
            if self.consistent(v) {
                self.used[w] = true;
                if self.extend(v + 1) {
                    return true;
                }
                self.used[w] = false;
            }
        }
        self.mapping[v] = usize::MAX;
        false
    }

    // Every edge between `v` and an already mapped vertex must be matched
    // with the same multiplicity, and vice versa.
    fn consistent(&self, v: usize) -> bool {
        let mapped = |x: usize| x <= v;
        let forward = self.mine.iter().all(|(&(f, t, p), &n)| {
            if !(mapped(f) && mapped(t)) || (f != v && t != v) {
                return true;
            }
            self.theirs.get(&(self.mapping[f], self.mapping[t], p)) == Some(&n)
        });
        let inverse: HashMap<usize, usize> = (0..=v).map(|x| (self.mapping[x], x)).collect();
        let backward = self.theirs.iter().all(|(&(f, t, p), &n)| {
            match (inverse.get(&f), inverse.get(&t)) {
                (Some(&x), Some(&y)) if x == v || y == v => self.mine.get(&(x, y, p)) == Some(&n),
                _ => true,
            }
        });
        forward && backward
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Lowers a pipeline to its dataflow graph.
pub fn build_graph(p: &Pipeline) -> DataflowGraph {
    let mut g = DataflowGraph::default();
    let sub = g.lower(p);
    g.input = sub.input;
    g.output = sub.output;
    g
}

/// Labels of the vertices and edges, for inspection.
pub fn labelled_edges(g: &DataflowGraph) -> Vec<(String, String)> {
    let labels: HashMap<VertexId, String> = g.vertices.iter().map(|v| (v.id, v.label())).collect();
    g.edges.iter().map(|e| (labels[&e.from].clone(), labels[&e.to].clone())).collect()
}
