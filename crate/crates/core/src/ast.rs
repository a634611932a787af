//! Operators and pipelines, and their structural normal form.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::collections::{CollectionType, WindowingPolicy};
use crate::kernel::Expr;
use crate::lexer::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pairing {
    Zip,
    Join,
}

impl Pairing {
    pub fn prefix(self) -> &'static str {
        match self {
            Pairing::Zip => "zip",
            Pairing::Join => "join",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    File(String),
    /// A `host:port` address, or a name bound at run time.
    Socket(String),
    /// A file of `<timestamp>\t<literal>` records.
    Replay(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sink {
    File(String),
    Socket(String),
    Stdout,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    Map(Expr),
    FlatMap(Expr),
    Reduce(Expr),
    FoldReduce { fold: Expr, init: Expr, combine: Expr },
    BMap { pairing: Pairing, f: Expr, flat: bool },
    /// `inner` is a `Reduce` or `FoldReduce` over the paired collection.
    BCombine { pairing: Pairing, inner: Box<OpKind> },
    Emit(Source, CollectionType),
    Collect(Sink, CollectionType),
}

impl OpKind {
    /// Whether the family supports windowing/partitioning decomposition.
    pub fn decomposable(&self) -> bool {
        !matches!(
            self,
            OpKind::Map(_) | OpKind::FlatMap(_) | OpKind::Emit(..) | OpKind::Collect(..)
        )
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, OpKind::BMap { .. } | OpKind::BCombine { .. })
    }

    pub fn is_combine(&self) -> bool {
        matches!(self, OpKind::Reduce(_) | OpKind::FoldReduce { .. } | OpKind::BCombine { .. })
    }

    /// Family keyword as written in programs, e.g. `join-fold+reduce`.
    pub fn keyword(&self) -> String {
        match self {
            OpKind::Map(_) => "map".into(),
            OpKind::FlatMap(_) => "flatmap".into(),
            OpKind::Reduce(_) => "reduce".into(),
            OpKind::FoldReduce { .. } => "fold+reduce".into(),
            OpKind::BMap { pairing, flat, .. } => {
                format!("{}-{}", pairing.prefix(), if *flat { "flatmap" } else { "map" })
            }
            OpKind::BCombine { pairing, inner } => format!("{}-{}", pairing.prefix(), inner.keyword()),
            OpKind::Emit(Source::File(_), _) => "from-file".into(),
            OpKind::Emit(Source::Socket(_), _) => "from-socket".into(),
            OpKind::Emit(Source::Replay(_), _) => "from-replay".into(),
            OpKind::Collect(Sink::File(_), _) => "to-file".into(),
            OpKind::Collect(Sink::Socket(_), _) => "to-socket".into(),
            OpKind::Collect(Sink::Stdout, _) => "to-stdout".into(),
        }
    }
}

/// An operator with its optional decomposition modifiers.
///
/// `name` and `span` are labels only: they take no part in equality,
/// ordering or hashing.
#[derive(Debug, Clone)]
pub struct Operator {
    pub kind: OpKind,
    pub window: Option<WindowingPolicy>,
    pub partition: Option<Expr>,
    pub name: Option<String>,
    pub span: Span,
}

impl Operator {
    pub fn new(kind: OpKind) -> Self {
        Operator {
            kind,
            window: None,
            partition: None,
            name: None,
            span: Span::default(),
        }
    }

    pub fn windowed(mut self, w: WindowingPolicy) -> Self {
        self.window = Some(w);
        self
    }

    pub fn partitioned(mut self, pi: Expr) -> Self {
        self.partition = Some(pi);
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Drops modifiers that have no effect on non-decomposable families.
    pub fn normalize(&self) -> Operator {
        let mut op = self.clone();
        if !op.kind.decomposable() {
            op.window = None;
            op.partition = None;
        }
        op
    }

    /// Modifier prefix (`w`, `p`, `wp` or empty) followed by the family.
    pub fn family(&self) -> String {
        format!("{}{}", self.modifier_prefix(), self.kind.keyword())
    }

    fn modifier_prefix(&self) -> &'static str {
        match (self.window.is_some(), self.partition.is_some()) {
            (false, false) => "",
            (true, false) => "w",
            (false, true) => "p",
            (true, true) => "wp",
        }
    }

    /// Display label: the declared name, or the family.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.family())
    }

    fn key(&self) -> (&OpKind, &Option<WindowingPolicy>, &Option<Expr>) {
        (&self.kind, &self.window, &self.partition)
    }
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Operator {}

impl PartialOrd for Operator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Operator {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl Hash for Operator {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PipelineKind {
    New(Operator),
    /// `to p p1 … pn`; a single destination is the linear `p | p1`.
    To(Box<Pipeline>, Vec<Pipeline>),
    Pair(Box<Pipeline>, Box<Pipeline>, Operator),
    Merge(Box<Pipeline>, Box<Pipeline>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pipeline {
    pub kind: PipelineKind,
    pub span: Span,
}

impl Pipeline {
    pub fn new(op: Operator) -> Self {
        Pipeline::from_kind(PipelineKind::New(op))
    }

    pub fn to(p: Pipeline, dests: Vec<Pipeline>) -> Self {
        Pipeline::from_kind(PipelineKind::To(Box::new(p), dests))
    }

    /// Linear composition `p | q`.
    pub fn then(self, q: Pipeline) -> Self {
        Pipeline::to(self, vec![q])
    }

    pub fn pair(p: Pipeline, q: Pipeline, op: Operator) -> Self {
        Pipeline::from_kind(PipelineKind::Pair(Box::new(p), Box::new(q), op))
    }

    pub fn merge(p: Pipeline, q: Pipeline) -> Self {
        Pipeline::from_kind(PipelineKind::Merge(Box::new(p), Box::new(q)))
    }

    pub fn from_kind(kind: PipelineKind) -> Self {
        Pipeline {
            kind,
            span: Span::default(),
        }
    }

    pub fn with_span(mut self, span: Span) -> Self {
        self.span = span;
        self
    }

    /// All operators in the term, left to right.
    pub fn operators(&self) -> Vec<&Operator> {
        let mut out = Vec::new();
        self.collect_operators(&mut out);
        out
    }

    fn collect_operators<'a>(&'a self, out: &mut Vec<&'a Operator>) {
        match &self.kind {
            PipelineKind::New(op) => out.push(op),
            PipelineKind::To(p, ds) => {
                p.collect_operators(out);
                for d in ds {
                    d.collect_operators(out);
                }
            }
            PipelineKind::Pair(p, q, op) => {
                p.collect_operators(out);
                q.collect_operators(out);
                out.push(op);
            }
            PipelineKind::Merge(p, q) => {
                p.collect_operators(out);
                q.collect_operators(out);
            }
        }
    }

    fn is_linear_to(&self) -> bool {
        matches!(&self.kind, PipelineKind::To(_, ds) if ds.len() == 1)
    }

    /// Canonical form under the structural equivalences: linear `to` chains
    /// right-associated, destinations sorted, merges flattened, sorted and
    /// right-associated, and modifiers erased where they have no effect.
    pub fn normalize(&self) -> Pipeline {
        let kind = match &self.kind {
            PipelineKind::New(op) => PipelineKind::New(op.normalize()),
            PipelineKind::To(p, ds) => {
                let p = p.normalize();
                let mut ds: Vec<Pipeline> = ds.iter().map(Pipeline::normalize).collect();
                if ds.len() == 1 {
                    if let PipelineKind::To(a, inner) = &p.kind {
                        if inner.len() == 1 {
                            // (a | b) | c  ==>  a | (b | c)
                            let rest = Pipeline::to(inner[0].clone(), ds).with_span(inner[0].span).normalize();
                            return Pipeline::to((**a).clone(), vec![rest]).with_span(self.span);
                        }
                    }
                }
                ds.sort();
                PipelineKind::To(Box::new(p), ds)
            }
            PipelineKind::Pair(p, q, op) => {
                PipelineKind::Pair(Box::new(p.normalize()), Box::new(q.normalize()), op.normalize())
            }
            PipelineKind::Merge(..) => {
                let mut parts = Vec::new();
                self.merge_operands(&mut parts);
                let mut parts: Vec<Pipeline> = parts.into_iter().map(Pipeline::normalize).collect();
                parts.sort();
                let last = parts.pop().expect("merge has operands");
                return parts
                    .into_iter()
                    .rev()
                    .fold(last, |acc, p| Pipeline::merge(p, acc))
                    .with_span(self.span);
            }
        };
        Pipeline { kind, span: self.span }
    }

    /// Operands of a tree of merges, flattening nested merges.
    pub fn merge_operands<'a>(&'a self, out: &mut Vec<&'a Pipeline>) {
        match &self.kind {
            PipelineKind::Merge(p, q) => {
                p.merge_operands(out);
                q.merge_operands(out);
            }
            _ => out.push(self),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let prec = match &self.kind {
            _ if self.is_linear_to() => 1,
            PipelineKind::Merge(..) => 2,
            _ => 3,
        };
        if prec < ctx {
            f.write_str("(")?;
        }
        match &self.kind {
            PipelineKind::New(op) => write!(f, "new ({op})")?,
            PipelineKind::To(p, ds) if ds.len() == 1 => {
                p.fmt_prec(f, 1)?;
                f.write_str(" | ")?;
                ds[0].fmt_prec(f, 2)?;
            }
            PipelineKind::To(p, ds) => {
                f.write_str("to(")?;
                p.fmt_prec(f, 0)?;
                f.write_str("; ")?;
                for (i, d) in ds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    d.fmt_prec(f, 0)?;
                }
                f.write_str(")")?;
            }
            PipelineKind::Merge(p, q) => {
                p.fmt_prec(f, 2)?;
                f.write_str(" + ")?;
                q.fmt_prec(f, 3)?;
            }
            PipelineKind::Pair(p, q, op) => {
                f.write_str("pair(")?;
                p.fmt_prec(f, 0)?;
                f.write_str(", ")?;
                q.fmt_prec(f, 0)?;
                write!(f, ", {op})")?;
            }
        }
        if prec < ctx {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Whether two pipelines are equal up to the structural equivalences.
pub fn structurally_equal(p: &Pipeline, q: &Pipeline) -> bool {
    p.normalize() == q.normalize()
}

fn quoted(s: &str) -> String {
    crate::values::Value::Str(s.to_string()).to_string()
}

fn endpoint(s: &str) -> String {
    let bare = !s.is_empty()
        && s.starts_with(|c: char| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if bare {
        s.to_string()
    } else {
        quoted(s)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = self.modifier_prefix();
        if !prefix.is_empty() {
            write!(f, "{prefix} ")?;
        }
        write!(f, "{}", self.kind.keyword())?;
        match &self.kind {
            OpKind::Map(k) | OpKind::FlatMap(k) | OpKind::Reduce(k) | OpKind::BMap { f: k, .. } => {
                write!(f, " {}", k.to_atom_string())?
            }
            OpKind::FoldReduce { fold, init, combine } => write_fold(f, fold, init, combine)?,
            OpKind::BCombine { inner, .. } => match &**inner {
                OpKind::Reduce(k) => write!(f, " {}", k.to_atom_string())?,
                OpKind::FoldReduce { fold, init, combine } => write_fold(f, fold, init, combine)?,
                other => write!(f, " <invalid {}>", other.keyword())?,
            },
            OpKind::Emit(src, ty) => {
                match src {
                    Source::File(p) | Source::Replay(p) => write!(f, " {}", quoted(p))?,
                    Source::Socket(e) => write!(f, " {}", endpoint(e))?,
                }
                write!(f, " as {} of {}", ty.structure, ty.data)?;
            }
            OpKind::Collect(sink, ty) => {
                match sink {
                    Sink::File(p) => write!(f, " {}", quoted(p))?,
                    Sink::Socket(e) => write!(f, " {}", endpoint(e))?,
                    Sink::Stdout => {}
                }
                write!(f, " as {} of {}", ty.structure, ty.data)?;
            }
        }
        if let Some(pi) = &self.partition {
            write!(f, " by {}", pi.to_atom_string())?;
        }
        if let Some(w) = &self.window {
            write!(f, " win {w}")?;
        }
        Ok(())
    }
}

fn write_fold(f: &mut fmt::Formatter<'_>, fold: &Expr, init: &Expr, combine: &Expr) -> fmt::Result {
    write!(
        f,
        " {} {} {}",
        fold.to_atom_string(),
        init.to_atom_string(),
        combine.to_atom_string()
    )
}

/// Surface syntax; parses back to an equal term.
impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collections::{StructureType, WindowBasis};
    use crate::kernel::parse_kernel;
    use crate::values::DataType;

    fn k(src: &str) -> Expr {
        parse_kernel(src).unwrap()
    }

    fn map(src: &str) -> Pipeline {
        Pipeline::new(Operator::new(OpKind::Map(k(src))))
    }

    fn source(path: &str) -> Pipeline {
        Pipeline::new(Operator::new(OpKind::Emit(
            Source::File(path.into()),
            CollectionType {
                data: DataType::Str,
                structure: StructureType::Bag,
            },
        )))
    }

    #[test]
    fn linear_to_is_right_associated() {
        let (a, b, c) = (map("\\x. x"), map("\\x. x + 1"), map("\\x. x * 2"));
        let left = a.clone().then(b.clone()).then(c.clone());
        let right = a.clone().then(b.clone().then(c.clone()));
        assert_eq!(left.normalize(), right.normalize());
        assert_eq!(left.normalize(), right);
    }

    #[test]
    fn branching_to_is_not_reassociated() {
        let (a, b, c, d) = (map("\\x. x"), map("\\x. x + 1"), map("\\x. x * 2"), map("\\x. x - 1"));
        let branching = Pipeline::to(a.clone(), vec![b.clone(), c.clone()]).then(d.clone());
        let moved = Pipeline::to(a, vec![b.then(d.clone()), c.then(d)]);
        assert!(!structurally_equal(&branching, &moved));
    }

    #[test]
    fn destinations_and_merges_commute() {
        let (a, b, c) = (map("\\x. x"), map("\\x. x + 1"), map("\\x. x * 2"));
        assert!(structurally_equal(
            &Pipeline::to(a.clone(), vec![b.clone(), c.clone()]),
            &Pipeline::to(a.clone(), vec![c.clone(), b.clone()])
        ));
        let (s1, s2, s3) = (source("x"), source("y"), source("z"));
        assert!(structurally_equal(&Pipeline::merge(s1.clone(), s2.clone()), &Pipeline::merge(s2.clone(), s1.clone())));
        assert!(structurally_equal(
            &Pipeline::merge(Pipeline::merge(s1.clone(), s2.clone()), s3.clone()),
            &Pipeline::merge(s3, Pipeline::merge(s2, s1))
        ));
    }

    #[test]
    fn modifiers_are_erased_on_non_decomposable_operators() {
        let w = WindowingPolicy::new(3, 1, WindowBasis::Count).unwrap();
        let plain = Operator::new(OpKind::Map(k("\\x. x")));
        let decorated = plain.clone().windowed(w).partitioned(k("\\x. x"));
        assert_ne!(plain, decorated);
        assert_eq!(plain, decorated.normalize());
        let reduce = Operator::new(OpKind::Reduce(k("\\x y. x + y")));
        assert_ne!(reduce.clone().windowed(w).normalize(), reduce);
    }

    #[test]
    fn distinct_constructors_differ() {
        let f = k("\\x. [x]");
        assert!(!structurally_equal(
            &Pipeline::new(Operator::new(OpKind::Map(f.clone()))),
            &Pipeline::new(Operator::new(OpKind::FlatMap(f)))
        ));
    }

    #[test]
    fn names_are_labels_only() {
        let a = Operator::new(OpKind::Map(k("\\x. x"))).named("id");
        assert_eq!(a, Operator::new(OpKind::Map(k("\\x. x"))));
        assert_eq!(a.label(), "id");
        assert_eq!(Operator::new(OpKind::Map(k("\\x. x"))).label(), "map");
    }

    #[test]
    fn printing() {
        let w = WindowingPolicy::new(10, 5, WindowBasis::Count).unwrap();
        let op = Operator::new(OpKind::Reduce(k("\\x y. min x y"))).windowed(w).partitioned(k("\\x. pi1 x"));
        assert_eq!(op.to_string(), "wp reduce (\\x y. min x y) by (\\x. pi1 x) win (10, 5, count)");
        let (a, b, c) = (map("\\x. x"), map("\\x. x + 1"), map("\\x. x * 2"));
        let p = Pipeline::merge(a.clone(), b.clone()).then(c.clone());
        assert_eq!(p.to_string(), "new (map (\\x. x)) + new (map (\\x. x + 1)) | new (map (\\x. x * 2))");
        let q = a.then(Pipeline::merge(b, c));
        assert_eq!(q.to_string(), "new (map (\\x. x)) | new (map (\\x. x + 1)) + new (map (\\x. x * 2))");
    }
}
