//! Operator semantics over whole collections.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::ast::{OpKind, Operator, Pairing};
use crate::collections::{
    partition, windowed_view_indexed, IncrementalWindower, PartitioningPolicy, SemCollection, StructureType,
    WindowingPolicy,
};
use crate::kernel::{eval_kernel, Expr, KernelError};
use crate::values::Value;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OpError {
    #[error("{source}{}", item.as_ref().map(|v| format!(" (on item {v})")).unwrap_or_default())]
    Kernel { source: KernelError, item: Option<Value> },
    #[error("reduce of an empty collection")]
    EmptyReduce,
    #[error("{0}")]
    Structure(String),
    #[error("in group {key}: {source}")]
    Group { key: Value, source: Box<OpError> },
}

pub type OpResult<T> = Result<T, OpError>;

fn on_item(item: &Value) -> impl FnOnce(KernelError) -> OpError + '_ {
    move |source| OpError::Kernel {
        source,
        item: Some(item.clone()),
    }
}

fn no_item(source: KernelError) -> OpError {
    OpError::Kernel { source, item: None }
}

fn structure(msg: impl Into<String>) -> OpError {
    OpError::Structure(msg.into())
}

/// How fold+reduce splits its input before folding. The result must not
/// depend on the choice for a well-formed kernel triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chunking {
    Single,
    PerItem,
    Sized(usize),
    /// Chunk lengths in order; the last chunk absorbs any remainder.
    Explicit(Vec<usize>),
}

impl Chunking {
    fn split<'a, T>(&self, items: &'a [T]) -> Vec<&'a [T]> {
        if items.is_empty() {
            return Vec::new();
        }
        match self {
            Chunking::Single => vec![items],
            Chunking::PerItem => items.chunks(1).collect(),
            Chunking::Sized(n) => items.chunks((*n).max(1)).collect(),
            Chunking::Explicit(sizes) => {
                let mut out = Vec::new();
                let mut rest = items;
                for &n in sizes {
                    if rest.is_empty() {
                        break;
                    }
                    let (head, tail) = rest.split_at(n.min(rest.len()));
                    if !head.is_empty() {
                        out.push(head);
                    }
                    rest = tail;
                }
                if !rest.is_empty() {
                    out.push(rest);
                }
                out
            }
        }
    }
}

/// Settings shared by all operator firings of a run.
#[derive(Debug, Clone)]
pub struct OpConfig {
    /// Batching policy for element-wise and per-key operators on streams.
    pub batch: WindowingPolicy,
    pub chunking: Chunking,
}

impl Default for OpConfig {
    fn default() -> Self {
        OpConfig {
            batch: WindowingPolicy::tumbling(1000),
            chunking: Chunking::Sized(1000),
        }
    }
}

fn rebuild(c: &SemCollection, items: Vec<(u64, Value)>) -> SemCollection {
    match c {
        SemCollection::Multiset(_) => SemCollection::Multiset(items.into_iter().map(|(_, v)| v).collect()),
        SemCollection::Sequence { bounded, .. } => SemCollection::Sequence { items, bounded: *bounded },
    }
}

fn elementwise(f: &Expr, c: &SemCollection, flat: bool) -> OpResult<Vec<(u64, Value)>> {
    let mut out = Vec::with_capacity(c.len());
    for (t, v) in c.items() {
        let r = eval_kernel(f, std::slice::from_ref(&v)).map_err(on_item(&v))?;
        if flat {
            match r {
                Value::List(vs) => out.extend(vs.into_iter().map(|x| (t, x))),
                other => {
                    return Err(OpError::Kernel {
                        source: KernelError::Type {
                            span: f.span,
                            message: format!("flatmap kernel returned {other}, not a list"),
                        },
                        item: Some(v),
                    })
                }
            }
        } else {
            out.push((t, r));
        }
    }
    Ok(out)
}

/// Strict map: applies `f` item by item, keeping timestamps and order.
pub fn exec_map(f: &Expr, c: &SemCollection) -> OpResult<SemCollection> {
    Ok(rebuild(c, elementwise(f, c, false)?))
}

/// Strict flatmap: every output item inherits the timestamp of the item
/// it came from.
pub fn exec_flatmap(f: &Expr, c: &SemCollection) -> OpResult<SemCollection> {
    Ok(rebuild(c, elementwise(f, c, true)?))
}

/// Weak map/flatmap over a stream: the stream is cut into the batches of
/// the tumbling policy `batch`, each batch is time-reordered and mapped,
/// and the per-batch outputs are concatenated.
pub fn exec_unbounded_elementwise(
    f: &Expr,
    flat: bool,
    s: &SemCollection,
    batch: &WindowingPolicy,
) -> OpResult<SemCollection> {
    if !batch.is_tumbling() {
        return Err(structure(format!("execution batching must be tumbling, got {batch}")));
    }
    let mut late = 0;
    let mut out = Vec::with_capacity(s.len());
    for (_, w) in windows(s, batch, &mut late)? {
        out.extend(elementwise(f, &w, flat)?);
    }
    Ok(rebuild(s, out))
}

fn max_ts(items: &[(u64, Value)]) -> u64 {
    items.iter().map(|(t, _)| *t).max().unwrap_or(0)
}

fn singleton(c: &SemCollection, t: u64, v: Value) -> SemCollection {
    rebuild(c, vec![(t, v)])
}

fn bounded(c: &SemCollection, what: &str) -> OpResult<()> {
    match c {
        SemCollection::Sequence { bounded: false, .. } => Err(structure(format!("{what} needs a bounded collection, got a stream"))),
        _ => Ok(()),
    }
}

fn reduce_items(op: &Expr, items: &[(u64, Value)]) -> OpResult<Value> {
    let mut it = items.iter();
    let Some((_, first)) = it.next() else {
        return Err(OpError::EmptyReduce);
    };
    let mut acc = first.clone();
    for (_, v) in it {
        acc = eval_kernel(op, &[acc, v.clone()]).map_err(on_item(v))?;
    }
    Ok(acc)
}

/// `reduce ⊕`: a singleton holding the ⊕-sum; on sequences it carries the
/// largest input timestamp.
pub fn exec_reduce(op: &Expr, c: &SemCollection) -> OpResult<SemCollection> {
    bounded(c, "reduce")?;
    let items = c.items();
    let v = reduce_items(op, &items)?;
    Ok(singleton(c, max_ts(&items), v))
}

/// `fold+reduce ⊕₁ z ⊕₂`: folds each chunk from `z` with ⊕₁ and combines
/// the accumulators with ⊕₂. The empty collection yields `z`.
pub fn exec_fold_reduce(
    fold: &Expr,
    init: &Expr,
    combine: &Expr,
    c: &SemCollection,
    chunking: &Chunking,
) -> OpResult<SemCollection> {
    bounded(c, "fold+reduce")?;
    let items = c.items();
    let z = eval_kernel(init, &[]).map_err(no_item)?;
    let mut acc: Option<Value> = None;
    for chunk in chunking.split(&items) {
        let mut a = z.clone();
        for (_, v) in chunk {
            a = eval_kernel(fold, &[a, v.clone()]).map_err(on_item(v))?;
        }
        acc = Some(match acc {
            None => a,
            Some(prev) => eval_kernel(combine, &[prev, a]).map_err(no_item)?,
        });
    }
    Ok(singleton(c, max_ts(&items), acc.unwrap_or(z)))
}

/// Applies a bare combine (`reduce` or `fold+reduce`) to a bounded collection.
pub fn exec_combine(kind: &OpKind, c: &SemCollection, chunking: &Chunking) -> OpResult<SemCollection> {
    match kind {
        OpKind::Reduce(op) => exec_reduce(op, c),
        OpKind::FoldReduce { fold, init, combine } => exec_fold_reduce(fold, init, combine, c, chunking),
        other => Err(structure(format!("`{}` is not a combine", other.keyword()))),
    }
}

/// Recomposes per-group results: multiset union for bags, otherwise a
/// stable timestamp sort of the groups concatenated in key order.
fn recombine(structure: StructureType, parts: Vec<SemCollection>) -> SemCollection {
    let mut items: Vec<(u64, Value)> = parts.iter().flat_map(SemCollection::items).collect();
    if structure.is_ordered() {
        items.sort_by_key(|(t, _)| *t);
    }
    SemCollection::of(structure, items)
}

/// `p op π c`: applies `inner` to every k-selection of `c`.
pub fn exec_partitioned(
    c: &SemCollection,
    pi: &PartitioningPolicy,
    inner: &mut dyn FnMut(&SemCollection) -> OpResult<SemCollection>,
) -> OpResult<SemCollection> {
    let groups = partition(c, pi).map_err(no_item)?;
    let mut parts = Vec::with_capacity(groups.len());
    for (key, g) in groups {
        parts.push(inner(&g).map_err(|e| OpError::Group {
            key,
            source: Box::new(e),
        })?);
    }
    Ok(recombine(c.structure(), parts))
}

/// The windows of an ordered collection in index order. Streams are
/// windowed incrementally and late items are added to `late`.
pub fn windows(s: &SemCollection, w: &WindowingPolicy, late: &mut u64) -> OpResult<Vec<(u64, SemCollection)>> {
    match s {
        SemCollection::Multiset(_) => Err(structure("windowing needs an ordered collection, got a bag")),
        SemCollection::Sequence { bounded: true, .. } => {
            windowed_view_indexed(s, w).map_err(|e| structure(e.to_string()))
        }
        SemCollection::Sequence { items, bounded: false } => {
            let mut win = IncrementalWindower::new(*w);
            let mut out = Vec::new();
            for (t, v) in items {
                out.extend(win.push(*t, v.clone()));
            }
            out.extend(win.finish());
            *late += win.late();
            out.sort_by_key(|(i, _)| *i);
            Ok(out)
        }
    }
}

/// `w op ω s`: applies `inner` to each window and concatenates the results
/// in window-index order.
pub fn exec_windowed(
    s: &SemCollection,
    w: &WindowingPolicy,
    inner: &mut dyn FnMut(&SemCollection) -> OpResult<SemCollection>,
    late: &mut u64,
) -> OpResult<SemCollection> {
    let mut out = Vec::new();
    for (_, win) in windows(s, w, late)? {
        out.extend(inner(&win)?.items());
    }
    Ok(rebuild(s, out))
}

/// Runs a unary operator on its input token.
pub fn exec_unary(op: &Operator, c: &SemCollection, cfg: &OpConfig, late: &mut u64) -> OpResult<SemCollection> {
    let stream = matches!(c, SemCollection::Sequence { bounded: false, .. });
    match &op.kind {
        OpKind::Map(f) | OpKind::FlatMap(f) => {
            let flat = matches!(op.kind, OpKind::FlatMap(_));
            if stream {
                exec_unbounded_elementwise(f, flat, c, &cfg.batch)
            } else if flat {
                exec_flatmap(f, c)
            } else {
                exec_map(f, c)
            }
        }
        kind @ (OpKind::Reduce(_) | OpKind::FoldReduce { .. }) => {
            let mut inner = |x: &SemCollection| exec_combine(kind, x, &cfg.chunking);
            let pi = op.partition.clone().map(PartitioningPolicy::new);
            match (&op.window, &pi) {
                (None, None) => inner(c),
                (None, Some(pi)) if stream => {
                    let mut batch_late = 0;
                    let mut out = Vec::new();
                    for (_, b) in windows(c, &cfg.batch, &mut batch_late)? {
                        out.extend(exec_partitioned(&b, pi, &mut inner)?.items());
                    }
                    Ok(rebuild(c, out))
                }
                (None, Some(pi)) => exec_partitioned(c, pi, &mut inner),
                (Some(w), None) => exec_windowed(c, w, &mut inner, late),
                (Some(w), Some(pi)) => exec_partitioned(c, pi, &mut |g| exec_windowed(g, w, &mut inner, late)),
            }
        }
        other => Err(structure(format!("`{}` is not a unary operator", other.keyword()))),
    }
}

fn pair_items(pairing: Pairing, a: &SemCollection, b: &SemCollection) -> OpResult<Vec<(u64, Value, Value)>> {
    match pairing {
        Pairing::Zip => {
            if matches!(a, SemCollection::Multiset(_)) || matches!(b, SemCollection::Multiset(_)) {
                return Err(structure("zip needs ordered collections, got a bag"));
            }
            Ok(a.items()
                .into_iter()
                .zip(b.items())
                .map(|((t1, x), (t2, y))| (t1.max(t2), x, y))
                .collect())
        }
        Pairing::Join => {
            let right = b.items();
            let mut out = Vec::with_capacity(a.len() * right.len());
            for (t1, x) in a.items() {
                for (t2, y) in &right {
                    out.push((t1.max(*t2), x.clone(), y.clone()));
                }
            }
            Ok(out)
        }
    }
}

/// A bare binary operator on two bounded collections (or two windows).
fn pair_bare(kind: &OpKind, a: &SemCollection, b: &SemCollection, chunking: &Chunking) -> OpResult<SemCollection> {
    match kind {
        OpKind::BMap { pairing, f, flat } => {
            let mut out = Vec::new();
            for (t, x, y) in pair_items(*pairing, a, b)? {
                let r = eval_kernel(f, &[x.clone(), y.clone()]).map_err(|source| OpError::Kernel {
                    source,
                    item: Some(Value::pair(x, y)),
                })?;
                if *flat {
                    match r {
                        Value::List(vs) => out.extend(vs.into_iter().map(|v| (t, v))),
                        other => {
                            return Err(OpError::Kernel {
                                source: KernelError::Type {
                                    span: f.span,
                                    message: format!("flatmap kernel returned {other}, not a list"),
                                },
                                item: None,
                            })
                        }
                    }
                } else {
                    out.push((t, r));
                }
            }
            Ok(rebuild(a, out))
        }
        OpKind::BCombine { pairing, inner } => {
            let paired: Vec<(u64, Value)> =
                pair_items(*pairing, a, b)?.into_iter().map(|(t, x, y)| (t, Value::pair(x, y))).collect();
            if paired.is_empty() {
                return Ok(rebuild(a, Vec::new()));
            }
            exec_combine(inner, &rebuild(a, paired), chunking)
        }
        other => Err(structure(format!("`{}` is not a binary operator", other.keyword()))),
    }
}

fn pair_windowed(
    kind: &OpKind,
    w: Option<&WindowingPolicy>,
    a: &SemCollection,
    b: &SemCollection,
    chunking: &Chunking,
    late: &mut u64,
) -> OpResult<SemCollection> {
    let Some(w) = w else {
        bounded(a, "pairing")?;
        bounded(b, "pairing")?;
        return pair_bare(kind, a, b, chunking);
    };
    let right = windows(b, w, late)?;
    let mut out = Vec::new();
    let mut j = 0;
    for (i, left) in windows(a, w, late)? {
        while j < right.len() && right[j].0 < i {
            j += 1;
        }
        if j < right.len() && right[j].0 == i {
            out.extend(pair_bare(kind, &left, &right[j].1, chunking)?.items());
        }
    }
    Ok(rebuild(a, out))
}

/// Runs a binary operator. Windowed variants pair window `i` of the left
/// input with window `i` of the right one; partitioned variants pair the
/// k-selections of keys present on both sides.
pub fn exec_pair(
    op: &Operator,
    a: &SemCollection,
    b: &SemCollection,
    cfg: &OpConfig,
    late: &mut u64,
) -> OpResult<SemCollection> {
    if !op.kind.is_binary() {
        return Err(structure(format!("`{}` is not a binary operator", op.kind.keyword())));
    }
    if a.structure() != b.structure() {
        return Err(structure(format!(
            "paired collections differ in structure: {} and {}",
            a.structure(),
            b.structure()
        )));
    }
    let Some(pi) = op.partition.clone().map(PartitioningPolicy::new) else {
        return pair_windowed(&op.kind, op.window.as_ref(), a, b, &cfg.chunking, late);
    };
    let left = partition(a, &pi).map_err(no_item)?;
    let right = partition(b, &pi).map_err(no_item)?;
    let mut parts = Vec::new();
    let mut j = 0;
    for (key, ga) in left {
        while j < right.len() && right[j].0 < key {
            j += 1;
        }
        if j < right.len() && right[j].0 == key {
            let r = pair_windowed(&op.kind, op.window.as_ref(), &ga, &right[j].1, &cfg.chunking, late)
                .map_err(|e| OpError::Group {
                    key: key.clone(),
                    source: Box::new(e),
                })?;
            parts.push(r);
        }
    }
    Ok(recombine(a.structure(), parts))
}

/// Compares remaining suffixes under (timestamp, value), an exhausted
/// suffix counting as larger than any item.
fn suffix_order(x: &[(u64, Value)], y: &[(u64, Value)]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        let o = a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1));
        if o != Ordering::Equal {
            return o;
        }
    }
    y.len().cmp(&x.len())
}

/// Merges collections of one structure type. Bags are unioned. Sequences
/// are interleaved keeping each input's order. The deterministic
/// interleaving is the lexicographically least one under (timestamp,
/// value), which makes merge commutative and associative and keeps
/// time-ordered inputs time-ordered; otherwise the interleaving is random.
pub fn exec_merge(inputs: &[&SemCollection], deterministic: bool, rng: &mut impl Rng) -> OpResult<SemCollection> {
    let Some(first) = inputs.first() else {
        return Err(structure("merge of no collections"));
    };
    let structure_type = first.structure();
    if let Some(c) = inputs.iter().find(|c| c.structure() != structure_type) {
        return Err(structure(format!(
            "merged collections differ in structure: {} and {}",
            structure_type,
            c.structure()
        )));
    }
    let seqs: Vec<Vec<(u64, Value)>> = inputs.iter().map(|c| c.items()).collect();
    let total = seqs.iter().map(Vec::len).sum();
    if !structure_type.is_ordered() {
        return Ok(SemCollection::of(structure_type, seqs.into_iter().flatten().collect()));
    }
    let mut pos = vec![0; seqs.len()];
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        let live: Vec<usize> = (0..seqs.len()).filter(|&i| pos[i] < seqs[i].len()).collect();
        let pick = if deterministic {
            live.iter()
                .copied()
                .min_by(|&i, &j| suffix_order(&seqs[i][pos[i]..], &seqs[j][pos[j]..]).then(i.cmp(&j)))
                .expect("unfinished merge has a live input")
        } else {
            live[rng.gen_range(0..live.len())]
        };
        out.push(seqs[pick][pos[pick]].clone());
        pos[pick] += 1;
    }
    Ok(SemCollection::of(structure_type, out))
}
