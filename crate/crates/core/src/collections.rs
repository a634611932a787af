//! Semantic collections and the partitioning/windowing machinery.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::kernel::{eval_kernel, Expr, KernelError};
use crate::values::{DataType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructureType {
    Bag,
    List,
    Stream,
}

impl StructureType {
    pub const ALL: [StructureType; 3] = [StructureType::Bag, StructureType::List, StructureType::Stream];

    pub fn is_bounded(self) -> bool {
        self != StructureType::Stream
    }

    pub fn is_ordered(self) -> bool {
        self != StructureType::Bag
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureType::Bag => "bag",
            StructureType::List => "list",
            StructureType::Stream => "stream",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        StructureType::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for StructureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of structure types, used for structure polymorphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructureSet(u8);

impl StructureSet {
    pub const EMPTY: StructureSet = StructureSet(0);
    /// Σ
    pub const ALL: StructureSet = StructureSet(0b111);
    /// Σ_b
    pub const BOUNDED: StructureSet = StructureSet(0b011);
    /// Σ_u
    pub const UNBOUNDED: StructureSet = StructureSet(0b100);
    /// Σ_o
    pub const ORDERED: StructureSet = StructureSet(0b110);

    fn bit(s: StructureType) -> u8 {
        match s {
            StructureType::Bag => 1,
            StructureType::List => 2,
            StructureType::Stream => 4,
        }
    }

    pub fn single(s: StructureType) -> Self {
        StructureSet(Self::bit(s))
    }

    pub fn contains(self, s: StructureType) -> bool {
        self.0 & Self::bit(s) != 0
    }

    pub fn intersect(self, other: StructureSet) -> StructureSet {
        StructureSet(self.0 & other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = StructureType> {
        StructureType::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    /// The member if this is a singleton.
    pub fn as_single(self) -> Option<StructureType> {
        let mut it = self.iter();
        match (it.next(), it.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for StructureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StructureSet::ALL => f.write_str("Σ"),
            StructureSet::BOUNDED => f.write_str("Σ_b"),
            StructureSet::ORDERED => f.write_str("Σ_o"),
            _ => {
                let names: Vec<&str> = self.iter().map(StructureType::name).collect();
                write!(f, "{{{}}}", names.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CollectionType {
    pub data: DataType,
    pub structure: StructureType,
}

impl fmt::Display for CollectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, {}⟩", self.data, self.structure)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CollectionError {
    #[error("structure error: {0}")]
    Structure(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A token: a whole collection. Bags are multisets; lists and streams are
/// timestamped sequences, not necessarily time-ordered.
#[derive(Debug, Clone)]
pub enum SemCollection {
    Multiset(Vec<Value>),
    Sequence { items: Vec<(u64, Value)>, bounded: bool },
}

impl SemCollection {
    pub fn bag(values: impl IntoIterator<Item = Value>) -> Self {
        SemCollection::Multiset(values.into_iter().collect())
    }

    pub fn list(items: impl IntoIterator<Item = (u64, Value)>) -> Self {
        SemCollection::Sequence {
            items: items.into_iter().collect(),
            bounded: true,
        }
    }

    pub fn stream(items: impl IntoIterator<Item = (u64, Value)>) -> Self {
        SemCollection::Sequence {
            items: items.into_iter().collect(),
            bounded: false,
        }
    }

    pub fn empty(structure: StructureType) -> Self {
        Self::of(structure, Vec::new())
    }

    /// Builds a collection of the given structure from timestamped items;
    /// bags drop the timestamps.
    pub fn of(structure: StructureType, items: Vec<(u64, Value)>) -> Self {
        match structure {
            StructureType::Bag => SemCollection::Multiset(items.into_iter().map(|(_, v)| v).collect()),
            StructureType::List => SemCollection::list(items),
            StructureType::Stream => SemCollection::stream(items),
        }
    }

    pub fn structure(&self) -> StructureType {
        match self {
            SemCollection::Multiset(_) => StructureType::Bag,
            SemCollection::Sequence { bounded: true, .. } => StructureType::List,
            SemCollection::Sequence { bounded: false, .. } => StructureType::Stream,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SemCollection::Multiset(vs) => vs.len(),
            SemCollection::Sequence { items, .. } => items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Box<dyn Iterator<Item = &Value> + '_> {
        match self {
            SemCollection::Multiset(vs) => Box::new(vs.iter()),
            SemCollection::Sequence { items, .. } => Box::new(items.iter().map(|(_, v)| v)),
        }
    }

    /// Timestamped items; bag elements all carry timestamp 0.
    pub fn items(&self) -> Vec<(u64, Value)> {
        match self {
            SemCollection::Multiset(vs) => vs.iter().map(|v| (0, v.clone())).collect(),
            SemCollection::Sequence { items, .. } => items.clone(),
        }
    }

    /// The elements as a sorted vector: the canonical multiset view.
    pub fn sorted_values(&self) -> Vec<Value> {
        let mut vs: Vec<Value> = self.values().cloned().collect();
        vs.sort();
        vs
    }

    /// Whether timestamps are non-decreasing. Bags are trivially ordered.
    pub fn is_time_ordered(&self) -> bool {
        match self {
            SemCollection::Multiset(_) => true,
            SemCollection::Sequence { items, .. } => items.windows(2).all(|w| w[0].0 <= w[1].0),
        }
    }
}

/// Bags compare as multisets; sequences item by item.
impl PartialEq for SemCollection {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SemCollection::Multiset(_), SemCollection::Multiset(_)) => {
                self.sorted_values() == other.sorted_values()
            }
            (
                SemCollection::Sequence { items: a, bounded: x },
                SemCollection::Sequence { items: b, bounded: y },
            ) => x == y && a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WindowBasis {
    Count,
    Time,
}

impl fmt::Display for WindowBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowBasis::Count => "count",
            WindowBasis::Time => "time",
        })
    }
}

/// `(|W|, δ, basis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowingPolicy {
    pub size: u64,
    pub slide: u64,
    pub basis: WindowBasis,
}

impl WindowingPolicy {
    pub fn new(size: u64, slide: u64, basis: WindowBasis) -> Result<Self, CollectionError> {
        if size == 0 || slide == 0 {
            return Err(CollectionError::Structure(format!(
                "window size and slide must be positive, got ({size}, {slide})"
            )));
        }
        Ok(WindowingPolicy { size, slide, basis })
    }

    pub fn tumbling(n: u64) -> Self {
        WindowingPolicy {
            size: n.max(1),
            slide: n.max(1),
            basis: WindowBasis::Count,
        }
    }

    pub fn is_tumbling(&self) -> bool {
        self.size == self.slide
    }

    /// Indices of the time windows `[iδ, iδ+|W|)` containing `t`.
    fn time_windows_of(&self, t: u64) -> std::ops::RangeInclusive<u64> {
        let lo = if t >= self.size {
            (t - self.size) / self.slide + 1
        } else {
            0
        };
        lo..=t / self.slide
    }
}

impl fmt::Display for WindowingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.size, self.slide, self.basis)
    }
}

/// A key-extraction kernel `π : T → K`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitioningPolicy {
    pub kernel: Expr,
}

impl PartitioningPolicy {
    pub fn new(kernel: Expr) -> Self {
        PartitioningPolicy { kernel }
    }

    pub fn key(&self, v: &Value) -> Result<Value, KernelError> {
        eval_kernel(&self.kernel, std::slice::from_ref(v))
    }
}

/// The sub-collection of elements whose key under `pi` is `k`.
pub fn k_selection(c: &SemCollection, pi: &PartitioningPolicy, k: &Value) -> Result<SemCollection, KernelError> {
    Ok(match c {
        SemCollection::Multiset(vs) => {
            let mut out = Vec::new();
            for v in vs {
                if pi.key(v)? == *k {
                    out.push(v.clone());
                }
            }
            SemCollection::Multiset(out)
        }
        SemCollection::Sequence { items, bounded } => {
            let mut out = Vec::new();
            for (t, v) in items {
                if pi.key(v)? == *k {
                    out.push((*t, v.clone()));
                }
            }
            SemCollection::Sequence {
                items: out,
                bounded: *bounded,
            }
        }
    })
}

/// Splits `c` into its non-empty k-selections, ordered by key. Each group
/// keeps the source order and timestamps.
pub fn partition(c: &SemCollection, pi: &PartitioningPolicy) -> Result<Vec<(Value, SemCollection)>, KernelError> {
    let mut groups: BTreeMap<Value, Vec<(u64, Value)>> = BTreeMap::new();
    for (t, v) in c.items() {
        groups.entry(pi.key(&v)?).or_default().push((t, v));
    }
    let structure = c.structure();
    Ok(groups
        .into_iter()
        .map(|(k, items)| (k, SemCollection::of(structure, items)))
        .collect())
}

/// Stable sort of a bounded sequence by timestamp.
pub fn time_reorder(s: &SemCollection) -> Result<SemCollection, CollectionError> {
    match s {
        SemCollection::Sequence { items, bounded: true } => {
            let mut items = items.clone();
            items.sort_by_key(|(t, _)| *t);
            Ok(SemCollection::list(items))
        }
        other => Err(CollectionError::Structure(format!(
            "time reordering needs a list, got a {}",
            other.structure()
        ))),
    }
}

/// The windowed view of `s` under `w`: time-ordered bounded windows in
/// window-index order.
pub fn windowed_view(s: &SemCollection, w: &WindowingPolicy) -> Result<Vec<SemCollection>, CollectionError> {
    Ok(windowed_view_indexed(s, w)?.into_iter().map(|(_, c)| c).collect())
}

/// Like [`windowed_view`], tagging each window with its index `i` (the
/// window starting at position or time `i·δ`).
pub fn windowed_view_indexed(
    s: &SemCollection,
    w: &WindowingPolicy,
) -> Result<Vec<(u64, SemCollection)>, CollectionError> {
    let SemCollection::Sequence { items, .. } = s else {
        return Err(CollectionError::Structure("windowing needs an ordered collection, got a bag".into()));
    };
    let window = |mut items: Vec<(u64, Value)>| {
        items.sort_by_key(|(t, _)| *t);
        SemCollection::list(items)
    };
    let mut out = Vec::new();
    match w.basis {
        WindowBasis::Count => {
            let len = items.len() as u64;
            let mut i = 0;
            while i * w.slide < len {
                let start = i * w.slide;
                let end = (start + w.size).min(len);
                out.push((i, window(items[start as usize..end as usize].to_vec())));
                i += 1;
            }
        }
        WindowBasis::Time => {
            let mut windows: BTreeMap<u64, Vec<(u64, Value)>> = BTreeMap::new();
            for (t, v) in items {
                for i in w.time_windows_of(*t) {
                    windows.entry(i).or_default().push((*t, v.clone()));
                }
            }
            out.extend(windows.into_iter().map(|(i, items)| (i, window(items))));
        }
    }
    Ok(out)
}

/// Incremental windowing for unbounded sequences: items are pushed one at a
/// time and windows are released as soon as they are complete.
///
/// Count windows are exact. A time window closes when an item with timestamp
/// at or past its end arrives; items arriving after every window containing
/// them has closed are dropped and counted in [`IncrementalWindower::late`].
#[derive(Debug)]
pub struct IncrementalWindower {
    policy: WindowingPolicy,
    // Count basis: buffered items starting at absolute position `base`.
    buffer: VecDeque<(u64, Value)>,
    base: u64,
    pushed: u64,
    next: u64,
    // Time basis: open windows by index.
    open: BTreeMap<u64, Vec<(u64, Value)>>,
    max_ts: Option<u64>,
    late: u64,
}

impl IncrementalWindower {
    pub fn new(policy: WindowingPolicy) -> Self {
        IncrementalWindower {
            policy,
            buffer: VecDeque::new(),
            base: 0,
            pushed: 0,
            next: 0,
            open: BTreeMap::new(),
            max_ts: None,
            late: 0,
        }
    }

    pub fn late(&self) -> u64 {
        self.late
    }

    /// Adds one item, returning the windows it completes.
    pub fn push(&mut self, t: u64, v: Value) -> Vec<(u64, SemCollection)> {
        match self.policy.basis {
            WindowBasis::Count => self.push_count(t, v),
            WindowBasis::Time => self.push_time(t, v),
        }
    }

    /// Flushes the remaining (possibly partial) windows.
    pub fn finish(&mut self) -> Vec<(u64, SemCollection)> {
        let mut out = Vec::new();
        match self.policy.basis {
            WindowBasis::Count => {
                while self.next * self.policy.slide < self.pushed {
                    let start = self.next * self.policy.slide;
                    let end = (start + self.policy.size).min(self.pushed);
                    out.push((self.next, self.count_window(start, end)));
                    self.next += 1;
                }
                self.buffer.clear();
                self.base = self.pushed;
            }
            WindowBasis::Time => {
                for (i, items) in std::mem::take(&mut self.open) {
                    out.push((i, time_ordered(items)));
                }
            }
        }
        out
    }

    fn count_window(&self, start: u64, end: u64) -> SemCollection {
        let items = (start..end)
            .map(|p| self.buffer[(p - self.base) as usize].clone())
            .collect();
        time_ordered(items)
    }

    fn push_count(&mut self, t: u64, v: Value) -> Vec<(u64, SemCollection)> {
        let w = self.policy;
        self.pushed += 1;
        // Positions that no future window covers are never buffered.
        if self.pushed - 1 >= self.next * w.slide {
            self.buffer.push_back((t, v));
        } else {
            self.base += 1;
        }
        let mut out = Vec::new();
        while self.next * w.slide + w.size <= self.pushed {
            let start = self.next * w.slide;
            out.push((self.next, self.count_window(start, start + w.size)));
            self.next += 1;
            let keep_from = (self.next * w.slide).min(self.pushed);
            while self.base < keep_from {
                self.buffer.pop_front();
                self.base += 1;
            }
        }
        out
    }

    fn push_time(&mut self, t: u64, v: Value) -> Vec<(u64, SemCollection)> {
        let w = self.policy;
        let range = w.time_windows_of(t);
        // Items falling in the gap between windows (δ > |W|) belong nowhere.
        let mut placed = range.is_empty();
        for i in range {
            if i >= self.next {
                self.open.entry(i).or_default().push((t, v.clone()));
                placed = true;
            }
        }
        if !placed {
            self.late += 1;
        }
        let max_ts = self.max_ts.map_or(t, |m| m.max(t));
        self.max_ts = Some(max_ts);
        let mut out = Vec::new();
        if max_ts >= w.size {
            // Every window ending at or before `max_ts` is closed.
            let last_closed = (max_ts - w.size) / w.slide;
            while let Some(entry) = self.open.first_entry() {
                if *entry.key() > last_closed {
                    break;
                }
                let (i, items) = entry.remove_entry();
                out.push((i, time_ordered(items)));
            }
            self.next = self.next.max(last_closed + 1);
        }
        out
    }
}

fn time_ordered(mut items: Vec<(u64, Value)>) -> SemCollection {
    items.sort_by_key(|(t, _)| *t);
    SemCollection::list(items)
}
