//! Vertex paths, the five-way comparison, subtree embeddings and their enumeration.
//!
//! A host tree is never materialised: it is just a depth, and vertices are
//! addressed by their root-to-vertex bit path (`""` is the root, `0` goes left).

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::types::{chain_type, subset_type, ChainType, SubsetType};

/// A vertex of a complete binary tree, named by its path from the root.
///
/// The derived order is the lexicographic order of the bit strings, which is
/// also the pre-order of the tree.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexPath {
    bits: Vec<bool>,
}

impl VertexPath {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Parses a string over `{0,1}`; the empty string is the root.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::BadPath(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn depth(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn is_root(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn child(&self, right: bool) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len() + 1);
        bits.extend_from_slice(&self.bits);
        bits.push(right);
        Self { bits }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.bits.is_empty() {
            None
        } else {
            Some(Self {
                bits: self.bits[..self.bits.len() - 1].to_vec(),
            })
        }
    }

    /// The prefix of length `len`.
    pub fn prefix(&self, len: usize) -> Self {
        Self {
            bits: self.bits[..len.min(self.bits.len())].to_vec(),
        }
    }

    /// Appends `suffix` below this vertex.
    pub fn join(&self, suffix: &VertexPath) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len() + suffix.bits.len());
        bits.extend_from_slice(&self.bits);
        bits.extend_from_slice(&suffix.bits);
        Self { bits }
    }

    /// True if `self` is an ancestor of `other` or equal to it.
    pub fn is_prefix_of(&self, other: &VertexPath) -> bool {
        other.bits.starts_with(&self.bits)
    }

    /// True if `self` is a proper ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &VertexPath) -> bool {
        self.bits.len() < other.bits.len() && self.is_prefix_of(other)
    }

    pub fn comparable(&self, other: &VertexPath) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// Position in breadth-first (heap) order: root 0, children of `i` at `2i+1`, `2i+2`.
    pub fn heap_index(&self) -> usize {
        assert!(
            self.bits.len() < usize::BITS as usize - 1,
            "path too deep for heap indexing"
        );
        let offset = self.bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        (1usize << self.bits.len()) - 1 + offset
    }

    pub fn from_heap_index(index: usize) -> Self {
        let level = (index + 1).ilog2() as usize;
        let offset = index + 1 - (1usize << level);
        let bits = (0..level).rev().map(|i| (offset >> i) & 1 == 1).collect();
        Self { bits }
    }

    /// Order by depth first, then lexicographically. Used for subset keys.
    pub fn depth_order(a: &VertexPath, b: &VertexPath) -> Ordering {
        a.bits.len().cmp(&b.bits.len()).then_with(|| a.bits.cmp(&b.bits))
    }
}

impl fmt::Display for VertexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for VertexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl std::str::FromStr for VertexPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for VertexPath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        VertexPath::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Sorts a subset into its canonical key order: by depth, then by bits.
pub fn sort_key(subset: &mut [VertexPath]) {
    subset.sort_by(VertexPath::depth_order);
}

/// How `v` sits relative to `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    VLeftDescOfU,
    VRightDescOfU,
    ULeftDescOfV,
    URightDescOfV,
    Incomparable,
    Equal,
}

impl Relation {
    /// The relation with the roles of `u` and `v` swapped.
    pub fn mirror(self) -> Relation {
        match self {
            Relation::VLeftDescOfU => Relation::ULeftDescOfV,
            Relation::VRightDescOfU => Relation::URightDescOfV,
            Relation::ULeftDescOfV => Relation::VLeftDescOfU,
            Relation::URightDescOfV => Relation::VRightDescOfU,
            other => other,
        }
    }
}

pub fn relation(u: &VertexPath, v: &VertexPath) -> Relation {
    let (ub, vb) = (u.bits(), v.bits());
    if ub == vb {
        Relation::Equal
    } else if vb.starts_with(ub) {
        if vb[ub.len()] {
            Relation::VRightDescOfU
        } else {
            Relation::VLeftDescOfU
        }
    } else if ub.starts_with(vb) {
        if ub[vb.len()] {
            Relation::URightDescOfV
        } else {
            Relation::ULeftDescOfV
        }
    } else {
        Relation::Incomparable
    }
}

/// Lowest common ancestor: the longest common prefix.
pub fn lca(u: &VertexPath, v: &VertexPath) -> VertexPath {
    let common = u.bits().iter().zip(v.bits()).take_while(|(a, b)| a == b).count();
    u.prefix(common)
}

/// The complete binary tree of a given depth, held implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HostTree {
    pub depth: u32,
}

impl HostTree {
    pub fn new(depth: u32) -> Self {
        Self { depth }
    }

    pub fn contains(&self, v: &VertexPath) -> bool {
        v.depth() <= self.depth
    }

    /// `2^(n+1) - 1`.
    pub fn vertex_count(&self) -> BigUint {
        (BigUint::one() << (self.depth as usize + 1)) - BigUint::one()
    }

    /// All vertices, by depth and then left to right.
    pub fn vertices(&self) -> impl Iterator<Item = VertexPath> {
        let n = self.depth as usize;
        assert!(n < 40, "refusing to list the vertices of a depth-{n} host");
        (0..(1usize << (n + 1)) - 1).map(VertexPath::from_heap_index)
    }
}

/// An order-preserving copy of the complete depth-`d` tree inside a host.
///
/// `vertices` is in heap order: index 0 is the subtree root and the children
/// of index `i` sit at `2i+1` (left) and `2i+2` (right).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubtreeEmbedding {
    pub depth: u32,
    #[serde(default)]
    pub level_aligned: bool,
    pub vertices: Vec<VertexPath>,
}

impl SubtreeEmbedding {
    pub fn new(depth: u32, vertices: Vec<VertexPath>, level_aligned: bool) -> Self {
        Self {
            depth,
            level_aligned,
            vertices,
        }
    }

    /// The identity embedding of a depth-`n` tree into itself.
    pub fn whole(n: u32) -> Self {
        Self::new(n, (0..heap_len(n)).map(VertexPath::from_heap_index).collect(), true)
    }

    pub fn root(&self) -> &VertexPath {
        &self.vertices[0]
    }

    /// Image of an abstract vertex of the complete depth-`d` tree.
    pub fn image(&self, q: &VertexPath) -> &VertexPath {
        &self.vertices[q.heap_index()]
    }

    /// True if every host level is shared by exactly the vertices of one subtree level.
    pub fn is_level_aligned(&self) -> bool {
        (0..=self.depth).all(|l| {
            let range = level_range(l);
            let d0 = self.vertices[range.start].depth();
            self.vertices[range].iter().all(|v| v.depth() == d0)
        })
    }
}

/// Number of vertices of a complete depth-`d` tree.
pub fn heap_len(d: u32) -> usize {
    (1usize << (d + 1)) - 1
}

/// Depth of a complete tree with `len` vertices.
pub fn heap_depth(len: usize) -> u32 {
    (len + 1).ilog2() - 1
}

/// Heap indices of level `l`.
pub fn level_range(l: u32) -> std::ops::Range<usize> {
    ((1usize << l) - 1)..((1usize << (l + 1)) - 1)
}

pub fn validate_embedding(e: &SubtreeEmbedding, host: &HostTree) -> bool {
    if e.depth >= 40 || e.vertices.len() != heap_len(e.depth) {
        return false;
    }
    if e.vertices.iter().any(|v| !host.contains(v)) {
        return false;
    }
    let distinct: HashSet<&VertexPath> = e.vertices.iter().collect();
    if distinct.len() != e.vertices.len() {
        return false;
    }
    let inner = heap_len(e.depth) / 2;
    for i in 0..inner {
        if relation(&e.vertices[i], &e.vertices[2 * i + 1]) != Relation::VLeftDescOfU
            || relation(&e.vertices[i], &e.vertices[2 * i + 2]) != Relation::VRightDescOfU
        {
            return false;
        }
    }
    !e.level_aligned || e.is_level_aligned()
}

/// Builds a depth-`d+1` heap from a root and two depth-`d` heaps.
pub fn join_heaps<T: Clone>(root: T, left: &[T], right: &[T]) -> Vec<T> {
    debug_assert_eq!(left.len(), right.len());
    let mut out = Vec::with_capacity(2 * left.len() + 1);
    out.push(root);
    let mut l = 0;
    while level_range(l).start < left.len() {
        let r = level_range(l);
        out.extend_from_slice(&left[r.clone()]);
        out.extend_from_slice(&right[r]);
        l += 1;
    }
    out
}

/// A complete tree placed inside an enclosing frame.
///
/// Finders recurse on subtrees of subtrees; a view maps abstract paths of its
/// own complete tree to paths of the enclosing frame.
#[derive(Clone, Debug)]
pub enum View {
    /// The full subtree of the frame hanging below `root`.
    Host { root: VertexPath, depth: u32 },
    /// An explicit embedding, stored in heap order.
    Heap { depth: u32, vertices: Arc<Vec<VertexPath>> },
}

impl View {
    pub fn host(depth: u32) -> Self {
        View::Host {
            root: VertexPath::root(),
            depth,
        }
    }

    pub fn from_heap(depth: u32, vertices: Vec<VertexPath>) -> Self {
        debug_assert_eq!(vertices.len(), heap_len(depth));
        View::Heap {
            depth,
            vertices: Arc::new(vertices),
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            View::Host { depth, .. } | View::Heap { depth, .. } => *depth,
        }
    }

    pub fn map(&self, q: &VertexPath) -> VertexPath {
        match self {
            View::Host { root, .. } => root.join(q),
            View::Heap { vertices, .. } => vertices[q.heap_index()].clone(),
        }
    }

    pub fn root(&self) -> VertexPath {
        self.map(&VertexPath::root())
    }

    /// The left (`false`) or right (`true`) child subtree.
    pub fn child(&self, right: bool) -> View {
        assert!(self.depth() > 0, "a leaf has no child subtree");
        match self {
            View::Host { root, depth } => View::Host {
                root: root.child(right),
                depth: depth - 1,
            },
            View::Heap { depth, vertices } => {
                let base = VertexPath::root().child(right);
                let sub = (0..heap_len(depth - 1))
                    .map(|i| vertices[base.join(&VertexPath::from_heap_index(i)).heap_index()].clone())
                    .collect();
                View::from_heap(depth - 1, sub)
            }
        }
    }

    /// Keeps only the top `depth` levels.
    pub fn truncate(&self, depth: u32) -> View {
        assert!(depth <= self.depth());
        match self {
            View::Host { root, .. } => View::Host {
                root: root.clone(),
                depth,
            },
            View::Heap { vertices, .. } => View::from_heap(depth, vertices[..heap_len(depth)].to_vec()),
        }
    }

    /// Every vertex, mapped into the frame, in heap order.
    pub fn heap(&self) -> Vec<VertexPath> {
        match self {
            View::Host { root, depth } => (0..heap_len(*depth))
                .map(|i| root.join(&VertexPath::from_heap_index(i)))
                .collect(),
            View::Heap { vertices, .. } => vertices.as_ref().clone(),
        }
    }

    /// Maps every vertex of an embedding given in this view's coordinates.
    pub fn map_all(&self, abstract_heap: &[VertexPath]) -> Vec<VertexPath> {
        abstract_heap.iter().map(|q| self.map(q)).collect()
    }
}

type Prune<'a> = Box<dyn FnMut(&[VertexPath]) -> bool + Send + 'a>;

/// Depth-first enumeration of subtree embeddings in lexicographic order of
/// their heap-order vertex sequence.
///
/// An optional pruning hook sees every partial sequence right after a vertex
/// is appended and can reject it; an optional limit caps the number of
/// search nodes.
pub struct Embeddings<'a> {
    n: u32,
    d: u32,
    level_aligned: bool,
    size: usize,
    current: Vec<VertexPath>,
    cands: Vec<Vec<VertexPath>>,
    cursor: Vec<usize>,
    prune: Option<Prune<'a>>,
    limit: Option<u64>,
    visited: u64,
    exceeded: bool,
    done: bool,
}

impl<'a> Embeddings<'a> {
    pub fn new(n: u32, d: u32, level_aligned: bool) -> Self {
        let mut e = Self {
            n,
            d,
            level_aligned,
            size: if d <= n { heap_len(d) } else { 0 },
            current: Vec::new(),
            cands: Vec::new(),
            cursor: Vec::new(),
            prune: None,
            limit: None,
            visited: 0,
            exceeded: false,
            done: d > n,
        };
        if !e.done {
            let roots = e.candidates(0);
            e.cands.push(roots);
            e.cursor.push(0);
        }
        e
    }

    pub fn with_prune(mut self, f: impl FnMut(&[VertexPath]) -> bool + Send + 'a) -> Self {
        self.prune = Some(Box::new(f));
        self
    }

    pub fn with_limit(mut self, limit: u64) -> Self {
        self.limit = Some(limit);
        self
    }

    /// Restricts the subtree root to the given candidates.
    pub fn with_roots(mut self, roots: Vec<VertexPath>) -> Self {
        if !self.done {
            self.cands[0] = roots;
        }
        self
    }

    /// Root candidates in enumeration order.
    pub fn root_candidates(n: u32, d: u32) -> Vec<VertexPath> {
        if d > n {
            return Vec::new();
        }
        let mut out = Vec::new();
        collect_range(VertexPath::root(), 0, n - d, &mut out);
        out
    }

    pub fn visited(&self) -> u64 {
        self.visited
    }

    pub fn exceeded(&self) -> bool {
        self.exceeded
    }

    fn candidates(&self, slot: usize) -> Vec<VertexPath> {
        let mut out = Vec::new();
        if slot == 0 {
            collect_range(VertexPath::root(), 0, self.n - self.d, &mut out);
            return out;
        }
        let parent = &self.current[(slot - 1) / 2];
        let right = slot % 2 == 0;
        let level = (slot + 1).ilog2();
        let hi = self.n - (self.d - level);
        let first = (1usize << level) - 1;
        let lo = if self.level_aligned && slot != first {
            let fixed = self.current[first].depth();
            if fixed > hi {
                return out;
            }
            return {
                collect_range(parent.child(right), fixed, fixed, &mut out);
                out
            };
        } else {
            parent.depth() + 1
        };
        collect_range(parent.child(right), lo, hi, &mut out);
        out
    }
}

/// Pre-order listing of the vertices below (and including) `base` with depth in `[lo, hi]`.
fn collect_range(base: VertexPath, lo: u32, hi: u32, out: &mut Vec<VertexPath>) {
    if base.depth() > hi {
        return;
    }
    if base.depth() >= lo {
        out.push(base.clone());
    }
    if base.depth() < hi {
        collect_range(base.child(false), lo, hi, out);
        collect_range(base.child(true), lo, hi, out);
    }
}

impl Iterator for Embeddings<'_> {
    type Item = Vec<VertexPath>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            let slot = self.current.len();
            if self.cursor[slot] < self.cands[slot].len() {
                if self.limit.is_some_and(|l| self.visited >= l) {
                    self.exceeded = true;
                    self.done = true;
                    return None;
                }
                let v = self.cands[slot][self.cursor[slot]].clone();
                self.cursor[slot] += 1;
                self.visited += 1;
                self.current.push(v);
                if let Some(p) = self.prune.as_mut() {
                    if !p(&self.current) {
                        self.current.pop();
                        continue;
                    }
                }
                if self.current.len() == self.size {
                    let out = self.current.clone();
                    self.current.pop();
                    return Some(out);
                }
                let next = self.candidates(self.current.len());
                self.cands.push(next);
                self.cursor.push(0);
            } else {
                self.cands.pop();
                self.cursor.pop();
                if self.cands.is_empty() {
                    self.done = true;
                    return None;
                }
                self.current.pop();
            }
        }
    }
}

/// Every embedding of depth `d` into `host`, each exactly once, in
/// lexicographic order of the vertex sequence. Empty when `d > host.depth`.
pub fn enumerate_subtrees(host: HostTree, d: u32, level_aligned: bool) -> impl Iterator<Item = SubtreeEmbedding> {
    Embeddings::new(host.depth, d, level_aligned).map(move |vertices| SubtreeEmbedding::new(d, vertices, level_aligned))
}

/// Restricts [`enumerate_subsets`] to one type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubsetFilter {
    Type(SubsetType),
    Chain(ChainType),
}

impl SubsetFilter {
    pub fn accepts(&self, subset: &[VertexPath]) -> bool {
        match self {
            SubsetFilter::Type(t) => subset_type(subset).map(|s| &s == t).unwrap_or(false),
            SubsetFilter::Chain(t) => chain_type(subset).map(|s| &s == t).unwrap_or(false),
        }
    }
}

/// Every `m`-subset of the host, each sorted by depth then bits.
pub fn enumerate_subsets(
    host: HostTree,
    m: usize,
    filter: Option<SubsetFilter>,
) -> impl Iterator<Item = Vec<VertexPath>> {
    host.vertices()
        .collect::<Vec<_>>()
        .into_iter()
        .combinations(m)
        .filter(move |s| filter.as_ref().map_or(true, |f| f.accepts(s)))
}
