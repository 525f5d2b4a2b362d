//! Constructive Ramsey finders, and the exhaustive oracle that certifies them.
//!
//! Every finder is anytime: it accepts any host depth and returns the deepest
//! subtree its construction yields. Recursions run on [`View`]s, so all color
//! lookups happen on host vertices.
//!
//! The pair finders and the chain finder share one shape: build a subtree
//! `T*` whose vertices carry meta-colors that summarize the coloring below
//! them, then pigeonhole `T*`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use itertools::Itertools;
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coloring::{Coloring, Scope};
use crate::error::{Error, Result};
use crate::pigeonhole::{level_aligned_view, php_find_uniform, php_view, uniform_budgets, MonoTree};
use crate::tree::{
    heap_depth, heap_len, join_heaps, sort_key, validate_embedding, Embeddings, HostTree, SubtreeEmbedding, VertexPath,
    View,
};
use crate::types::{chain_types, enumerate_types, subset_type, SubsetType};

/// Default cap on oracle search nodes; override with `RAMSEY_ORACLE_LIMIT`.
pub const DEFAULT_ORACLE_LIMIT: u64 = 10_000_000;

/// Stand-in color for chains outside a single-type scope.
const OUT_OF_SCOPE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// The color shared by every in-scope subset; `None` when there are none.
    Monochromatic(Option<u32>),
    /// Color of every subset type present, keyed by canonical type.
    TypeMonochromatic(BTreeMap<String, u32>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinderResult {
    pub embedding: SubtreeEmbedding,
    pub achieved_depth: u32,
    pub color_witness: Witness,
    /// Color counts the chain recursion works with, one per level.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub declared_colors: Vec<String>,
}

impl FinderResult {
    fn new(embedding: SubtreeEmbedding, color_witness: Witness) -> Self {
        Self {
            achieved_depth: embedding.depth,
            embedding,
            color_witness,
            declared_colors: Vec::new(),
        }
    }
}

/// Subtrees of the two hosts of a cross coloring on which every cross pair has one color.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteResult {
    pub left: SubtreeEmbedding,
    pub right: SubtreeEmbedding,
    pub color: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subset: Vec<VertexPath>,
    pub expected: Option<u32>,
    pub found: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Monochromatic,
    TypeMonochromatic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Constructive,
    Oracle,
}

type PairColor<'a> = dyn Fn(&VertexPath, &VertexPath) -> Result<u32> + Sync + 'a;
type SetColor<'a> = dyn Fn(&[VertexPath]) -> Result<u32> + 'a;
/// `(min depth, total depth)` of a bipartite pair.
type Score = (u32, u32);
type ClassKey = (Vec<VertexPath>, Option<u32>);
type BipartiteFound = (Vec<VertexPath>, u32, Vec<VertexPath>, u32);

/// Pigeonhole on the classes that actually occur in the view, each with budget `depth / classes`.
/// The tree's `color` is a class index into the returned key list.
fn pigeonhole_present<K, F>(view: &View, mut key: F) -> Result<(MonoTree, Vec<K>)>
where
    K: Hash + Eq + Clone,
    F: FnMut(&VertexPath) -> Result<K>,
{
    let mut ids: HashMap<K, u32> = HashMap::new();
    let mut keys: Vec<K> = Vec::new();
    let heap = view.heap();
    let mut class = Vec::with_capacity(heap.len());
    for v in &heap {
        let k = key(v)?;
        let id = match ids.get(&k) {
            Some(&id) => id,
            None => {
                let id = keys.len() as u32;
                ids.insert(k.clone(), id);
                keys.push(k);
                id
            }
        };
        class.push(id);
    }
    let d = view.depth();
    let budgets = uniform_budgets(d / keys.len() as u32, keys.len(), d)?;
    let tree = php_view(&View::host(d), &budgets, |q| Ok(class[q.heap_index()]))?;
    let tree = MonoTree {
        heap: tree.heap.iter().map(|q| heap[q.heap_index()].clone()).collect(),
        ..tree
    };
    Ok((tree, keys))
}

/// A complete subtree with one meta-color per vertex, both in heap order.
struct Star {
    heap: Vec<VertexPath>,
    meta: Vec<u32>,
}

impl Star {
    fn leaf(x: VertexPath) -> Self {
        Star {
            heap: vec![x],
            meta: vec![0],
        }
    }

    fn depth(&self) -> u32 {
        heap_depth(self.heap.len())
    }

    /// Joins two children under `x`, cutting the deeper one down.
    fn join(x: VertexPath, color: u32, left: Star, right: Star) -> Star {
        let n = heap_len(left.depth().min(right.depth()));
        Star {
            heap: join_heaps(x, &left.heap[..n], &right.heap[..n]),
            meta: join_heaps(color, &left.meta[..n], &right.meta[..n]),
        }
    }

    /// Pigeonholes the meta-colors; returns the host embedding and its meta-color.
    fn finish(self) -> Result<(SubtreeEmbedding, u32)> {
        let d = self.depth();
        let meta = &self.meta;
        let (tree, keys) = pigeonhole_present(&View::host(d), |q| Ok(meta[q.heap_index()]))?;
        let heap = tree.heap.iter().map(|q| self.heap[q.heap_index()].clone()).collect();
        Ok((
            SubtreeEmbedding::new(tree.depth, heap, false),
            keys[tree.color as usize],
        ))
    }
}

/// Pair lookups for the pair finders, which only ever ask about in-scope pairs.
fn pair_color(c: &Coloring) -> impl Fn(&VertexPath, &VertexPath) -> Result<u32> + Sync + '_ {
    move |u, v| c.color_unchecked(&[u.clone(), v.clone()])
}

fn single_type(c: &Coloring) -> Option<SubsetType> {
    match &c.scope {
        Scope::Type(t) => Some(t.clone()),
        Scope::Types { types } if types.len() == 1 => Some(types[0].clone()),
        Scope::ChainType { chain } => Some(chain.subset_type()),
        _ => None,
    }
}

/// Types of `c.arity`-subsets that `c` colors.
pub fn scope_types(c: &Coloring) -> Vec<SubsetType> {
    match &c.scope {
        Scope::Type(t) => vec![t.clone()],
        Scope::Types { types } => types.clone(),
        Scope::ChainType { chain } => vec![chain.subset_type()],
        Scope::Chains => chain_types(c.arity).iter().map(|t| t.subset_type()).collect(),
        Scope::Cross { .. } => Vec::new(),
        scope => enumerate_types(c.arity)
            .into_iter()
            .filter(|t| {
                let mut key = t.realize();
                sort_key(&mut key);
                scope.contains(&key)
            })
            .collect(),
    }
}

/// A representative subset of type `t` inside `e`, if `e` is deep enough.
fn representative(t: &SubsetType, e: &SubtreeEmbedding) -> Option<Vec<VertexPath>> {
    (t.height() <= e.depth).then(|| t.realize().iter().map(|q| e.image(q).clone()).collect())
}

/// The color of each in-scope type, read off one representative per type.
fn type_witness(c: &Coloring, e: &SubtreeEmbedding) -> Result<Witness> {
    let mut map = BTreeMap::new();
    for t in scope_types(c) {
        if let Some(rep) = representative(&t, e) {
            map.insert(t.canonical().to_string(), c.color_of(&rep)?);
        }
    }
    Ok(Witness::TypeMonochromatic(map))
}

fn mono_witness(c: &Coloring, e: &SubtreeEmbedding) -> Result<Witness> {
    for t in scope_types(c) {
        if let Some(rep) = representative(&t, e) {
            return Ok(Witness::Monochromatic(Some(c.color_of(&rep)?)));
        }
    }
    Ok(Witness::Monochromatic(None))
}

/// The witness `e` would need for `predicate`, read off one representative per type.
pub fn witness_for(c: &Coloring, e: &SubtreeEmbedding, predicate: Predicate) -> Result<Witness> {
    if !validate_embedding(e, &c.host()) {
        return Err(Error::Incompatible("not a subtree embedding of the host".into()));
    }
    match predicate {
        Predicate::Monochromatic => mono_witness(c, e),
        Predicate::TypeMonochromatic => type_witness(c, e),
    }
}

/// Monochromatic subtree for a coloring of left pairs or of right pairs.
///
/// Each vertex `r` pigeonholes its descendants on the colored side by the
/// color of `{r, v}` and keeps only the winning subtree there; `r` takes
/// that color. The other side is kept whole. A final pigeonhole on these
/// colors gives the answer.
pub fn find_comparable_pairs(c: &Coloring) -> Result<FinderResult> {
    let side = match single_type(c).as_ref().map(SubsetType::canonical) {
        Some("la") => false,
        Some("ra") => true,
        _ => {
            return Err(Error::Incompatible(
                "the comparable pair finder needs a coloring of left pairs or of right pairs".into(),
            ))
        }
    };
    let chi = pair_color(c);
    let star = comparable_star(&View::host(c.depth), side, &chi, c.depth)?;
    let (embedding, _) = star.finish()?;
    let w = mono_witness(c, &embedding)?;
    Ok(FinderResult::new(embedding, w))
}

fn comparable_star(v: &View, side: bool, chi: &PairColor, cap: u32) -> Result<Star> {
    let x = v.root();
    if cap == 0 || v.depth() == 0 {
        return Ok(Star::leaf(x));
    }
    let (tree, keys) = pigeonhole_present(&v.child(side), |y| chi(&x, y))?;
    let color = keys[tree.color as usize];
    let narrowed = View::from_heap(tree.depth, tree.heap);
    let first = comparable_star(&narrowed, side, chi, cap - 1)?;
    let second = comparable_star(&v.child(!side), side, chi, first.depth())?;
    let (left, right) = if side { (second, first) } else { (first, second) };
    Ok(Star::join(x, color, left, right))
}

/// Subtrees `L'` of the left view and `R'` of the right view with every cross pair one color.
///
/// For a target depth `t` every `r` picks the lexicographically least
/// level-aligned subtree `T_r` of depth `t` on which `l -> color(l, r)` is
/// constant. `R` is then pigeonholed by the pair `(T_r, c_r)`. All feasible
/// `t` are tried; the most balanced outcome wins.
fn bipartite_view(lv: &View, rv: &View, chi: &PairColor) -> Result<(MonoTree, MonoTree, u32)> {
    let rs = rv.heap();
    let index: HashMap<&VertexPath, usize> = rs.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let mut levels: Vec<Vec<MonoTree>> = Vec::new();
    'depths: for t in 0..=lv.depth() {
        let mut row = Vec::with_capacity(rs.len());
        for r in &rs {
            let color = |l: &VertexPath| chi(l, r);
            match level_aligned_view(lv, t, &color)? {
                Some(tree) => row.push(tree),
                None => break 'depths,
            }
        }
        levels.push(row);
    }
    let mut best: Option<((u32, u32), MonoTree, MonoTree)> = None;
    for (t, row) in levels.iter().enumerate().rev() {
        let (tree, keys) = pigeonhole_present(rv, |r| {
            let tr = &row[index[r]];
            Ok((tr.heap.clone(), tr.color))
        })?;
        let (heap, color) = keys[tree.color as usize].clone();
        let t = t as u32;
        let score = (t.min(tree.depth), t + tree.depth);
        if best.as_ref().map_or(true, |b| score > b.0) {
            let left = MonoTree { color, depth: t, heap };
            let right = MonoTree { color, ..tree };
            best = Some((score, left, right));
        }
    }
    let (_, left, right) = best.expect("depth 0 always succeeds");
    let color = left.color;
    Ok((left, right, color))
}

/// Bipartite search on the two hosts of a cross coloring.
pub fn find_bipartite(c: &Coloring) -> Result<BipartiteResult> {
    let Scope::Cross {
        left_depth,
        right_depth,
    } = c.scope
    else {
        return Err(Error::Incompatible(
            "the bipartite finder needs a cross coloring".into(),
        ));
    };
    let chi = pair_color(c);
    let (l, r, color) = bipartite_view(&View::host(left_depth), &View::host(right_depth), &chi)?;
    Ok(BipartiteResult {
        left: l.into_embedding(true),
        right: r.into_embedding(false),
        color,
    })
}

/// Monochromatic subtree for a coloring of incomparable pairs.
///
/// At each vertex the bipartite search splits its two child subtrees into
/// `L'` and `R'` with one cross color, which becomes the vertex's meta-color
/// (every incomparable pair with that LCA gets it); then recurse into both.
pub fn find_incomparable_pairs(c: &Coloring) -> Result<FinderResult> {
    if single_type(c).as_ref().map(SubsetType::canonical) != Some("maa") {
        return Err(Error::Incompatible(
            "the incomparable pair finder needs a coloring of incomparable pairs".into(),
        ));
    }
    let chi = pair_color(c);
    let star = incomparable_star(&View::host(c.depth), &chi, c.depth)?;
    let (embedding, _) = star.finish()?;
    let w = mono_witness(c, &embedding)?;
    Ok(FinderResult::new(embedding, w))
}

fn incomparable_star(v: &View, chi: &PairColor, cap: u32) -> Result<Star> {
    let x = v.root();
    if cap == 0 || v.depth() == 0 {
        return Ok(Star::leaf(x));
    }
    let (l, r, color) = bipartite_view(&v.child(false), &v.child(true), chi)?;
    let left = incomparable_star(&View::from_heap(l.depth, l.heap), chi, cap - 1)?;
    let right = incomparable_star(&View::from_heap(r.depth, r.heap), chi, left.depth())?;
    Ok(Star::join(x, color, left, right))
}

fn degenerate(c: &Coloring) -> bool {
    c.depth < 40 && c.arity > heap_len(c.depth)
}

fn empty_result() -> FinderResult {
    FinderResult::new(SubtreeEmbedding::whole(0), Witness::TypeMonochromatic(BTreeMap::new()))
}

/// Type-monochromatic subtree for a coloring of m-chains.
///
/// The top `m-2` levels are kept fixed. Below them, each vertex `u` splits
/// each child subtree into classes by the color vector of
/// `A + {u, x}` over all `(m-2)`-sets `A` of its ancestors and keeps a
/// monochromatic class subtree. On the resulting `T*`, an `(m-1)`-chain `C`
/// is colored by the pair of colors of `C` extended into either child, and
/// the search recurses with `m-1`.
pub fn find_chains(c: &Coloring) -> Result<FinderResult> {
    let chains_only = match &c.scope {
        Scope::Chains | Scope::ChainType { .. } => true,
        Scope::Type(t) => t.is_chain(),
        Scope::Types { types } => types.iter().all(SubsetType::is_chain),
        _ => false,
    };
    if !chains_only {
        return Err(Error::Incompatible(
            "the chain finder needs a coloring of chains".into(),
        ));
    }
    let m = c.arity;
    let declared = (0..m)
        .map(|j| num_traits::pow(BigUint::from(c.colors), 1usize << j).to_string())
        .collect();
    if degenerate(c) {
        return Ok(FinderResult {
            declared_colors: declared,
            ..empty_result()
        });
    }
    let embedding = if m == 1 {
        let k = c.colors as usize;
        php_find_uniform(c.host(), c, c.depth / k as u32, k)?.1
    } else {
        let chi = |chain: &[VertexPath]| match c.color_of(chain) {
            Err(Error::OutOfScope) => Ok(OUT_OF_SCOPE),
            other => other,
        };
        let heap = chains_rec(&View::host(c.depth), m, &chi)?;
        SubtreeEmbedding::new(heap_depth(heap.len()), heap, false)
    };
    let w = type_witness(c, &embedding)?;
    Ok(FinderResult {
        declared_colors: declared,
        ..FinderResult::new(embedding, w)
    })
}

fn chains_rec(v: &View, m: usize, chi: &SetColor) -> Result<Vec<VertexPath>> {
    if m == 1 {
        let (tree, _) = pigeonhole_present(v, |x| chi(std::slice::from_ref(x)))?;
        return Ok(tree.heap);
    }
    let star = chain_star(v, m, chi, &mut Vec::new(), m - 2, v.depth())?;
    let t = heap_depth(star.len());
    let sv = View::from_heap(t, star);
    let mut pairs: HashMap<(u32, u32), u32> = HashMap::new();
    let mut table: HashMap<Vec<VertexPath>, u32> = HashMap::new();
    for j in 0..heap_len(t) {
        let q = VertexPath::from_heap_index(j);
        let ancestors: Vec<VertexPath> = (0..q.depth() as usize).map(|len| sv.map(&q.prefix(len))).collect();
        let last = sv.map(&q);
        for a in ancestors.into_iter().combinations(m - 2) {
            let mut chain = a;
            chain.push(last.clone());
            let pair = if q.depth() == t {
                (0, 0)
            } else {
                let extend = |b: bool| {
                    let mut longer = chain.clone();
                    longer.push(sv.map(&q.child(b)));
                    chi(&longer)
                };
                (extend(false)?, extend(true)?)
            };
            let next = pairs.len() as u32;
            let id = *pairs.entry(pair).or_insert(next);
            table.insert(chain, id);
        }
    }
    let inner = |chain: &[VertexPath]| {
        table
            .get(chain)
            .copied()
            .ok_or_else(|| Error::domain("chain outside the derived subtree"))
    };
    chains_rec(&sv, m - 1, &inner)
}

fn chain_star(
    v: &View,
    m: usize,
    chi: &SetColor,
    ancestors: &mut Vec<VertexPath>,
    fixed: usize,
    cap: u32,
) -> Result<Vec<VertexPath>> {
    let x = v.root();
    if cap == 0 || v.depth() == 0 {
        return Ok(vec![x]);
    }
    let combos: Vec<Vec<VertexPath>> = ancestors.iter().cloned().combinations(m - 2).collect();
    let child = |b: bool| -> Result<View> {
        let sub = v.child(b);
        if fixed > 0 {
            return Ok(sub);
        }
        let (tree, _) = pigeonhole_present(&sub, |y| {
            combos
                .iter()
                .map(|a| {
                    let mut chain = a.clone();
                    chain.push(x.clone());
                    chain.push(y.clone());
                    chi(&chain)
                })
                .collect::<Result<Vec<u32>>>()
        })?;
        Ok(View::from_heap(tree.depth, tree.heap))
    };
    let below = fixed.saturating_sub(1);
    let lv = child(false)?;
    let rv = child(true)?;
    ancestors.push(x.clone());
    let result = (|| {
        let left = chain_star(&lv, m, chi, ancestors, below, cap - 1)?;
        let right = chain_star(&rv, m, chi, ancestors, below, heap_depth(left.len()))?;
        Ok((left, right))
    })();
    ancestors.pop();
    let (left, right) = result?;
    let n = heap_len(heap_depth(right.len()));
    Ok(join_heaps(x, &left[..n], &right))
}

/// Type-monochromatic subtree for a coloring of m-subsets.
pub fn find_msubsets(c: &Coloring, strategy: Strategy) -> Result<FinderResult> {
    if c.scope.is_cross() {
        return Err(Error::Incompatible("cross colorings go to the bipartite finder".into()));
    }
    if degenerate(c) {
        return Ok(empty_result());
    }
    match strategy {
        Strategy::Oracle => oracle_best(c, Predicate::TypeMonochromatic),
        Strategy::Constructive => {
            let chi = |s: &[VertexPath]| c.color_of(s);
            let mut view = View::host(c.depth);
            for t in scope_types(c) {
                let found = mono(&view, &t, &chi)?;
                view = View::from_heap(heap_depth(found.heap.len()), found.heap);
            }
            let embedding = SubtreeEmbedding::new(view.depth(), view.heap(), false);
            let w = type_witness(c, &embedding)?;
            Ok(FinderResult::new(embedding, w))
        }
    }
}

struct MonoSets {
    heap: Vec<VertexPath>,
    /// `None` when the subtree holds no set of the type.
    color: Option<u32>,
}

fn sorted(mut s: Vec<VertexPath>) -> Vec<VertexPath> {
    sort_key(&mut s);
    s
}

/// Subtree on which all sets of type `tau` share a color: first make the
/// color depend only on the LCA, then pigeonhole the LCA colors.
fn mono(v: &View, tau: &SubsetType, color: &SetColor) -> Result<MonoSets> {
    let d = v.depth();
    if tau.height() > d {
        return Ok(MonoSets {
            heap: v.heap(),
            color: None,
        });
    }
    if tau.size() == 1 {
        let (tree, keys) = pigeonhole_present(v, |x| color(std::slice::from_ref(x)))?;
        return Ok(MonoSets {
            heap: tree.heap,
            color: Some(keys[tree.color as usize]),
        });
    }
    let heap = local(v, tau, color, d)?;
    let ld = heap_depth(heap.len());
    if tau.height() > ld {
        return Ok(MonoSets { heap, color: None });
    }
    let lv = View::from_heap(ld, heap);
    let shape = tau.realize();
    let mut at: Vec<Option<u32>> = Vec::with_capacity(heap_len(ld));
    for j in 0..heap_len(ld) {
        let q = VertexPath::from_heap_index(j);
        at.push(if q.depth() + tau.height() <= ld {
            Some(color(&sorted(shape.iter().map(|p| lv.map(&q.join(p))).collect()))?)
        } else {
            None
        });
    }
    // vertices too low to be an LCA join the root's class
    let root = at[0].expect("the root fits the type");
    let (tree, keys) = pigeonhole_present(&View::host(ld), |q| Ok(at[q.heap_index()].unwrap_or(root)))?;
    let found = tree.depth;
    Ok(MonoSets {
        heap: lv.map_all(&tree.heap),
        color: (tau.height() <= found).then(|| keys[tree.color as usize]),
    })
}

/// Subtree in which, for every vertex `w`, all sets of type `tau` with LCA `w` share a color.
fn local(v: &View, tau: &SubsetType, color: &SetColor, cap: u32) -> Result<Vec<VertexPath>> {
    let x = v.root();
    if cap == 0 || v.depth() == 0 {
        return Ok(vec![x]);
    }
    let (root_in, t1, t2) = tau.split();
    let with_root = |mut s: Vec<VertexPath>| {
        if root_in {
            s.push(x.clone());
        }
        sorted(s)
    };
    let (lv, rv) = match (t1, t2) {
        (Some(t1), Some(t2)) => {
            let cross = |a1: &[VertexPath], a2: &[VertexPath]| color(&with_root([a1, a2].concat()));
            let (l, r) = bipartite_sets(&v.child(false), &v.child(true), &t1, &t2, &cross)?;
            (heap_view(l), heap_view(r))
        }
        (Some(t1), None) => {
            let side = |a: &[VertexPath]| color(&with_root(a.to_vec()));
            (heap_view(mono(&v.child(false), &t1, &side)?.heap), v.child(true))
        }
        (None, Some(t2)) => {
            let side = |a: &[VertexPath]| color(&with_root(a.to_vec()));
            (v.child(false), heap_view(mono(&v.child(true), &t2, &side)?.heap))
        }
        (None, None) => return Ok(v.truncate(cap.min(v.depth())).heap()),
    };
    let left = local(&lv, tau, color, cap - 1)?;
    let right = local(&rv, tau, color, heap_depth(left.len()))?;
    let n = heap_len(heap_depth(right.len()));
    Ok(join_heaps(x, &left[..n], &right))
}

fn heap_view(heap: Vec<VertexPath>) -> View {
    View::from_heap(heap_depth(heap.len()), heap)
}

type CrossColor<'a> = dyn Fn(&[VertexPath], &[VertexPath]) -> Result<u32> + 'a;

/// Subtrees of `v1` and `v2` on which every pair (`t1`-set, `t2`-set) shares a color.
///
/// Fix a top part `T2'` of `v2`. Each `t1`-set `A1` colors the `t2`-sets of
/// `T2'` by `cross(A1, .)`, which yields a monochromatic `T2''(A1)` and a
/// color; `A1` gets the pair as its meta-color and `v1` is searched for a
/// monochromatic subtree. Every depth of `T2'` is tried.
fn bipartite_sets(
    v1: &View,
    v2: &View,
    t1: &SubsetType,
    t2: &SubsetType,
    cross: &CrossColor,
) -> Result<(Vec<VertexPath>, Vec<VertexPath>)> {
    let mut best: Option<(Score, Vec<VertexPath>, Vec<VertexPath>)> = None;
    for s in (0..=v2.depth()).rev() {
        let top = v2.truncate(s);
        let classes: RefCell<Vec<Vec<VertexPath>>> = RefCell::new(Vec::new());
        let ids: RefCell<HashMap<ClassKey, u32>> = RefCell::new(HashMap::new());
        let memo: RefCell<HashMap<Vec<VertexPath>, u32>> = RefCell::new(HashMap::new());
        let meta = |a1: &[VertexPath]| -> Result<u32> {
            if let Some(&id) = memo.borrow().get(a1) {
                return Ok(id);
            }
            let inner = |a2: &[VertexPath]| cross(a1, a2);
            let found = mono(&top, t2, &inner)?;
            let key = (found.heap, found.color);
            let mut ids = ids.borrow_mut();
            let id = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    let mut classes = classes.borrow_mut();
                    let id = classes.len() as u32;
                    classes.push(key.0.clone());
                    ids.insert(key, id);
                    id
                }
            };
            memo.borrow_mut().insert(a1.to_vec(), id);
            Ok(id)
        };
        let first = mono(v1, t1, &meta)?;
        let second = match first.color {
            Some(id) => classes.borrow()[id as usize].clone(),
            None => top.heap(),
        };
        let (d1, d2) = (heap_depth(first.heap.len()), heap_depth(second.len()));
        let score = (d1.min(d2), d1 + d2);
        if best.as_ref().map_or(true, |b| score > b.0) {
            best = Some((score, first.heap, second));
        }
    }
    let (_, l, r) = best.expect("at least one depth is tried");
    Ok((l, r))
}

/// Search-node cap from `RAMSEY_ORACLE_LIMIT`, or the default.
pub fn oracle_limit() -> u64 {
    std::env::var("RAMSEY_ORACLE_LIMIT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_ORACLE_LIMIT)
}

pub fn oracle_best(c: &Coloring, predicate: Predicate) -> Result<FinderResult> {
    oracle_best_with_limit(c, predicate, oracle_limit())
}

/// For each position of a depth-`d` heap, the in-scope subsets it closes
/// with earlier positions, and the class each must agree with.
struct Constraints {
    at: Vec<Vec<(Vec<usize>, usize)>>,
    classes: usize,
}

fn constraints(c: &Coloring, d: u32, predicate: Predicate, limit: u64, visits: &AtomicU64) -> Result<Constraints> {
    let n = heap_len(d);
    let paths: Vec<VertexPath> = (0..n).map(VertexPath::from_heap_index).collect();
    let mut ids: HashMap<SubsetType, usize> = HashMap::new();
    let mut at = Vec::with_capacity(n);
    for p in 0..n {
        let mut here = Vec::new();
        for others in (0..p).combinations(c.arity - 1) {
            if visits.fetch_add(1, Ordering::Relaxed) >= limit {
                return Err(Error::OracleInfeasible { limit });
            }
            let mut key: Vec<VertexPath> = others.iter().map(|&i| paths[i].clone()).collect();
            key.push(paths[p].clone());
            sort_key(&mut key);
            if !c.scope.contains(&key) {
                continue;
            }
            let class = match predicate {
                Predicate::Monochromatic => 0,
                Predicate::TypeMonochromatic => {
                    let t = subset_type(&key)?;
                    let next = ids.len();
                    *ids.entry(t).or_insert(next)
                }
            };
            here.push((others, class));
        }
        at.push(here);
    }
    let classes = ids.len().max(1);
    Ok(Constraints { at, classes })
}

/// Undoable class-to-color assignment along the current search path.
struct PathState {
    color: Vec<Option<u32>>,
    log: Vec<usize>,
    marks: Vec<usize>,
}

impl PathState {
    fn rewind(&mut self, len: usize) {
        while self.marks.len() > len {
            let mark = self.marks.pop().expect("nonempty");
            for class in self.log.drain(mark..) {
                self.color[class] = None;
            }
        }
    }
}

/// Exact deepest (mono- or type-mono-chromatic) embedding, lexicographically least among the deepest.
pub fn oracle_best_with_limit(c: &Coloring, predicate: Predicate, limit: u64) -> Result<FinderResult> {
    if c.scope.is_cross() {
        return Err(Error::Incompatible("cross colorings go to the bipartite oracle".into()));
    }
    let n = c.depth;
    let visits = AtomicU64::new(0);
    // Truncating a good subtree keeps it good, so depths are tried upward
    // and the search stops at the first depth without one.
    let mut best = None;
    for d in 0..=n {
        let table = constraints(c, d, predicate, limit, &visits)?;
        let failed: Mutex<Option<Error>> = Mutex::new(None);
        let exceeded = AtomicBool::new(false);
        let roots = Embeddings::root_candidates(n, d);
        let found = roots.par_iter().find_map_first(|root| {
            let mut state = PathState {
                color: vec![None; table.classes],
                log: Vec::new(),
                marks: Vec::new(),
            };
            let (table, failed, exceeded, visits) = (&table, &failed, &exceeded, &visits);
            let mut search = Embeddings::new(n, d, false).with_roots(vec![root.clone()]).with_prune(
                move |partial: &[VertexPath]| {
                    if visits.fetch_add(1, Ordering::Relaxed) >= limit {
                        exceeded.store(true, Ordering::Relaxed);
                        return false;
                    }
                    if exceeded.load(Ordering::Relaxed) {
                        return false;
                    }
                    let p = partial.len() - 1;
                    state.rewind(p);
                    state.marks.push(state.log.len());
                    for (others, class) in &table.at[p] {
                        let mut set: Vec<VertexPath> = others.iter().map(|&i| partial[i].clone()).collect();
                        set.push(partial[p].clone());
                        let col = match c.color_unchecked(&set) {
                            Ok(col) => col,
                            Err(e) => {
                                *failed.lock().expect("not poisoned") = Some(e);
                                exceeded.store(true, Ordering::Relaxed);
                                return false;
                            }
                        };
                        match state.color[*class] {
                            Some(have) if have != col => {
                                state.rewind(p);
                                return false;
                            }
                            Some(_) => {}
                            None => {
                                state.color[*class] = Some(col);
                                state.log.push(*class);
                            }
                        }
                    }
                    true
                },
            );
            search.next()
        });
        if let Some(e) = failed.into_inner().expect("not poisoned") {
            return Err(e);
        }
        if exceeded.load(Ordering::Relaxed) {
            return Err(Error::OracleInfeasible { limit });
        }
        match found {
            Some(heap) => best = Some(SubtreeEmbedding::new(d, heap, false)),
            None => break,
        }
    }
    let embedding = best.expect("a single vertex always qualifies");
    let w = match predicate {
        Predicate::Monochromatic => mono_witness(c, &embedding)?,
        Predicate::TypeMonochromatic => type_witness(c, &embedding)?,
    };
    Ok(FinderResult::new(embedding, w))
}

/// Deepest complete subtree of a depth-`n` host using only allowed vertices.
fn deepest_within(n: u32, allowed: &dyn Fn(&VertexPath) -> bool) -> Option<(u32, Vec<VertexPath>)> {
    // best[v] = deepest subtree rooted at v; top[v] = best root in v's subtree
    let mut best: HashMap<VertexPath, i64> = HashMap::new();
    let mut top: HashMap<VertexPath, (i64, VertexPath)> = HashMap::new();
    let mut order: Vec<VertexPath> = HostTree::new(n).vertices().collect();
    order.reverse();
    for v in &order {
        let below = |b: bool| top.get(&v.child(b)).map_or(-1, |t| t.0);
        let f = if !allowed(v) {
            -1
        } else if v.depth() == n {
            0
        } else {
            1 + below(false).min(below(true))
        };
        best.insert(v.clone(), f);
        let mut t = (f, v.clone());
        for b in [false, true] {
            if let Some(c) = top.get(&v.child(b)) {
                if c.0 > t.0 {
                    t = c.clone();
                }
            }
        }
        top.insert(v.clone(), t);
    }
    let (d, root) = top.get(&VertexPath::root())?.clone();
    if d < 0 {
        return None;
    }
    fn build(v: &VertexPath, d: i64, top: &HashMap<VertexPath, (i64, VertexPath)>) -> Vec<VertexPath> {
        if d == 0 {
            return vec![v.clone()];
        }
        let l = build(&top[&v.child(false)].1, d - 1, top);
        let r = build(&top[&v.child(true)].1, d - 1, top);
        let n = heap_len(d as u32 - 1);
        join_heaps(v.clone(), &l[..n], &r[..n])
    }
    Some((d as u32, build(&root, d, &top)))
}

/// Exhaustive bipartite search: best `(min depth, total depth)` over all left subtrees and colors.
pub fn oracle_bipartite(c: &Coloring) -> Result<BipartiteResult> {
    oracle_bipartite_with_limit(c, oracle_limit())
}

pub fn oracle_bipartite_with_limit(c: &Coloring, limit: u64) -> Result<BipartiteResult> {
    let Scope::Cross {
        left_depth,
        right_depth,
    } = c.scope
    else {
        return Err(Error::Incompatible(
            "the bipartite oracle needs a cross coloring".into(),
        ));
    };
    // Subtrees of the shallower host are enumerated; the other side is solved exactly per color.
    let flip = right_depth < left_depth;
    let (small, big) = if flip {
        (right_depth, left_depth)
    } else {
        (left_depth, right_depth)
    };
    let others: Vec<VertexPath> = HostTree::new(big).vertices().collect();
    let words = others.len().div_ceil(64);
    // agree[color][heap index of s]: vertices o of the other host with c(s, o) = color
    let mut agree = vec![vec![vec![0u64; words]; heap_len(small)]; c.colors as usize];
    for s in HostTree::new(small).vertices() {
        for o in &others {
            let pair = if flip {
                [o.clone(), s.clone()]
            } else {
                [s.clone(), o.clone()]
            };
            let j = o.heap_index();
            agree[c.color_of(&pair)? as usize][s.heap_index()][j / 64] |= 1 << (j % 64);
        }
    }
    let common = |set: &[VertexPath], color: usize| -> Vec<u64> {
        let mut m = vec![u64::MAX; words];
        for v in set {
            for (w, a) in m.iter_mut().zip(&agree[color][v.heap_index()]) {
                *w &= a;
            }
        }
        m
    };
    let mut visited = 0u64;
    // (score, (subtree of the shallower host, its depth, subtree of the other, its depth))
    let mut best: Option<(Score, BipartiteFound)> = None;
    for a in (0..=small).rev() {
        // smallest depth on the other side that would strictly improve on the best so far
        let Some(need) = (0..=big).find(|&b| best.as_ref().map_or(true, |x| (a.min(b), a + b) > x.0)) else {
            continue;
        };
        let mut subtrees = Embeddings::new(small, a, false)
            .with_limit(limit.saturating_sub(visited))
            .with_prune(|partial: &[VertexPath]| {
                (0..c.colors as usize).any(|col| mask_depth(big, &common(partial, col)) >= need as i64)
            });
        for sub in subtrees.by_ref() {
            for color in 0..c.colors {
                let ok = common(&sub, color as usize);
                let allowed = |v: &VertexPath| {
                    let j = v.heap_index();
                    ok[j / 64] >> (j % 64) & 1 == 1
                };
                let Some((b, heap)) = deepest_within(big, &allowed) else {
                    continue;
                };
                let score = (a.min(b), a + b);
                if best.as_ref().map_or(true, |x| score > x.0) {
                    best = Some((score, (sub.clone(), a, heap, b)));
                }
            }
        }
        if subtrees.exceeded() {
            return Err(Error::OracleInfeasible { limit });
        }
        visited += subtrees.visited();
    }
    let (_, (sub, a, heap, b)) = best.expect("single vertices always qualify");
    let color = c.color_of(&if flip {
        [heap[0].clone(), sub[0].clone()]
    } else {
        [sub[0].clone(), heap[0].clone()]
    })?;
    let (sub, heap) = (
        SubtreeEmbedding::new(a, sub, false),
        SubtreeEmbedding::new(b, heap, false),
    );
    let (left, right) = if flip { (heap, sub) } else { (sub, heap) };
    Ok(BipartiteResult { left, right, color })
}

/// Depth of the deepest complete subtree of a depth-`n` host inside the heap-indexed mask, or -1.
fn mask_depth(n: u32, mask: &[u64]) -> i64 {
    let len = heap_len(n);
    // top[j]: deepest subtree rooted anywhere below (and including) j
    let mut top = vec![-1i64; len];
    for j in (0..len).rev() {
        let (l, r) = (2 * j + 1, 2 * j + 2);
        let (tl, tr) = if r < len { (top[l], top[r]) } else { (-1, -1) };
        let here = if mask[j / 64] >> (j % 64) & 1 == 1 {
            1 + tl.min(tr).max(-1)
        } else {
            -1
        };
        top[j] = here.max(tl).max(tr);
    }
    top[0]
}

/// Scans every in-scope subset of the embedding against the witness.
pub fn verify(c: &Coloring, e: &SubtreeEmbedding, w: &Witness) -> Result<Option<Violation>> {
    if !validate_embedding(e, &c.host()) {
        return Err(Error::Incompatible("not a subtree embedding of the host".into()));
    }
    for subset in e.vertices.iter().cloned().combinations(c.arity) {
        let found = match c.color_of(&subset) {
            Ok(col) => col,
            Err(Error::OutOfScope) => continue,
            Err(err) => return Err(err),
        };
        let expected = match w {
            Witness::Monochromatic(col) => *col,
            Witness::TypeMonochromatic(map) => map.get(subset_type(&subset)?.canonical()).copied(),
        };
        if expected != Some(found) {
            return Ok(Some(Violation {
                subset: sorted(subset),
                expected,
                found,
            }));
        }
    }
    Ok(None)
}

/// Checks every cross pair between the two subtrees.
pub fn verify_bipartite(c: &Coloring, r: &BipartiteResult) -> Result<Option<Violation>> {
    let Scope::Cross {
        left_depth,
        right_depth,
    } = c.scope
    else {
        return Err(Error::Incompatible("needs a cross coloring".into()));
    };
    if !validate_embedding(&r.left, &HostTree::new(left_depth))
        || !validate_embedding(&r.right, &HostTree::new(right_depth))
    {
        return Err(Error::Incompatible("not a subtree embedding of the host".into()));
    }
    for l in &r.left.vertices {
        for v in &r.right.vertices {
            let pair = vec![l.clone(), v.clone()];
            let found = c.color_of(&pair)?;
            if found != r.color {
                return Ok(Some(Violation {
                    subset: pair,
                    expected: Some(r.color),
                    found,
                }));
            }
        }
    }
    Ok(None)
}
