//! Comparison-based learners on binary decision trees and the interior-point reduction.
//!
//! Every internal vertex `x` is an example whose two outgoing edges carry the
//! labels 0 (left) and 1 (right). A hypothesis labels vertices; a learner maps
//! a realizable sample to a distribution over hypotheses, and `A_S(x)` is the
//! probability that a sampled hypothesis labels `x` with 1.
//!
//! Inside the reduction, branch positions are 1-based: the point of depth `j`
//! on a branch is the vertex reached after `j - 1` turns.

use std::cell::Cell;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coloring::{hash_paths, Coloring, Scope};
use crate::error::{Error, Result};
use crate::tree::{HostTree, SubtreeEmbedding, VertexPath};

/// Seeded draws used to estimate `A_S(x)` for randomized learners.
pub const ESTIMATION_DRAWS: u64 = 10_000;

/// Agreement fraction a window needs to count as almost correct.
pub const DEFAULT_THRESHOLD: f64 = 0.9;

fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn bits_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Schema(format!("not a bit string: {s:?}"))),
        })
        .collect()
}

mod bitstring {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::bits_to_string(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        super::bits_from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Points `x_1 < … < x_m` on one branch with labels `y_i`; `y_i` is the turn
/// from `x_i` toward `x_{i+1}`, and `y_m` is free.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizableSample {
    points: Vec<VertexPath>,
    #[serde(with = "bitstring")]
    labels: Vec<bool>,
}

impl RealizableSample {
    pub fn new(points: Vec<VertexPath>, labels: Vec<bool>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Unrealizable);
        }
        for i in 1..points.len() {
            let (a, b) = (&points[i - 1], &points[i]);
            if !a.is_ancestor_of(b) || b.bits()[a.depth() as usize] != labels[i - 1] {
                return Err(Error::Unrealizable);
            }
        }
        Ok(Self { points, labels })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// The sample carried by an `(m+1)`-chain: its first `m` points, each
    /// labeled by the turn toward the next one.
    pub fn from_chain(chain: &[VertexPath]) -> Result<Self> {
        if chain.is_empty() {
            return Err(Error::EmptySubset);
        }
        let labels = chain
            .windows(2)
            .map(|w| {
                if w[0].is_ancestor_of(&w[1]) {
                    Ok(w[1].bits()[w[0].depth() as usize])
                } else {
                    Err(Error::NotAChain)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points: chain[..chain.len() - 1].to_vec(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[VertexPath] {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// True if `x` is a new point on some branch realizing the sample.
    pub fn is_compatible(&self, x: &VertexPath) -> bool {
        if self.points.iter().any(|p| p == x || !p.comparable(x)) {
            return false;
        }
        match (self.points.last(), self.labels.last()) {
            (Some(last), Some(&y)) if last.is_ancestor_of(x) => x.bits()[last.depth() as usize] == y,
            _ => true,
        }
    }

    fn check(&self, x: &VertexPath) -> Result<()> {
        if self.is_compatible(x) {
            Ok(())
        } else {
            Err(Error::Incompatible(x.to_string()))
        }
    }

    /// Number of sample points strictly above `x`.
    pub fn loc(&self, x: &VertexPath) -> Result<usize> {
        self.check(x)?;
        Ok(self.points.iter().filter(|p| p.is_ancestor_of(x)).count())
    }

    /// `S` with `x` inserted. Below the last point the new label is 0.
    pub fn extend(&self, x: &VertexPath) -> Result<Self> {
        let i = self.loc(x)?;
        let y = match self.points.get(i) {
            Some(next) => next.bits()[x.depth() as usize],
            None => false,
        };
        let mut out = self.clone();
        out.points.insert(i, x.clone());
        out.labels.insert(i, y);
        Ok(out)
    }

    /// `S` without its `i`-th point (0-based).
    pub fn without(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.points.remove(i);
        out.labels.remove(i);
        out
    }

    /// Labels of `S^{+x}` and the location of `x`: the cell of `(S, x)`.
    pub fn cell(&self, x: &VertexPath) -> Result<(Vec<bool>, usize)> {
        let i = self.loc(x)?;
        Ok((self.extend(x)?.labels, i))
    }
}

/// A fixed labeling of vertices; `true` is the right-edge label.
pub trait Hypothesis {
    fn label(&self, x: &VertexPath) -> bool;

    /// Labels of the points of the branch with the given turns, top down.
    fn label_branch(&self, turns: &[bool]) -> Vec<bool> {
        let mut x = VertexPath::root();
        let mut out = Vec::with_capacity(turns.len());
        for &t in turns {
            out.push(self.label(&x));
            x = x.child(t);
        }
        out
    }
}

/// A randomized learner, deterministic once the seed is fixed.
pub trait Learner: Sync {
    fn name(&self) -> String;

    /// The hypothesis drawn from `A(S)` with the given seed.
    fn fit<'a>(&'a self, s: &RealizableSample, seed: u64) -> Result<Box<dyn Hypothesis + 'a>>;

    fn is_deterministic(&self) -> bool {
        false
    }

    /// `A_S(x)`. Randomized learners average [`ESTIMATION_DRAWS`] seeded draws.
    fn predict(&self, s: &RealizableSample, x: &VertexPath) -> Result<f64> {
        if self.is_deterministic() {
            return Ok(self.fit(s, 0)?.label(x) as u8 as f64);
        }
        let mut ones = 0u64;
        for seed in 0..ESTIMATION_DRAWS {
            ones += self.fit(s, seed)?.label(x) as u64;
        }
        Ok(ones as f64 / ESTIMATION_DRAWS as f64)
    }
}

/// Labels each vertex of one branch by the branch's turn there, everything else 0.
/// The branch follows `turns` and then goes left forever.
struct BranchHypothesis {
    turns: Vec<bool>,
}

impl BranchHypothesis {
    fn turn(&self, j: usize) -> bool {
        self.turns.get(j).copied().unwrap_or(false)
    }
}

impl Hypothesis for BranchHypothesis {
    fn label(&self, x: &VertexPath) -> bool {
        let on_branch = x.bits().iter().enumerate().all(|(j, &b)| b == self.turn(j));
        on_branch && self.turn(x.depth() as usize)
    }

    fn label_branch(&self, turns: &[bool]) -> Vec<bool> {
        let mut out = vec![false; turns.len()];
        for (j, &t) in turns.iter().enumerate() {
            out[j] = self.turn(j);
            if t != self.turn(j) {
                break;
            }
        }
        out
    }
}

/// Outputs the leftmost branch realizing the sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeftmostBranch;

impl Learner for LeftmostBranch {
    fn name(&self) -> String {
        "leftmost".into()
    }

    fn fit<'a>(&'a self, s: &RealizableSample, _seed: u64) -> Result<Box<dyn Hypothesis + 'a>> {
        let mut turns = Vec::new();
        if let (Some(last), Some(&y)) = (s.points.last(), s.labels.last()) {
            turns.extend_from_slice(last.bits());
            turns.push(y);
        }
        Ok(Box::new(BranchHypothesis { turns }))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Ignores the sample and labels a fixed branch correctly. For testing only.
#[derive(Clone, Debug)]
pub struct BranchCheat {
    pub turns: Vec<bool>,
}

impl Learner for BranchCheat {
    fn name(&self) -> String {
        "branch-cheat".into()
    }

    fn fit<'a>(&'a self, _s: &RealizableSample, _seed: u64) -> Result<Box<dyn Hypothesis + 'a>> {
        Ok(Box::new(BranchHypothesis {
            turns: self.turns.clone(),
        }))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

struct Constant(bool);

impl Hypothesis for Constant {
    fn label(&self, _x: &VertexPath) -> bool {
        self.0
    }
}

/// Always outputs the all-0 hypothesis.
#[derive(Clone, Copy, Debug, Default)]
pub struct AllZero;

impl Learner for AllZero {
    fn name(&self) -> String {
        "all-zero".into()
    }

    fn fit<'a>(&'a self, _s: &RealizableSample, _seed: u64) -> Result<Box<dyn Hypothesis + 'a>> {
        Ok(Box::new(Constant(false)))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

struct ParityHypothesis;

impl Hypothesis for ParityHypothesis {
    fn label(&self, x: &VertexPath) -> bool {
        x.bits().iter().filter(|&&b| b).count() % 2 == 1
    }
}

/// Reads the raw address of the query: labels `x` by the parity of its bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct Parity;

impl Learner for Parity {
    fn name(&self) -> String {
        "parity".into()
    }

    fn fit<'a>(&'a self, _s: &RealizableSample, _seed: u64) -> Result<Box<dyn Hypothesis + 'a>> {
        Ok(Box::new(ParityHypothesis))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Numbers `p[t][i]` for every label vector `t ∈ {0,1}^{m+1}` and location `i ∈ 0..=m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    m: usize,
    p: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    m: usize,
    p: BTreeMap<String, Vec<f64>>,
}

fn bits_index(t: &[bool]) -> usize {
    t.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn index_bits(m: usize, index: usize) -> Vec<bool> {
    (0..=m).rev().map(|j| (index >> j) & 1 == 1).collect()
}

impl ComparisonTable {
    pub fn constant(m: usize, value: f64) -> Result<Self> {
        Self::from_fn(m, |_, _| value)
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(&[bool], usize) -> f64) -> Result<Self> {
        if m >= 24 {
            return Err(Error::domain("comparison tables are limited to m < 24"));
        }
        let p: Vec<Vec<f64>> = (0..1usize << (m + 1))
            .map(|t| {
                let bits = index_bits(m, t);
                (0..=m).map(|i| f(&bits, i)).collect()
            })
            .collect();
        if p.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("table entries must lie in [0, 1]"));
        }
        Ok(Self { m, p })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, t: &[bool], i: usize) -> f64 {
        self.p[bits_index(t)][i]
    }

    /// All `(t, i, p)` entries, `t` in increasing binary order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<bool>, usize, f64)> + '_ {
        self.p
            .iter()
            .enumerate()
            .flat_map(move |(t, row)| row.iter().enumerate().map(move |(i, &v)| (index_bits(self.m, t), i, v)))
    }
}

impl Serialize for ComparisonTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = self
            .p
            .iter()
            .enumerate()
            .map(|(t, row)| (bits_to_string(&index_bits(self.m, t)), row.clone()))
            .collect();
        TableFile { m: self.m, p }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComparisonTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = TableFile::deserialize(d)?;
        let m = file.m;
        if file.p.len() != 1usize.checked_shl(m as u32 + 1).unwrap_or(0) {
            return Err(D::Error::custom(format!("a table for m = {m} needs 2^{} rows", m + 1)));
        }
        let mut rows = BTreeMap::new();
        for (key, row) in file.p {
            let bits = bits_from_str(&key).map_err(D::Error::custom)?;
            if bits.len() != m + 1 || row.len() != m + 1 {
                return Err(D::Error::custom(format!("row {key:?} has the wrong shape")));
            }
            rows.insert(bits_index(&bits), row);
        }
        ComparisonTable::from_fn(m, |t, i| rows[&bits_index(t)][i]).map_err(D::Error::custom)
    }
}

fn unit_coin(seed: u64, x: &VertexPath) -> f64 {
    (hash_paths(seed, std::slice::from_ref(x)) >> 11) as f64 / (1u64 << 53) as f64
}

/// Labels `x` with 1 with probability `p[t(S^{+x})][loc_S(x)]`; incompatible points get 0.
#[derive(Clone, Debug)]
pub struct TableLearner {
    pub table: ComparisonTable,
}

struct TableHypothesis<'a> {
    learner: &'a TableLearner,
    sample: RealizableSample,
    seed: u64,
}

impl Hypothesis for TableHypothesis<'_> {
    fn label(&self, x: &VertexPath) -> bool {
        match self.sample.cell(x) {
            Ok((t, i)) => unit_coin(self.seed, x) < self.learner.table.get(&t, i),
            Err(_) => false,
        }
    }
}

impl TableLearner {
    fn check_size(&self, s: &RealizableSample) -> Result<()> {
        if s.len() != self.table.m {
            return Err(Error::domain(format!(
                "table learner for samples of size {} got {}",
                self.table.m,
                s.len()
            )));
        }
        Ok(())
    }
}

impl Learner for TableLearner {
    fn name(&self) -> String {
        "table".into()
    }

    fn fit<'a>(&'a self, s: &RealizableSample, seed: u64) -> Result<Box<dyn Hypothesis + 'a>> {
        self.check_size(s)?;
        Ok(Box::new(TableHypothesis {
            learner: self,
            sample: s.clone(),
            seed,
        }))
    }

    fn predict(&self, s: &RealizableSample, x: &VertexPath) -> Result<f64> {
        self.check_size(s)?;
        Ok(match s.cell(x) {
            Ok((t, i)) => self.table.get(&t, i),
            Err(_) => 0.0,
        })
    }
}

/// Chains of `len` vertices of a depth-`depth` tree, top vertex first, in lex order.
fn chains(depth: u32, len: usize) -> Vec<Vec<VertexPath>> {
    fn grow(depth: u32, len: usize, cur: &mut Vec<VertexPath>, out: &mut Vec<Vec<VertexPath>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        let last = cur.last().expect("nonempty chain").clone();
        let mut stack = Vec::new();
        if last.depth() < depth {
            stack.extend([last.child(true), last.child(false)]);
        }
        while let Some(v) = stack.pop() {
            if v.depth() < depth {
                stack.extend([v.child(true), v.child(false)]);
            }
            cur.push(v);
            grow(depth, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if len > 0 {
        for v in HostTree::new(depth).vertices() {
            grow(depth, len, &mut vec![v], &mut out);
        }
        out.sort();
    }
    out
}

/// One observed prediction in a cell.
#[derive(Clone, Debug, Serialize)]
pub struct Observation {
    pub sample: RealizableSample,
    pub x: VertexPath,
    pub value: f64,
}

/// The cell with the widest spread of predictions.
#[derive(Clone, Debug, Serialize)]
pub struct CbCounterexample {
    #[serde(with = "bitstring")]
    pub t: Vec<bool>,
    pub i: usize,
    pub low: Observation,
    pub high: Observation,
}

#[derive(Clone, Debug, Serialize)]
pub struct CbReport {
    pub comparison_based: bool,
    pub gamma: f64,
    /// Largest distance from a prediction to its cell's table entry.
    pub max_deviation: f64,
    pub table: ComparisonTable,
    /// Cells `(t, i)` no sample and query reached; their entries are 0.
    pub unobserved: Vec<(String, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CbCounterexample>,
}

/// Scans every realizable size-`m` sample inside the embedded subtree and
/// every compatible query, all taken among the subtree's internal vertices.
pub fn is_comparison_based(a: &dyn Learner, emb: &SubtreeEmbedding, m: usize, gamma: f64) -> Result<CbReport> {
    if (emb.depth as usize) < m + 1 {
        return Err(Error::InsufficientDepth {
            needed: m as u64 + 1,
            available: emb.depth as u64,
        });
    }
    let internal = emb.depth - 1;
    let queries: Vec<VertexPath> = HostTree::new(internal).vertices().collect();
    let mut samples: Vec<RealizableSample> = Vec::new();
    if m == 0 {
        samples.push(RealizableSample::empty());
    }
    for chain in chains(internal, m) {
        let mut s = RealizableSample::from_chain(&chain)?;
        let last = chain.last().expect("nonempty chain").clone();
        s.points.push(last);
        for y in [false, true] {
            s.labels.push(y);
            samples.push(s.clone());
            s.labels.pop();
        }
    }
    let rows = 1usize << (m + 1);
    let mut lo: Vec<Vec<Option<Observation>>> = vec![vec![None; m + 1]; rows];
    let mut hi: Vec<Vec<Option<Observation>>> = vec![vec![None; m + 1]; rows];
    for abstract_s in &samples {
        let host_s = RealizableSample::new(
            abstract_s.points.iter().map(|q| emb.image(q).clone()).collect(),
            abstract_s.labels.clone(),
        )?;
        for q in queries.iter().filter(|q| abstract_s.is_compatible(q)) {
            let (t, i) = abstract_s.cell(q)?;
            let x = emb.image(q).clone();
            let value = a.predict(&host_s, &x)?;
            let row = bits_index(&t);
            let obs = || Observation {
                sample: host_s.clone(),
                x: x.clone(),
                value,
            };
            if lo[row][i].as_ref().map_or(true, |o| value < o.value) {
                lo[row][i] = Some(obs());
            }
            if hi[row][i].as_ref().map_or(true, |o| value > o.value) {
                hi[row][i] = Some(obs());
            }
        }
    }
    let mut unobserved = Vec::new();
    let mut widest: Option<(f64, usize, usize)> = None;
    let table = ComparisonTable::from_fn(m, |t, i| {
        let row = bits_index(t);
        match (&lo[row][i], &hi[row][i]) {
            (Some(l), Some(h)) => {
                let spread = h.value - l.value;
                if widest.map_or(true, |(w, _, _)| spread > w) {
                    widest = Some((spread, row, i));
                }
                (l.value + h.value) / 2.0
            }
            _ => {
                unobserved.push((bits_to_string(t), i));
                0.0
            }
        }
    })?;
    let max_deviation = widest.map_or(0.0, |(w, _, _)| w / 2.0);
    let comparison_based = max_deviation <= gamma;
    let counterexample = match widest {
        Some((_, row, i)) if !comparison_based => Some(CbCounterexample {
            t: index_bits(m, row),
            i,
            low: lo[row][i].clone().expect("observed"),
            high: hi[row][i].clone().expect("observed"),
        }),
        _ => None,
    };
    Ok(CbReport {
        comparison_based,
        gamma,
        max_deviation,
        table,
        unobserved,
        counterexample,
    })
}

/// Numerator `r` of the fraction `r/(100m)` closest to `v`, ties to the smaller.
pub fn round_to_grid(v: f64, m: usize) -> u32 {
    let scale = 100.0 * m.max(1) as f64;
    let r = (v * scale - 0.5).ceil();
    r.clamp(0.0, scale) as u32
}

/// Colors each `(m+2)`-chain by the rounded predictions `A_{S^{-i}}(x_i)`,
/// `i = 1..=m+1`, where `S` is the size-`(m+1)` sample the chain carries.
/// The tuple of numerators is encoded in base `100m+1`, first entry most significant.
pub fn build_chain_coloring(a: &dyn Learner, depth: u32, m: usize) -> Result<Coloring> {
    if m == 0 {
        return Err(Error::domain("samples must have at least one point"));
    }
    if (depth as usize) < m + 1 {
        return Err(Error::InsufficientDepth {
            needed: m as u64 + 1,
            available: depth as u64,
        });
    }
    let base = 100 * m as u32 + 1;
    let colors = base
        .checked_pow(m as u32 + 1)
        .ok_or_else(|| Error::domain(format!("(100m+1)^(m+1) colors do not fit in 32 bits for m = {m}")))?;
    let all = chains(depth, m + 2);
    let assignments = all
        .into_par_iter()
        .map(|chain| {
            let s = RealizableSample::from_chain(&chain)?;
            let mut color = 0u32;
            for i in 0..=m {
                let v = a.predict(&s.without(i), &s.points[i])?;
                color = color * base + round_to_grid(v, m);
            }
            Ok((chain, color))
        })
        .collect::<Result<Vec<_>>>()?;
    Coloring::extensional(depth, m + 2, colors, Scope::Chains, assignments)
}

/// Decodes a chain color back into its numerators.
pub fn decode_chain_color(color: u32, m: usize) -> Vec<u32> {
    let base = 100 * m as u32 + 1;
    let mut out = vec![0; m + 1];
    let mut c = color;
    for slot in out.iter_mut().rev() {
        *slot = c % base;
        c /= base;
    }
    out
}

/// Window length `⌊log2(n)^2⌋`.
pub fn window_len(n: u32) -> u32 {
    if n <= 1 {
        return 0;
    }
    let l = (n as f64).log2();
    (l * l + 1e-9).floor() as u32
}

/// Depths `d_1 < … < d_m` in `1..=n`, pairwise more than `⌊log2(n)^2⌋` apart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IppInstance {
    n: u32,
    points: Vec<u32>,
}

impl IppInstance {
    pub fn new(n: u32, mut points: Vec<u32>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("an instance needs at least one depth"));
        }
        if let Some(&d) = points.iter().find(|&&d| d == 0 || d > n) {
            return Err(Error::domain(format!("depth {d} is outside 1..={n}")));
        }
        points.sort_unstable();
        let gap = window_len(n);
        for w in points.windows(2) {
            if w[1] - w[0] <= gap {
                return Err(Error::InstanceGap {
                    left: w[0],
                    right: w[1],
                    gap,
                });
            }
        }
        Ok(Self { n, points })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn points(&self) -> &[u32] {
        &self.points
    }

    pub fn is_interior(&self, output: u32) -> bool {
        self.points[0] <= output && output <= *self.points.last().expect("nonempty")
    }
}

/// The `n` turns of a uniformly random branch.
pub fn sample_branch(n: u32, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

/// The vertex at 1-based depth `j` on a branch.
pub fn branch_point(turns: &[bool], j: u32) -> VertexPath {
    VertexPath::from_bits(turns[..j as usize - 1].to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Sampling,
    Learning,
    Scanning,
}

/// Gate through which the reduction reads the instance; counts reads per stage.
struct Seam<'a> {
    inst: &'a IppInstance,
    stage: Cell<Stage>,
    reads: [Cell<u64>; 3],
    learner_calls: Cell<u64>,
}

impl<'a> Seam<'a> {
    fn new(inst: &'a IppInstance) -> Self {
        Self {
            inst,
            stage: Cell::new(Stage::Sampling),
            reads: Default::default(),
            learner_calls: Cell::new(0),
        }
    }

    fn depths(&self) -> Vec<u32> {
        let slot = &self.reads[self.stage.get() as usize];
        slot.set(slot.get() + self.inst.points.len() as u64);
        self.inst.points.clone()
    }

    fn log(&self) -> SeamLog {
        SeamLog {
            sampling_reads: self.reads[Stage::Sampling as usize].get(),
            learning_reads: self.reads[Stage::Learning as usize].get(),
            scanning_reads: self.reads[Stage::Scanning as usize].get(),
            learner_calls: self.learner_calls.get(),
        }
    }
}

/// Reads of `d_1..d_m` recorded per stage of one reduction run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SeamLog {
    pub sampling_reads: u64,
    pub learning_reads: u64,
    pub scanning_reads: u64,
    pub learner_calls: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reduction {
    pub output: u32,
    pub window: u32,
    pub seam: SeamLog,
}

/// Deepest start of a window of `l` consecutive points with at least
/// `threshold·l` correct labels. Starts are 1-based.
pub fn deepest_window(correct: &[bool], l: usize, threshold: f64) -> Option<u32> {
    if l == 0 || l > correct.len() {
        return None;
    }
    let need = threshold * l as f64;
    let mut sum: usize = correct[correct.len() - l..].iter().filter(|&&c| c).count();
    let mut start = correct.len() - l;
    loop {
        if sum as f64 >= need {
            return Some(start as u32 + 1);
        }
        if start == 0 {
            return None;
        }
        start -= 1;
        sum = sum + correct[start] as usize - correct[start + l] as usize;
    }
}

/// The interior-point reduction: sample a branch, place the sample at the
/// instance depths, draw one hypothesis, and report the first depth of the
/// deepest almost-correct window (or `n` if there is none).
pub fn reduce_from_ipp(a: &dyn Learner, inst: &IppInstance, seed: u64, threshold: f64) -> Result<Reduction> {
    let seam = Seam::new(inst);
    let n = inst.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let turns: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let hypothesis_seed: u64 = rng.gen();

    let depths = seam.depths();
    let points = depths.iter().map(|&d| branch_point(&turns, d)).collect();
    let labels = depths.iter().map(|&d| turns[d as usize - 1]).collect();
    let s = RealizableSample::new(points, labels)?;

    seam.stage.set(Stage::Learning);
    seam.learner_calls.set(seam.learner_calls.get() + 1);
    let h = a.fit(&s, hypothesis_seed)?;

    seam.stage.set(Stage::Scanning);
    let l = window_len(n);
    let correct: Vec<bool> = h.label_branch(&turns).iter().zip(&turns).map(|(a, b)| a == b).collect();
    let output = deepest_window(&correct, l as usize, threshold).unwrap_or(n);
    Ok(Reduction {
        output,
        window: l,
        seam: seam.log(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub outputs: Vec<u32>,
    pub interior_rate: f64,
    pub seam: SeamLog,
}

/// Runs the reduction for seeds `seed..seed+trials` in parallel.
pub fn reduce_trials(
    a: &dyn Learner,
    inst: &IppInstance,
    seed: u64,
    trials: u64,
    threshold: f64,
) -> Result<TrialSummary> {
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| reduce_from_ipp(a, inst, seed.wrapping_add(t), threshold))
        .collect::<Result<Vec<_>>>()?;
    let interior = runs.iter().filter(|r| inst.is_interior(r.output)).count();
    let seam = runs.iter().fold(SeamLog::default(), |acc, r| SeamLog {
        sampling_reads: acc.sampling_reads + r.seam.sampling_reads,
        learning_reads: acc.learning_reads + r.seam.learning_reads,
        scanning_reads: acc.scanning_reads + r.seam.scanning_reads,
        learner_calls: acc.learner_calls + r.seam.learner_calls,
    });
    Ok(TrialSummary {
        outputs: runs.iter().map(|r| r.output).collect(),
        interior_rate: if trials == 0 {
            0.0
        } else {
            interior as f64 / trials as f64
        },
        seam,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
    pub xi_prime: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, alpha: f64, beta: f64, m: usize) -> Self {
        let xi = 17.0 * (alpha + beta);
        let xi_prime = 2.0 * (epsilon.exp() - 1.0 + delta) + 2.0 / (100.0 * m.max(1) as f64) + 18.0 * (alpha + beta);
        Self {
            epsilon,
            delta,
            alpha,
            beta,
            xi,
            xi_prime,
        }
    }

    /// ε = 10^-3, δ = 1/(10^3 m^2), α = β = 10^-4.
    pub fn defaults(m: usize) -> Self {
        let m2 = (m.max(1) * m.max(1)) as f64;
        Self::new(1e-3, 1.0 / (1e3 * m2), 1e-4, 1e-4, m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PairFlags {
    /// 1-based index `i` of the pair `(x_i, x_{i+1})`.
    pub i: usize,
    pub sign_change: bool,
    pub matching_neighbors: bool,
    pub correct: bool,
    pub a_good: bool,
}

/// Flags for each consecutive pair of a sample lying on the branch `turns`.
/// Points sit at 1-based depths `depth(x) + 1`.
pub fn good_pair_diagnostics(
    s: &RealizableSample,
    turns: &[bool],
    a: &dyn Learner,
    params: &PrivacyParams,
) -> Result<Vec<PairFlags>> {
    let n = turns.len() as u32;
    let mut depths = Vec::with_capacity(s.len());
    for (x, &y) in s.points.iter().zip(&s.labels) {
        let d = x.depth() + 1;
        if d > n || branch_point(turns, d) != *x || turns[d as usize - 1] != y {
            return Err(Error::Unrealizable);
        }
        depths.push(d);
    }
    let b = |d: u32| turns[d as usize - 1];
    let m = s.len();
    let mut out = Vec::new();
    for i in 0..m.saturating_sub(1) {
        let (yi, yj) = (s.labels[i], s.labels[i + 1]);
        let before = if i == 0 { 0 } else { depths[i - 1] };
        let after = if i + 2 < m { depths[i + 2] } else { n + 1 };
        let matching_neighbors =
            (before + 1..depths[i]).any(|d| b(d) == yi) && (depths[i + 1] + 1..after).any(|d| b(d) == yj);
        let err = |x: &VertexPath, y: bool| -> Result<f64> { Ok((a.predict(s, x)? - y as u8 as f64).abs()) };
        let correct = err(&s.points[i], yi)? <= params.xi && err(&s.points[i + 1], yj)? <= params.xi;
        let mut a_good = true;
        for d in depths[i] + 1..depths[i + 1] {
            if err(&branch_point(turns, d), b(d))? > params.xi_prime {
                a_good = false;
                break;
            }
        }
        out.push(PairFlags {
            i: i + 1,
            sign_change: yi != yj,
            matching_neighbors,
            correct,
            a_good,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finders::{oracle_best, verify, Predicate};
    use proptest::prelude::*;

    fn p(s: &str) -> VertexPath {
        VertexPath::parse(s).unwrap()
    }

    fn chain_sample(points: &[&str], labels: &[u8]) -> RealizableSample {
        RealizableSample::new(
            points.iter().map(|s| p(s)).collect(),
            labels.iter().map(|&b| b == 1).collect(),
        )
        .unwrap()
    }

    /// All root-to-leaf turn sequences of a depth-`n` tree, leftmost first.
    fn branches(n: u32) -> impl Iterator<Item = Vec<bool>> {
        (0..1u64 << n).map(move |k| (0..n).rev().map(|j| (k >> j) & 1 == 1).collect())
    }

    fn realizes(turns: &[bool], s: &RealizableSample) -> bool {
        s.points().iter().zip(s.labels()).all(|(x, &y)| {
            let d = x.depth() as usize;
            d < turns.len() && &turns[..d] == x.bits() && turns[d] == y
        })
    }

    fn leftmost_oracle(n: u32, s: &RealizableSample, x: &VertexPath) -> f64 {
        let b = branches(n).find(|b| realizes(b, s)).unwrap();
        let d = x.depth() as usize;
        (d < b.len() && &b[..d] == x.bits() && b[d]) as u8 as f64
    }

    #[test]
    fn sample_rejects_broken_chains() {
        assert!(RealizableSample::new(vec![p("0"), p("1")], vec![false, false]).is_err());
        assert!(RealizableSample::new(vec![p(""), p("01")], vec![true, false]).is_err());
        assert!(RealizableSample::new(vec![p(""), p("01")], vec![false, false]).is_ok());
    }

    #[test]
    fn loc_examples() {
        let s = chain_sample(&["0", "010", "01011"], &[1, 1, 0]);
        assert_eq!(s.loc(&p("")).unwrap(), 0);
        assert_eq!(s.loc(&p("0101")).unwrap(), 2);
        assert_eq!(s.loc(&p("010110")).unwrap(), 3);
        assert_eq!(s.loc(&p("01")).unwrap(), 1);
        assert!(s.loc(&p("1")).is_err());
        assert!(s.loc(&p("010111")).is_err());
        assert!(s.loc(&p("010")).is_err());
    }

    #[test]
    fn extend_labels() {
        let s = chain_sample(&["", "011"], &[0, 1]);
        let e = s.extend(&p("01")).unwrap();
        assert_eq!(e.labels(), &[false, true, true]);
        let e = s.extend(&p("0111")).unwrap();
        assert_eq!(e.labels(), &[false, true, false]);
        assert_eq!(e.points().last().unwrap(), &p("0111"));
        assert!(s.extend(&p("011")).is_err());
    }

    #[test]
    fn extended_labels_are_the_chain_directions() {
        let s = chain_sample(&["", "10"], &[1, 0]);
        for x in HostTree::new(4).vertices().filter(|x| s.is_compatible(x)) {
            let (t, i) = s.cell(&x).unwrap();
            let e = s.extend(&x).unwrap();
            assert_eq!(e.points()[i], x);
            let mut chain = e.points().to_vec();
            chain.push(e.points().last().unwrap().child(*t.last().unwrap()));
            assert_eq!(RealizableSample::from_chain(&chain).unwrap().labels(), &t[..]);
        }
    }

    #[test]
    fn leftmost_branch_matches_bruteforce() {
        let n = 5;
        let verts: Vec<VertexPath> = HostTree::new(n - 1).vertices().collect();
        let mut samples = vec![RealizableSample::empty()];
        for m in 1..=2 {
            for chain in chains(n - 1, m) {
                for y in [false, true] {
                    let mut labels = RealizableSample::from_chain(&chain).unwrap().labels;
                    labels.push(y);
                    samples.push(RealizableSample::new(chain.clone(), labels).unwrap());
                }
            }
        }
        for s in &samples {
            for x in &verts {
                assert_eq!(
                    LeftmostBranch.predict(s, x).unwrap(),
                    leftmost_oracle(n, s, x),
                    "{s:?} {x}"
                );
            }
        }
    }

    #[test]
    fn leftmost_branch_examples() {
        let h = LeftmostBranch.fit(&RealizableSample::empty(), 0).unwrap();
        assert_eq!(h.label_branch(&[true, false, true]), vec![false, false, false]);
        assert!(HostTree::new(4).vertices().all(|x| !h.label(&x)));
        let s = chain_sample(&["1", "101"], &[0, 1]);
        let h = LeftmostBranch.fit(&s, 0).unwrap();
        assert!(h.label(&p("")));
        assert!(!h.label(&p("1")));
        assert!(h.label(&p("10")));
        assert!(h.label(&p("101")));
        assert!(!h.label(&p("1011")));
        assert!(!h.label(&p("0")));
    }

    #[test]
    fn branch_labels_agree_with_pointwise_labels() {
        let turns = sample_branch(40, 3);
        let s = RealizableSample::new(
            vec![branch_point(&turns, 7), branch_point(&turns, 20)],
            vec![turns[6], turns[19]],
        )
        .unwrap();
        let learners: Vec<Box<dyn Learner>> = vec![
            Box::new(LeftmostBranch),
            Box::new(AllZero),
            Box::new(Parity),
            Box::new(BranchCheat {
                turns: sample_branch(40, 9),
            }),
        ];
        for a in &learners {
            let h = a.fit(&s, 1).unwrap();
            let fast = h.label_branch(&turns);
            let slow: Vec<bool> = (1..=40).map(|d| h.label(&branch_point(&turns, d))).collect();
            assert_eq!(fast, slow, "{}", a.name());
        }
    }

    #[test]
    fn leftmost_is_comparison_based() {
        for depth in 1..=6u32 {
            for m in 0..=2usize.min(depth as usize - 1) {
                let r = is_comparison_based(&LeftmostBranch, &SubtreeEmbedding::whole(depth), m, 0.0).unwrap();
                assert!(r.comparison_based, "depth {depth} m {m}");
            }
        }
        let emb = SubtreeEmbedding::new(2, ["", "00", "1", "000", "0011", "10", "111"].map(p).to_vec(), false);
        assert!(validate(&emb, 4));
        assert!(
            is_comparison_based(&LeftmostBranch, &emb, 1, 0.0)
                .unwrap()
                .comparison_based
        );
    }

    fn validate(e: &SubtreeEmbedding, n: u32) -> bool {
        crate::tree::validate_embedding(e, &HostTree::new(n))
    }

    #[test]
    fn parity_is_not_comparison_based() {
        let r = is_comparison_based(&Parity, &SubtreeEmbedding::whole(4), 1, 0.4).unwrap();
        assert!(!r.comparison_based);
        let c = r.counterexample.unwrap();
        assert_eq!(c.low.value, 0.0);
        assert_eq!(c.high.value, 1.0);
        assert_eq!(c.low.sample.cell(&c.low.x).unwrap(), (c.t.clone(), c.i));
        assert_eq!(c.high.sample.cell(&c.high.x).unwrap(), (c.t.clone(), c.i));
    }

    #[test]
    fn table_learner_recovers_its_table() {
        let m = 2;
        let table = ComparisonTable::from_fn(m, |t, i| ((bits_index(t) * 7 + i * 3) % 11) as f64 / 10.0).unwrap();
        let a = TableLearner { table: table.clone() };
        let r = is_comparison_based(&a, &SubtreeEmbedding::whole(4), m, 0.0).unwrap();
        assert!(r.comparison_based);
        for (t, i, v) in table.entries() {
            let key = (bits_to_string(&t), i);
            if !r.unobserved.contains(&key) {
                assert_eq!(r.table.get(&t, i), v);
            }
        }
        // Below the last point the new label is always 0.
        assert!(r.unobserved.iter().all(|(t, i)| *i == m && t.ends_with('1')));
        assert_eq!(r.unobserved.len(), 1 << m);
    }

    #[test]
    fn table_learner_sampling_matches_probabilities() {
        let a = TableLearner {
            table: ComparisonTable::constant(1, 0.3).unwrap(),
        };
        let s = chain_sample(&["0"], &[1]);
        let x = p("01");
        let ones = (0..4000).filter(|&seed| a.fit(&s, seed).unwrap().label(&x)).count();
        assert!((ones as f64 / 4000.0 - 0.3).abs() < 0.03);
        assert_eq!(a.predict(&s, &x).unwrap(), 0.3);
        assert_eq!(a.predict(&s, &p("1")).unwrap(), 0.0);
    }

    #[test]
    fn table_json_round_trip() {
        let t = ComparisonTable::from_fn(1, |t, i| if t[0] { 0.25 } else { i as f64 / 2.0 }).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["m"], 1);
        assert_eq!(v["p"]["10"], serde_json::json!([0.25, 0.25]));
        let back: ComparisonTable = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
        let short = serde_json::json!({"m": 1, "p": {"00": [0.0, 0.0]}});
        assert!(serde_json::from_value::<ComparisonTable>(short).is_err());
    }

    #[test]
    fn chain_enumeration_counts() {
        // Pairs of comparable vertices in a depth-d tree: sum over v of its descendants.
        for d in 0..5u32 {
            let pairs: usize = (0..=d).map(|l| (1usize << l) * ((1usize << (d - l + 1)) - 2)).sum();
            assert_eq!(chains(d, 2).len(), pairs);
            assert_eq!(chains(d, 1).len(), (1 << (d + 1)) - 1);
        }
        assert!(chains(3, 5).is_empty());
        assert_eq!(chains(3, 4).len(), 8);
    }

    #[test]
    fn constant_table_gives_one_color() {
        let a = TableLearner {
            table: ComparisonTable::constant(1, 0.5).unwrap(),
        };
        let c = build_chain_coloring(&a, 4, 1).unwrap();
        let colors: std::collections::BTreeSet<u32> = chains(4, 3).iter().map(|ch| c.color_of(ch).unwrap()).collect();
        assert_eq!(colors.len(), 1);
        assert_eq!(decode_chain_color(*colors.iter().next().unwrap(), 1), vec![50, 50]);
    }

    #[test]
    fn deterministic_learners_round_to_endpoints() {
        for m in 1..=2 {
            let c = build_chain_coloring(&LeftmostBranch, 4, m).unwrap();
            assert_eq!(c.colors, (100 * m as u32 + 1).pow(m as u32 + 1));
            for ch in chains(4, m + 2) {
                let q = decode_chain_color(c.color_of(&ch).unwrap(), m);
                assert!(q.iter().all(|&r| r == 0 || r == 100 * m as u32), "{q:?}");
            }
        }
        assert!(build_chain_coloring(&LeftmostBranch, 6, 3).is_err());
    }

    #[test]
    fn chain_coloring_pipeline() {
        let m = 1;
        let c = build_chain_coloring(&LeftmostBranch, 5, m).unwrap();
        let r = oracle_best(&c, Predicate::TypeMonochromatic).unwrap();
        assert!(r.achieved_depth >= 2);
        assert!(verify(&c, &r.embedding, &r.color_witness).unwrap().is_none());
        let cb = is_comparison_based(&LeftmostBranch, &r.embedding, m, 1.0 / (100.0 * m as f64)).unwrap();
        assert!(cb.comparison_based);
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to_grid(0.005, 1), 0);
        assert_eq!(round_to_grid(0.0051, 1), 1);
        assert_eq!(round_to_grid(0.5, 1), 50);
        assert_eq!(round_to_grid(1.0, 3), 300);
        assert_eq!(round_to_grid(0.0, 3), 0);
    }

    #[test]
    fn window_lengths() {
        assert_eq!(window_len(4096), 144);
        assert_eq!(window_len(256), 64);
        assert_eq!(window_len(2), 1);
        assert_eq!(window_len(1), 0);
        assert_eq!(window_len(100), 44);
    }

    #[test]
    fn instance_gap_is_enforced() {
        assert!(IppInstance::new(256, vec![10, 75]).is_ok());
        assert_eq!(
            IppInstance::new(256, vec![75, 11]).unwrap_err(),
            Error::InstanceGap {
                left: 11,
                right: 75,
                gap: 64
            }
        );
        assert!(IppInstance::new(256, vec![0]).is_err());
        assert!(IppInstance::new(256, vec![257]).is_err());
        assert_eq!(IppInstance::new(256, vec![200, 10]).unwrap().points(), &[10, 200]);
    }

    fn deepest_window_oracle(correct: &[bool], l: usize) -> Option<u32> {
        (0..correct.len())
            .filter(|&s| s + l <= correct.len() && l > 0)
            .filter(|&s| 10 * correct[s..s + l].iter().filter(|&&c| c).count() >= 9 * l)
            .max()
            .map(|s| s as u32 + 1)
    }

    #[test]
    fn cheat_learner_finds_the_last_window() {
        let inst = IppInstance::new(256, vec![10, 100, 180]).unwrap();
        for seed in 0..20 {
            let a = BranchCheat {
                turns: sample_branch(256, seed),
            };
            let r = reduce_from_ipp(&a, &inst, seed, DEFAULT_THRESHOLD).unwrap();
            assert_eq!(r.output, 256 - 64 + 1);
        }
    }

    #[test]
    fn all_zero_learner_without_windows_returns_n() {
        let n = 64;
        let l = window_len(n) as usize;
        let inst = IppInstance::new(n, vec![10]).unwrap();
        let seed = (0..)
            .find(|&s| {
                let zeros: Vec<bool> = sample_branch(n, s).iter().map(|&t| !t).collect();
                deepest_window_oracle(&zeros, l).is_none()
            })
            .unwrap();
        assert_eq!(
            reduce_from_ipp(&AllZero, &inst, seed, DEFAULT_THRESHOLD)
                .unwrap()
                .output,
            n
        );
    }

    #[test]
    fn leftmost_reduction_lands_inside() {
        let inst = IppInstance::new(4096, (1..=8).map(|i| 400 * i).collect()).unwrap();
        let r = reduce_trials(&LeftmostBranch, &inst, 0, 200, DEFAULT_THRESHOLD).unwrap();
        let inside = r.outputs.iter().filter(|&&o| inst.is_interior(o)).count();
        assert!(inside >= 190, "{inside}");
        assert_eq!(r.seam.scanning_reads, 0);
        assert_eq!(r.seam.learning_reads, 0);
        assert_eq!(r.seam.learner_calls, 200);
    }

    #[test]
    fn leftmost_agreement_profile() {
        let n = 1024;
        let inst = IppInstance::new(n, vec![100, 300, 500]).unwrap();
        let mut below = (0usize, 0usize);
        for seed in 0..200 {
            let turns = sample_branch(n, seed);
            let s = RealizableSample::new(
                inst.points().iter().map(|&d| branch_point(&turns, d)).collect(),
                inst.points().iter().map(|&d| turns[d as usize - 1]).collect(),
            )
            .unwrap();
            let labels = LeftmostBranch.fit(&s, 0).unwrap().label_branch(&turns);
            for d in 1..=n as usize {
                let ok = labels[d - 1] == turns[d - 1];
                if d <= 500 {
                    assert!(ok);
                } else {
                    below.0 += ok as usize;
                    below.1 += 1;
                }
            }
        }
        let rate = below.0 as f64 / below.1 as f64;
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn hypothesis_ignores_bits_below_the_last_point() {
        let n = 200;
        let inst = IppInstance::new(n, vec![5, 70, 140]).unwrap();
        let probes: Vec<VertexPath> = (0..50)
            .map(|s| branch_point(&sample_branch(n, 1000 + s), 150))
            .collect();
        for seed in 0..20 {
            let turns = sample_branch(n, seed);
            let mut flipped = turns.clone();
            for b in flipped[140..].iter_mut().step_by(3) {
                *b = !*b;
            }
            let build = |t: &[bool]| {
                RealizableSample::new(
                    inst.points().iter().map(|&d| branch_point(t, d)).collect(),
                    inst.points().iter().map(|&d| t[d as usize - 1]).collect(),
                )
                .unwrap()
            };
            let (s, s2) = (build(&turns), build(&flipped));
            assert_eq!(s, s2);
            for a in [&LeftmostBranch as &dyn Learner, &Parity, &AllZero] {
                let (h, h2) = (a.fit(&s, seed).unwrap(), a.fit(&s2, seed).unwrap());
                assert_eq!(h.label_branch(&flipped), h2.label_branch(&flipped));
                assert!(probes.iter().all(|x| h.label(x) == h2.label(x)));
            }
        }
    }

    #[test]
    fn params_defaults() {
        let p = PrivacyParams::defaults(10);
        assert!((p.xi - 34e-4).abs() < 1e-15);
        let expected = 2.0 * (1e-3f64.exp() - 1.0 + 1e-5) + 2e-3 + 36e-4;
        assert!((p.xi_prime - expected).abs() < 1e-15);
        assert_eq!(p.delta, 1e-5);
    }

    #[test]
    fn good_pair_flags() {
        // Branch turns 0,0,1,1,0,1,0,0 at depths 1..8.
        let turns: Vec<bool> = [0, 0, 1, 1, 0, 1, 0, 0].iter().map(|&b| b == 1).collect();
        let at = |d: u32| branch_point(&turns, d);
        let s = RealizableSample::new(vec![at(2), at(4), at(6)], vec![false, true, true]).unwrap();
        let params = PrivacyParams::defaults(3);
        let flags = good_pair_diagnostics(&s, &turns, &LeftmostBranch, &params).unwrap();
        assert_eq!(flags.len(), 2);
        assert!(flags[0].sign_change && !flags[1].sign_change);
        // Pair (1,2): depth 1 has label 0 = y_1; depth 5 has label 0, not y_2 = 1.
        assert!(!flags[0].matching_neighbors);
        // Pair (2,3): depth 3 has label 1 = y_2; depth 7, 8 have label 0, not y_3 = 1.
        assert!(!flags[1].matching_neighbors);
        assert!(flags.iter().all(|f| f.correct && f.a_good));

        let s = RealizableSample::new(vec![at(2), at(5)], vec![false, false]).unwrap();
        let flags = good_pair_diagnostics(&s, &turns, &LeftmostBranch, &params).unwrap();
        assert!(flags[0].matching_neighbors && !flags[0].sign_change);

        let bad = RealizableSample::new(vec![at(2)], vec![true]).unwrap();
        assert!(good_pair_diagnostics(&bad, &turns, &LeftmostBranch, &params).is_err());
    }

    #[test]
    fn leftmost_pairs_are_a_good_with_zero_slack() {
        let mut params = PrivacyParams::defaults(4);
        params.xi_prime = 0.0;
        for seed in 0..30 {
            let turns = sample_branch(64, seed);
            let s = RealizableSample::new(
                [5, 20, 35, 50].iter().map(|&d| branch_point(&turns, d)).collect(),
                [5, 20, 35, 50].iter().map(|&d| turns[d - 1]).collect(),
            )
            .unwrap();
            let flags = good_pair_diagnostics(&s, &turns, &LeftmostBranch, &params).unwrap();
            assert!(flags.iter().all(|f| f.a_good && f.correct));
        }
    }

    #[test]
    fn deepest_window_matches_oracle() {
        for seed in 0..50 {
            let bits = sample_branch(60, seed);
            let biased: Vec<bool> = bits
                .chunks(2)
                .map(|c| c[0] || c[1])
                .chain(bits.iter().copied())
                .collect();
            for l in [1, 5, 10, 30] {
                assert_eq!(deepest_window(&biased, l, 0.9), deepest_window_oracle(&biased, l));
            }
        }
        assert_eq!(deepest_window(&[true; 3], 4, 0.9), None);
    }

    proptest! {
        #[test]
        fn rounding_is_within_half_a_step(v in 0.0f64..=1.0, m in 1usize..20) {
            let r = round_to_grid(v, m);
            let step = 1.0 / (100.0 * m as f64);
            prop_assert!((r as f64 * step - v).abs() <= step / 2.0 + 1e-12);
        }

        #[test]
        fn loc_counts_ancestors(bits in proptest::collection::vec(any::<bool>(), 1..12), cuts in proptest::collection::btree_set(0usize..12, 1..4), q in 0usize..12) {
            let depths: Vec<usize> = cuts.into_iter().filter(|&c| c < bits.len()).collect();
            prop_assume!(!depths.is_empty());
            let s = RealizableSample::new(
                depths.iter().map(|&d| VertexPath::from_bits(bits[..d].to_vec())).collect(),
                depths.iter().map(|&d| bits[d]).collect(),
            ).unwrap();
            let x = VertexPath::from_bits(bits[..q.min(bits.len())].to_vec());
            if depths.contains(&q.min(bits.len())) {
                prop_assert!(s.loc(&x).is_err());
            } else {
                prop_assert_eq!(s.loc(&x).unwrap(), depths.iter().filter(|&&d| d < x.depth() as usize).count());
                let e = s.extend(&x).unwrap();
                prop_assert_eq!(e.len(), s.len() + 1);
                prop_assert!(RealizableSample::new(e.points().to_vec(), e.labels().to_vec()).is_ok());
            }
        }
    }
}
