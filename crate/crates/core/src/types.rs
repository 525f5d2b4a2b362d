//! Closures, subset types and type counting.
//!
//! A type is stored as a canonical string: the pre-order walk of its
//! branch-marked tree, one character per node followed by its children.
//!
//! | char | node |
//! |------|------|
//! | `a`  | unmarked leaf |
//! | `l`  | unmarked, left child only |
//! | `r`  | unmarked, right child only |
//! | `b`  | unmarked, both children |
//! | `m`  | marked (closure-only), always both children |
//!
//! So the incomparable pair is `maa`, the left pair `la` and a single vertex `a`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tree::{lca, relation, Relation, VertexPath};

/// The closure of `a` under pairwise lowest common ancestors, in pre-order.
pub fn closure(a: &[VertexPath]) -> Result<Vec<VertexPath>> {
    if a.is_empty() {
        return Err(Error::EmptySubset);
    }
    let sorted: BTreeSet<VertexPath> = a.iter().cloned().collect();
    let sorted: Vec<VertexPath> = sorted.into_iter().collect();
    // in pre-order, LCAs of neighbours already cover every pair
    let mut out: BTreeSet<VertexPath> = sorted.iter().cloned().collect();
    for w in sorted.windows(2) {
        out.insert(lca(&w[0], &w[1]));
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Node {
    marked: bool,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

impl Node {
    fn write(&self, out: &mut String) {
        out.push(match (self.marked, self.left.is_some(), self.right.is_some()) {
            (true, _, _) => 'm',
            (false, false, false) => 'a',
            (false, true, false) => 'l',
            (false, false, true) => 'r',
            (false, true, true) => 'b',
        });
        if let Some(l) = &self.left {
            l.write(out);
        }
        if let Some(r) = &self.right {
            r.write(out);
        }
    }

    fn parse(chars: &[u8], pos: &mut usize) -> Option<Node> {
        let c = *chars.get(*pos)?;
        *pos += 1;
        let (marked, l, r) = match c {
            b'a' => (false, false, false),
            b'l' => (false, true, false),
            b'r' => (false, false, true),
            b'b' => (false, true, true),
            b'm' => (true, true, true),
            _ => return None,
        };
        let left = if l {
            Some(Box::new(Node::parse(chars, pos)?))
        } else {
            None
        };
        let right = if r {
            Some(Box::new(Node::parse(chars, pos)?))
        } else {
            None
        };
        Some(Node { marked, left, right })
    }

    fn height(&self) -> u32 {
        let l = self.left.as_ref().map_or(0, |n| 1 + n.height());
        let r = self.right.as_ref().map_or(0, |n| 1 + n.height());
        l.max(r)
    }

    fn place(&self, at: VertexPath, out: &mut Vec<VertexPath>) {
        if let Some(l) = &self.left {
            l.place(at.child(false), out);
        }
        if !self.marked {
            out.push(at.clone());
        }
        if let Some(r) = &self.right {
            r.place(at.child(true), out);
        }
    }
}

/// Builds the induced tree on a pre-order-sorted, LCA-closed block.
fn induced(block: &[VertexPath], members: &BTreeSet<VertexPath>) -> Node {
    let root = &block[0];
    let split_bit = root.depth() as usize;
    let rest = &block[1..];
    let cut = rest.iter().position(|v| v.bits()[split_bit]).unwrap_or(rest.len());
    let (l, r) = rest.split_at(cut);
    Node {
        marked: !members.contains(root),
        left: (!l.is_empty()).then(|| Box::new(induced(l, members))),
        right: (!r.is_empty()).then(|| Box::new(induced(r, members))),
    }
}

/// Canonical form of an m-subset up to relation-preserving isomorphism of closures.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetType {
    canonical: String,
}

impl SubsetType {
    pub fn parse(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        let mut pos = 0;
        match Node::parse(bytes, &mut pos) {
            Some(_) if pos == bytes.len() => Ok(Self {
                canonical: s.to_string(),
            }),
            _ => Err(Error::BadType(s.to_string())),
        }
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// Number of unmarked nodes.
    pub fn size(&self) -> usize {
        self.canonical.bytes().filter(|&c| c != b'm').count()
    }

    fn node(&self) -> Node {
        Node::parse(self.canonical.as_bytes(), &mut 0).expect("validated on construction")
    }

    fn from_node(n: &Node) -> Self {
        let mut canonical = String::new();
        n.write(&mut canonical);
        Self { canonical }
    }

    /// Longest root-to-node path of the branch-marked tree, in edges.
    pub fn height(&self) -> u32 {
        self.node().height()
    }

    /// A subset of this type hanging from the root: each tree edge becomes a child step.
    pub fn realize(&self) -> Vec<VertexPath> {
        let mut out = Vec::new();
        self.node().place(VertexPath::root(), &mut out);
        out
    }

    /// Whether the top vertex belongs to the subset, and the types of the parts
    /// below its left and right child.
    pub fn split(&self) -> (bool, Option<SubsetType>, Option<SubsetType>) {
        let n = self.node();
        (
            !n.marked,
            n.left.as_deref().map(Self::from_node),
            n.right.as_deref().map(Self::from_node),
        )
    }

    /// True for chain types: no node has two children.
    pub fn is_chain(&self) -> bool {
        self.canonical.bytes().all(|c| matches!(c, b'a' | b'l' | b'r'))
    }
}

impl fmt::Display for SubsetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl fmt::Debug for SubsetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetType({})", self.canonical)
    }
}

#[derive(Serialize, Deserialize)]
struct TypeJson {
    m: usize,
    canonical: String,
}

impl Serialize for SubsetType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TypeJson {
            m: self.size(),
            canonical: self.canonical.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubsetType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TypeJson::deserialize(d)?;
        let t = SubsetType::parse(&j.canonical).map_err(serde::de::Error::custom)?;
        if t.size() != j.m {
            return Err(serde::de::Error::custom(format!(
                "type {} has size {}, not {}",
                j.canonical,
                t.size(),
                j.m
            )));
        }
        Ok(t)
    }
}

pub fn subset_type(a: &[VertexPath]) -> Result<SubsetType> {
    let cl = closure(a)?;
    let members: BTreeSet<VertexPath> = a.iter().cloned().collect();
    Ok(SubsetType::from_node(&induced(&cl, &members)))
}

/// Direction bits of a chain: bit `i` is set when vertex `i+1` is a right descendant of vertex `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainType {
    bits: Vec<bool>,
}

impl ChainType {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let p = VertexPath::parse(s).map_err(|_| Error::BadType(s.to_string()))?;
        Ok(Self {
            bits: p.bits().to_vec(),
        })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Chain length `m`.
    pub fn size(&self) -> usize {
        self.bits.len() + 1
    }

    /// The bits read as a binary number, first bit most significant.
    pub fn index(&self) -> u64 {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn from_index(m: usize, index: u64) -> Self {
        let bits = (0..m - 1).rev().map(|i| (index >> i) & 1 == 1).collect();
        Self { bits }
    }

    pub fn subset_type(&self) -> SubsetType {
        let mut canonical: String = self.bits.iter().map(|&b| if b { 'r' } else { 'l' }).collect();
        canonical.push('a');
        SubsetType { canonical }
    }
}

impl fmt::Display for ChainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ChainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChainType({self})")
    }
}

impl Serialize for ChainType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChainType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ChainType::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Sorts a chain by depth and reads off its direction bits.
pub fn chain_type(c: &[VertexPath]) -> Result<ChainType> {
    if c.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut sorted = c.to_vec();
    sorted.sort_by(VertexPath::depth_order);
    let mut bits = Vec::with_capacity(sorted.len() - 1);
    for w in sorted.windows(2) {
        match relation(&w[0], &w[1]) {
            Relation::VLeftDescOfU => bits.push(false),
            Relation::VRightDescOfU => bits.push(true),
            _ => return Err(Error::NotAChain),
        }
    }
    Ok(ChainType { bits })
}

/// All `m`-chain types in index order.
pub fn chain_types(m: usize) -> Vec<ChainType> {
    (0..1u64 << (m - 1)).map(|i| ChainType::from_index(m, i)).collect()
}

/// Every type of size `m`, sorted by canonical string.
pub fn enumerate_types(m: usize) -> Vec<SubsetType> {
    let mut memo = HashMap::new();
    let mut all = generate(m, &mut memo);
    all.sort();
    all.into_iter().map(|canonical| SubsetType { canonical }).collect()
}

fn generate(u: usize, memo: &mut HashMap<usize, Vec<String>>) -> Vec<String> {
    if let Some(v) = memo.get(&u) {
        return v.clone();
    }
    let mut out = Vec::new();
    if u == 1 {
        out.push("a".to_string());
    }
    if u >= 2 {
        for s in generate(u - 1, memo) {
            out.push(format!("l{s}"));
            out.push(format!("r{s}"));
        }
        for a in 1..u {
            let left = generate(a, memo);
            // unmarked root with both children
            if a + 1 < u {
                let right = generate(u - 1 - a, memo);
                for l in &left {
                    for r in &right {
                        out.push(format!("b{l}{r}"));
                    }
                }
            }
            let right = generate(u - a, memo);
            for l in &left {
                for r in &right {
                    out.push(format!("m{l}{r}"));
                }
            }
        }
    }
    memo.insert(u, out.clone());
    out
}

/// Number of types of size `m`: `Σ_{j<m} (m−j)·C(m+j−1, j)·2^j / m`.
pub fn tau(m: usize) -> BigUint {
    assert!(m >= 1);
    let mb = BigUint::from(m);
    let mut sum = BigUint::zero();
    for j in 0..m {
        sum += (BigUint::from(m - j) * binomial(BigUint::from(m + j - 1), BigUint::from(j))) << j;
    }
    debug_assert!((&sum % &mb).is_zero());
    sum / mb
}

/// `2^(3m−2) / sqrt(π(m−1))`.
pub fn tau_upper_bound(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain("tau upper bound needs m >= 2"));
    }
    Ok(2f64.powi(3 * m as i32 - 2) / (std::f64::consts::PI * (m - 1) as f64).sqrt())
}

/// `m! + 2^(m−1)`: the number of types forced in infinite subtrees.
pub fn tau_infinity_lower(m: usize) -> BigUint {
    assert!(m >= 1);
    let fact = (1..=m).fold(BigUint::one(), |acc, i| acc * i);
    fact + (BigUint::one() << (m - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{enumerate_subsets, HostTree};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn ps(v: &[&str]) -> Vec<VertexPath> {
        v.iter().map(|s| VertexPath::parse(s).unwrap()).collect()
    }

    fn brute_closure(a: &[VertexPath]) -> BTreeSet<VertexPath> {
        let mut set: BTreeSet<VertexPath> = a.iter().cloned().collect();
        loop {
            let v: Vec<_> = set.iter().cloned().collect();
            let before = set.len();
            for x in &v {
                for y in &v {
                    set.insert(lca(x, y));
                }
            }
            if set.len() == before {
                return set;
            }
        }
    }

    fn isomorphic(a: &[VertexPath], b: &[VertexPath]) -> bool {
        let ca: Vec<_> = brute_closure(a).into_iter().collect();
        let cb: Vec<_> = brute_closure(b).into_iter().collect();
        if ca.len() != cb.len() || a.len() != b.len() {
            return false;
        }
        let ina: HashSet<_> = a.iter().collect();
        let inb: HashSet<_> = b.iter().collect();
        let n = ca.len();
        let mut perm: Vec<usize> = (0..n).collect();
        fn heap_perms(k: usize, perm: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
            if k == 1 {
                return f(perm);
            }
            for i in 0..k {
                if heap_perms(k - 1, perm, f) {
                    return true;
                }
                if k % 2 == 0 {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
            false
        }
        heap_perms(n, &mut perm, &mut |p| {
            (0..n).all(|i| ina.contains(&ca[i]) == inb.contains(&cb[p[i]]))
                && (0..n).all(|i| (0..n).all(|j| relation(&ca[i], &ca[j]) == relation(&cb[p[i]], &cb[p[j]])))
        })
    }

    #[test]
    fn closure_examples() {
        assert_eq!(closure(&ps(&["00", "01"])).unwrap(), ps(&["0", "00", "01"]));
        assert_eq!(closure(&ps(&["", "0", "01"])).unwrap(), ps(&["", "0", "01"]));
        let a = ps(&["00", "01", "1"]);
        let expect: Vec<_> = brute_closure(&a).into_iter().collect();
        assert_eq!(closure(&a).unwrap(), expect);
        assert_eq!(expect, ps(&["", "0", "00", "01", "1"]));
        assert_eq!(closure(&[]), Err(Error::EmptySubset));
    }

    #[test]
    fn type_examples() {
        let u = subset_type(&ps(&["0", "1"])).unwrap();
        assert_eq!(u, subset_type(&ps(&["00", "01"])).unwrap());
        assert_eq!(u.canonical(), "maa");
        assert_eq!(subset_type(&ps(&["", "0"])).unwrap().canonical(), "la");
        let red = subset_type(&ps(&["0", "00", "1"])).unwrap();
        let blue = subset_type(&ps(&["0", "1", "10"])).unwrap();
        assert_ne!(red, blue);
        assert_eq!(red.canonical(), "mlaa");
        assert_eq!(blue.canonical(), "mala");
        let three_leaves = subset_type(&ps(&["00", "01", "1"])).unwrap();
        assert_eq!(three_leaves.canonical(), "mmaaa");
    }

    #[test]
    fn chain_type_examples() {
        assert_eq!(chain_type(&ps(&["", "1", "10"])).unwrap().bits(), &[true, false]);
        assert_eq!(chain_type(&ps(&["", "0"])).unwrap().bits(), &[false]);
        assert!(chain_type(&ps(&["01"])).unwrap().bits().is_empty());
        assert_eq!(chain_type(&ps(&["0", "1"])), Err(Error::NotAChain));
        assert_eq!(ChainType::from_bits(vec![false, true]).index(), 1);
        assert_eq!(ChainType::from_index(3, 2).bits(), &[true, false]);
    }

    #[test]
    fn enumerated_counts_match_formula() {
        let expected = [1u32, 3, 13, 67];
        for m in 1..=4 {
            assert_eq!(enumerate_types(m).len(), expected[m - 1] as usize);
            assert_eq!(tau(m), BigUint::from(expected[m - 1]));
        }
        for m in 5..=7 {
            assert_eq!(BigUint::from(enumerate_types(m).len()), tau(m));
        }
    }

    #[test]
    fn enumeration_matches_host_subsets() {
        for m in 1..=3 {
            let seen: BTreeSet<SubsetType> = enumerate_subsets(HostTree::new(m as u32 + 1), m, None)
                .map(|s| subset_type(&s).unwrap())
                .collect();
            let listed: BTreeSet<SubsetType> = enumerate_types(m).into_iter().collect();
            assert_eq!(seen, listed);
        }
    }

    #[test]
    fn canonical_strings_characterize_isomorphism() {
        for n in 1..=4u32 {
            for m in 1..=3usize {
                let mut reps: Vec<(SubsetType, Vec<VertexPath>)> = Vec::new();
                for s in enumerate_subsets(HostTree::new(n), m, None) {
                    let t = subset_type(&s).unwrap();
                    match reps.iter().find(|(r, _)| *r == t) {
                        Some((_, rep)) => assert!(isomorphic(rep, &s), "{s:?} vs {rep:?}"),
                        None => reps.push((t, s)),
                    }
                }
                for i in 0..reps.len() {
                    for j in i + 1..reps.len() {
                        assert!(!isomorphic(&reps[i].1, &reps[j].1));
                    }
                }
            }
        }
    }

    #[test]
    fn chain_types_are_two_to_the_m_minus_one() {
        for m in 1..=6 {
            let n = enumerate_types(m).iter().filter(|t| t.is_chain()).count();
            assert_eq!(n, 1 << (m - 1));
        }
    }

    #[test]
    fn realize_and_split_round_trip() {
        for m in 1..=4 {
            for t in enumerate_types(m) {
                let r = t.realize();
                assert_eq!(r.len(), m);
                assert_eq!(subset_type(&r).unwrap(), t);
                assert!(r.iter().all(|v| v.depth() <= t.height()));
                let (_, l, rt) = t.split();
                let below = |right: bool| {
                    let part: Vec<_> = r
                        .iter()
                        .filter(|v| v.depth() > 0 && v.bits()[0] == right)
                        .cloned()
                        .collect();
                    (!part.is_empty()).then(|| subset_type(&part).unwrap())
                };
                assert_eq!(l, below(false));
                assert_eq!(rt, below(true));
            }
        }
    }

    #[test]
    fn tau_bounds() {
        assert!((tau_upper_bound(2).unwrap() - 16.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
        assert!(tau_upper_bound(1).is_err());
        for m in 2..=8 {
            let t: f64 = tau(m).to_string().parse().unwrap();
            assert!(t <= tau_upper_bound(m).unwrap());
        }
        assert_eq!(tau_infinity_lower(1), BigUint::from(2u32));
        assert_eq!(tau_infinity_lower(2), BigUint::from(4u32));
        assert_eq!(tau_infinity_lower(3), BigUint::from(10u32));
    }

    #[test]
    fn type_json_shape() {
        let t = SubsetType::parse("maa").unwrap();
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, r#"{"m":2,"canonical":"maa"}"#);
        assert_eq!(serde_json::from_str::<SubsetType>(&j).unwrap(), t);
        assert!(serde_json::from_str::<SubsetType>(r#"{"m":3,"canonical":"maa"}"#).is_err());
        assert!(SubsetType::parse("ma").is_err());
        assert!(SubsetType::parse("aa").is_err());
    }

    fn arb_path(max: usize) -> impl Strategy<Value = VertexPath> {
        prop::collection::vec(any::<bool>(), 0..=max).prop_map(VertexPath::from_bits)
    }

    proptest! {
        #[test]
        fn closure_is_idempotent_and_monotone(
            a in prop::collection::vec(arb_path(8), 1..6),
            extra in prop::collection::vec(arb_path(8), 0..4),
        ) {
            let ca = closure(&a).unwrap();
            prop_assert_eq!(closure(&ca).unwrap(), ca.clone());
            prop_assert_eq!(ca.iter().cloned().collect::<BTreeSet<_>>(), brute_closure(&a));
            let mut b = a.clone();
            b.extend(extra);
            let cb: BTreeSet<_> = closure(&b).unwrap().into_iter().collect();
            prop_assert!(ca.iter().all(|v| cb.contains(v)));
        }

        #[test]
        fn type_is_embedding_invariant(
            a in prop::collection::btree_set(arb_path(4), 1..5),
            stretch in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..3), 31),
            root in arb_path(3),
        ) {
            // a random non-level-aligned embedding of the depth-4 tree: each edge
            // becomes the child step followed by a random path
            let a: Vec<_> = a.into_iter().collect();
            let mut image = vec![root];
            for i in 1..31usize {
                let parent = image[(i - 1) / 2].clone();
                let step = parent.child(i % 2 == 0);
                image.push(step.join(&VertexPath::from_bits(stretch[i].clone())));
            }
            let mapped: Vec<_> = a.iter().map(|v| image[v.heap_index()].clone()).collect();
            prop_assert_eq!(subset_type(&a).unwrap(), subset_type(&mapped).unwrap());
        }
    }
}
