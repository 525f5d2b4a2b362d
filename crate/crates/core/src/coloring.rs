//! Colorings of m-subsets: explicit tables, named generators, and JSON files.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use itertools::Itertools;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::tree::{lca, sort_key, HostTree, VertexPath};
use crate::types::{chain_type, enumerate_types, subset_type, tau, ChainType, SubsetType};

/// Which subsets a coloring is defined on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scope {
    All,
    Type(SubsetType),
    Types {
        types: Vec<SubsetType>,
    },
    Chains,
    ChainType {
        chain: ChainType,
    },
    ChainsAndAntichains,
    /// Pairs `[l, r]` with `l` in a left host and `r` in a separate right host.
    Cross {
        left_depth: u32,
        right_depth: u32,
    },
}

impl Scope {
    /// Membership test for a key already in canonical order.
    pub fn contains(&self, key: &[VertexPath]) -> bool {
        match self {
            Scope::All => true,
            Scope::Type(t) => subset_type(key).is_ok_and(|s| &s == t),
            Scope::Types { types } => subset_type(key).is_ok_and(|s| types.contains(&s)),
            Scope::Chains => chain_type(key).is_ok(),
            Scope::ChainType { chain } => chain_type(key).is_ok_and(|c| &c == chain),
            Scope::ChainsAndAntichains => chain_type(key).is_ok() || is_antichain(key),
            Scope::Cross {
                left_depth,
                right_depth,
            } => key.len() == 2 && key[0].depth() <= *left_depth && key[1].depth() <= *right_depth,
        }
    }

    pub fn is_cross(&self) -> bool {
        matches!(self, Scope::Cross { .. })
    }
}

fn is_antichain(key: &[VertexPath]) -> bool {
    key.iter().tuple_combinations().all(|(a, b)| !a.comparable(b))
}

/// Named pure functions of `(subset, seed)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    Random,
    Constant(u32),
    /// Index of the subset's type among all types of its size.
    Type,
    TripletCounterexample,
    PairCounterexample,
    SubsetCounterexample,
    DepthSum,
    DepthSpread,
    /// Hash of the lowest common ancestor of the subset.
    LcaPlanted,
    /// Hash of the subset's type.
    TypeTable,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Random => "random",
            Generator::Constant(_) => "constant",
            Generator::Type => "type",
            Generator::TripletCounterexample => "triplet-counterexample",
            Generator::PairCounterexample => "pair-counterexample",
            Generator::SubsetCounterexample => "subset-counterexample",
            Generator::DepthSum => "depth-sum",
            Generator::DepthSpread => "depth-spread",
            Generator::LcaPlanted => "lca-planted",
            Generator::TypeTable => "type-table",
        }
    }

    fn from_name(name: &str, params: &Value) -> Result<Self> {
        Ok(match name {
            "random" => Generator::Random,
            "constant" => Generator::Constant(params.get("color").and_then(Value::as_u64).unwrap_or(0) as u32),
            "type" => Generator::Type,
            "triplet-counterexample" => Generator::TripletCounterexample,
            "pair-counterexample" => Generator::PairCounterexample,
            "subset-counterexample" => Generator::SubsetCounterexample,
            "depth-sum" => Generator::DepthSum,
            "depth-spread" => Generator::DepthSpread,
            "lca-planted" => Generator::LcaPlanted,
            "type-table" => Generator::TypeTable,
            other => return Err(Error::Schema(format!("unknown generator {other:?}"))),
        })
    }
}

#[derive(Clone)]
enum Backing {
    Table(Arc<HashMap<Vec<VertexPath>, u32>>),
    Generator {
        generator: Generator,
        seed: u64,
        type_index: Option<Arc<HashMap<SubsetType, u32>>>,
    },
}

/// A total assignment of colors `0..colors` to the in-scope `arity`-subsets of a depth-`depth` host.
#[derive(Clone)]
pub struct Coloring {
    pub depth: u32,
    pub arity: usize,
    pub colors: u32,
    pub scope: Scope,
    backing: Backing,
}

impl fmt::Debug for Coloring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let backing = match &self.backing {
            Backing::Table(t) => format!("table({} entries)", t.len()),
            Backing::Generator { generator, seed, .. } => format!("{}(seed {seed})", generator.name()),
        };
        f.debug_struct("Coloring")
            .field("depth", &self.depth)
            .field("arity", &self.arity)
            .field("colors", &self.colors)
            .field("scope", &self.scope)
            .field("backing", &backing)
            .finish()
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn hash_paths(seed: u64, paths: &[VertexPath]) -> u64 {
    let mut h = splitmix(seed);
    for p in paths {
        h = splitmix(h ^ (p.depth() as u64).wrapping_mul(0x100_0000_01B3));
        for chunk in p.bits().chunks(64) {
            let word = chunk.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
            h = splitmix(h ^ word);
        }
    }
    h
}

fn hash_str(seed: u64, s: &str) -> u64 {
    s.bytes().fold(splitmix(seed ^ 0x5555), |h, b| splitmix(h ^ b as u64))
}

/// Lexicographic rank of a permutation of `0..m`.
fn permutation_rank(perm: &[usize]) -> u64 {
    let m = perm.len();
    let mut rank = 0u64;
    for i in 0..m {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count() as u64;
        rank = rank * (m - i) as u64 + smaller;
    }
    rank
}

impl Coloring {
    /// An explicit table. Keys may come in any order; they are canonicalized.
    pub fn extensional(
        depth: u32,
        arity: usize,
        colors: u32,
        scope: Scope,
        assignments: impl IntoIterator<Item = (Vec<VertexPath>, u32)>,
    ) -> Result<Self> {
        let mut table = HashMap::new();
        let proto = Self {
            depth,
            arity,
            colors,
            scope: scope.clone(),
            backing: Backing::Table(Arc::new(HashMap::new())),
        };
        for (subset, color) in assignments {
            let key = proto.key(&subset)?;
            if color >= colors {
                return Err(Error::Schema(format!("color {color} is not below {colors}")));
            }
            if table.insert(key, color).is_some() {
                return Err(Error::Schema(format!("duplicate subset {subset:?}")));
            }
        }
        Ok(Self {
            backing: Backing::Table(Arc::new(table)),
            ..proto
        })
    }

    pub fn from_generator(
        generator: Generator,
        depth: u32,
        arity: usize,
        colors: u32,
        scope: Scope,
        seed: u64,
    ) -> Result<Self> {
        if colors == 0 {
            return Err(Error::domain("a coloring needs at least one color"));
        }
        if arity == 0 {
            return Err(Error::domain("arity must be at least 1"));
        }
        if scope.is_cross() && arity != 2 {
            return Err(Error::domain("cross scope colors pairs"));
        }
        if let Generator::Constant(c) = generator {
            if c >= colors {
                return Err(Error::domain(format!("color {c} is not below {colors}")));
            }
        }
        let type_index = match generator {
            Generator::Type => {
                let idx: HashMap<SubsetType, u32> = enumerate_types(arity)
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| (t, i as u32))
                    .collect();
                if (idx.len() as u64) > colors as u64 {
                    return Err(Error::domain(format!(
                        "type coloring of {arity}-subsets needs {} colors",
                        idx.len()
                    )));
                }
                Some(Arc::new(idx))
            }
            Generator::SubsetCounterexample => {
                let needed = (1u64 << (arity - 1)) + (1..=arity as u64).product::<u64>();
                if needed > colors as u64 {
                    return Err(Error::domain(format!("needs {needed} colors")));
                }
                None
            }
            Generator::PairCounterexample if colors < 4 || arity != 2 => {
                return Err(Error::domain("the pair counterexample colors pairs with 4 colors"));
            }
            Generator::TripletCounterexample if colors < 2 || arity != 3 => {
                return Err(Error::domain(
                    "the triplet counterexample colors triplets with 2 colors",
                ));
            }
            _ => None,
        };
        Ok(Self {
            depth,
            arity,
            colors,
            scope,
            backing: Backing::Generator {
                generator,
                seed,
                type_index,
            },
        })
    }

    pub fn random(depth: u32, arity: usize, colors: u32, scope: Scope, seed: u64) -> Result<Self> {
        Self::from_generator(Generator::Random, depth, arity, colors, scope, seed)
    }

    pub fn constant(depth: u32, arity: usize, scope: Scope) -> Self {
        Self::from_generator(Generator::Constant(0), depth, arity, 1, scope, 0).expect("constant coloring is valid")
    }

    pub fn host(&self) -> HostTree {
        HostTree::new(self.depth)
    }

    pub fn generator(&self) -> Option<(&Generator, u64)> {
        match &self.backing {
            Backing::Generator { generator, seed, .. } => Some((generator, *seed)),
            Backing::Table(_) => None,
        }
    }

    /// Canonical key: sorted by depth then bits, except cross pairs which keep `[l, r]`.
    fn key(&self, subset: &[VertexPath]) -> Result<Vec<VertexPath>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if subset.len() != self.arity {
            return Err(Error::OutOfScope);
        }
        let mut key = subset.to_vec();
        if let Scope::Cross { .. } = self.scope {
            if !self.scope.contains(&key) {
                return Err(Error::OutOfScope);
            }
            return Ok(key);
        }
        if key.iter().any(|v| v.depth() > self.depth) {
            return Err(Error::OutOfScope);
        }
        sort_key(&mut key);
        if key.windows(2).any(|w| w[0] == w[1]) || !self.scope.contains(&key) {
            return Err(Error::OutOfScope);
        }
        Ok(key)
    }

    pub fn color_of(&self, subset: &[VertexPath]) -> Result<u32> {
        let key = self.key(subset)?;
        self.color_of_key(&key)
    }

    /// Color of a subset known to be in scope; skips the scope test.
    pub(crate) fn color_unchecked(&self, subset: &[VertexPath]) -> Result<u32> {
        let mut key = subset.to_vec();
        if !self.scope.is_cross() {
            sort_key(&mut key);
        }
        self.color_of_key(&key)
    }

    fn color_of_key(&self, key: &[VertexPath]) -> Result<u32> {
        let k = self.colors as u64;
        match &self.backing {
            Backing::Table(t) => t
                .get(key)
                .copied()
                .ok_or_else(|| Error::Schema(format!("no color recorded for {key:?}"))),
            Backing::Generator {
                generator,
                seed,
                type_index,
            } => Ok(match generator {
                Generator::Random => (hash_paths(*seed, key) % k) as u32,
                Generator::Constant(c) => *c,
                Generator::Type => {
                    let t = subset_type(key)?;
                    type_index.as_ref().expect("built with the generator")[&t]
                }
                Generator::TripletCounterexample => match subset_type(key)?.canonical() {
                    "mlaa" => 0,
                    "mala" => 1,
                    _ => return Err(Error::OutOfScope),
                },
                Generator::PairCounterexample => pair_counterexample(&key[0], &key[1]),
                Generator::SubsetCounterexample => subset_counterexample(key)?,
                Generator::DepthSum => (key.iter().map(|v| v.depth() as u64).sum::<u64>() % k) as u32,
                Generator::DepthSpread => {
                    let (lo, hi) = key.iter().map(|v| v.depth()).minmax().into_option().expect("nonempty");
                    ((hi - lo) as u64 % k) as u32
                }
                Generator::LcaPlanted => {
                    let top = key[1..].iter().fold(key[0].clone(), |acc, v| lca(&acc, v));
                    (hash_paths(*seed, &[top]) % k) as u32
                }
                Generator::TypeTable => (hash_str(*seed, subset_type(key)?.canonical()) % k) as u32,
            }),
        }
    }

    /// Every in-scope subset, in canonical key form.
    pub fn subsets(&self) -> Box<dyn Iterator<Item = Vec<VertexPath>> + '_> {
        match &self.scope {
            Scope::Cross {
                left_depth,
                right_depth,
            } => {
                let left: Vec<_> = HostTree::new(*left_depth).vertices().collect();
                let right: Vec<_> = HostTree::new(*right_depth).vertices().collect();
                Box::new(left.into_iter().cartesian_product(right).map(|(l, r)| vec![l, r]))
            }
            scope => Box::new(
                self.host()
                    .vertices()
                    .collect::<Vec<_>>()
                    .into_iter()
                    .combinations(self.arity)
                    .map(|mut s| {
                        sort_key(&mut s);
                        s
                    })
                    .filter(move |s| scope.contains(s)),
            ),
        }
    }

    /// The same coloring as an explicit table.
    pub fn tabulate(&self) -> Result<Coloring> {
        let entries = self
            .subsets()
            .map(|s| {
                let c = self.color_of_key(&s)?;
                Ok((s, c))
            })
            .collect::<Result<Vec<_>>>()?;
        Coloring::extensional(self.depth, self.arity, self.colors, self.scope.clone(), entries)
    }

    pub fn to_json(&self) -> Value {
        match &self.backing {
            Backing::Table(t) => {
                let mut entries: Vec<_> = t.iter().collect();
                entries.sort_by(|a, b| {
                    a.0.iter()
                        .zip(b.0.iter())
                        .map(|(x, y)| VertexPath::depth_order(x, y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                let assignments: Vec<Value> = entries
                    .into_iter()
                    .map(|(k, c)| json!({ "subset": k, "color": c }))
                    .collect();
                json!({
                    "depth": self.depth,
                    "arity": self.arity,
                    "colors": self.colors,
                    "scope": self.scope,
                    "assignments": assignments,
                })
            }
            Backing::Generator { generator, seed, .. } => {
                let mut params = json!({
                    "depth": self.depth,
                    "arity": self.arity,
                    "colors": self.colors,
                    "scope": self.scope,
                });
                if let Generator::Constant(c) = generator {
                    params["color"] = json!(c);
                }
                json!({ "generator": generator.name(), "params": params, "seed": seed })
            }
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
            v.get(name)
                .ok_or_else(|| Error::Schema(format!("missing field {name:?}")))
        }
        fn uint(v: &Value, name: &str) -> Result<u64> {
            field(v, name)?
                .as_u64()
                .ok_or_else(|| Error::Schema(format!("field {name:?} must be a non-negative integer")))
        }
        fn scope(v: &Value) -> Result<Scope> {
            match v.get("scope") {
                None => Ok(Scope::All),
                Some(s) => serde_json::from_value(s.clone()).map_err(|e| Error::Schema(format!("scope: {e}"))),
            }
        }
        if let Some(name) = v.get("generator") {
            let name = name
                .as_str()
                .ok_or_else(|| Error::Schema("generator must be a string".into()))?;
            let params = field(v, "params")?;
            let seed = v.get("seed").and_then(Value::as_u64).unwrap_or(0);
            let generator = Generator::from_name(name, params)?;
            return Self::from_generator(
                generator,
                uint(params, "depth")? as u32,
                uint(params, "arity")? as usize,
                uint(params, "colors")? as u32,
                scope(params)?,
                seed,
            );
        }
        let depth = uint(v, "depth")? as u32;
        let arity = uint(v, "arity")? as usize;
        let colors = uint(v, "colors")? as u32;
        let scope = scope(v)?;
        #[derive(Deserialize)]
        struct Entry {
            subset: Vec<VertexPath>,
            color: u32,
        }
        let entries: Vec<Entry> = serde_json::from_value(field(v, "assignments")?.clone())
            .map_err(|e| Error::Schema(format!("assignments: {e}")))?;
        Self::extensional(
            depth,
            arity,
            colors,
            scope,
            entries.into_iter().map(|e| (e.subset, e.color)),
        )
    }
}

pub fn load_coloring(path: &Path) -> Result<Coloring> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    Coloring::from_json(&v)
}

pub fn save_coloring(c: &Coloring, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&c.to_json()).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Colors every `m`-subset by the index of its type; uses exactly `tau(m)` colors.
pub fn type_coloring(depth: u32, m: usize) -> Coloring {
    let k = tau(m).to_u32().expect("type count fits in u32");
    Coloring::from_generator(Generator::Type, depth, m, k, Scope::All, 0).expect("type coloring is valid")
}

/// Triplets shaped as a two-chain with a single vertex to its right get 0, to its left 1.
pub fn triplet_counterexample_coloring(depth: u32) -> Coloring {
    let scope = Scope::Types {
        types: vec![SubsetType::parse("mlaa").unwrap(), SubsetType::parse("mala").unwrap()],
    };
    Coloring::from_generator(Generator::TripletCounterexample, depth, 3, 2, scope, 0).expect("valid")
}

pub const RED: u32 = 0;
pub const BLUE: u32 = 1;
pub const GREEN: u32 = 2;
pub const YELLOW: u32 = 3;

/// Left pairs red, right pairs blue, incomparable pairs green when the left
/// vertex is at least as deep as the right one and yellow otherwise.
pub fn pair_counterexample_coloring(depth: u32) -> Coloring {
    Coloring::from_generator(Generator::PairCounterexample, depth, 2, 4, Scope::All, 0).expect("valid")
}

fn pair_counterexample(a: &VertexPath, b: &VertexPath) -> u32 {
    use crate::tree::{relation, Relation::*};
    match relation(a, b) {
        VLeftDescOfU | ULeftDescOfV => RED,
        VRightDescOfU | URightDescOfV => BLUE,
        _ => {
            let (left, right) = if a < b { (a, b) } else { (b, a) };
            if left.depth() >= right.depth() {
                GREEN
            } else {
                YELLOW
            }
        }
    }
}

/// Chains by chain-type index; antichains by `2^(m−1)` plus the rank of their depth permutation.
pub fn subset_counterexample_coloring(depth: u32, m: usize) -> Result<Coloring> {
    if m < 2 {
        return Err(Error::domain("needs m >= 2"));
    }
    let k = (1u64 << (m - 1)) + (1..=m as u64).product::<u64>();
    let k = u32::try_from(k).map_err(|_| Error::domain("too many colors"))?;
    Coloring::from_generator(
        Generator::SubsetCounterexample,
        depth,
        m,
        k,
        Scope::ChainsAndAntichains,
        0,
    )
}

/// The depth-order permutation of an antichain read left to right: positions
/// sorted by decreasing depth, ties broken leftmost first.
pub fn antichain_permutation(key: &[VertexPath]) -> Vec<usize> {
    let mut by_pos = key.to_vec();
    by_pos.sort();
    let mut perm: Vec<usize> = (0..by_pos.len()).collect();
    perm.sort_by(|&i, &j| by_pos[j].depth().cmp(&by_pos[i].depth()).then(i.cmp(&j)));
    perm
}

fn subset_counterexample(key: &[VertexPath]) -> Result<u32> {
    if let Ok(t) = chain_type(key) {
        return Ok(t.index() as u32);
    }
    if !is_antichain(key) {
        return Err(Error::OutOfScope);
    }
    let chains = 1u64 << (key.len() - 1);
    Ok((chains + permutation_rank(&antichain_permutation(key))) as u32)
}
