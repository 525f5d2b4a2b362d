//! Exact arithmetic on towers of twos and the Ramsey bounds built from them.
//!
//! `twr(1, x) = x` and `twr(t, x) = 2^twr(t-1, x)`. Values are kept exact
//! while they stay small and otherwise as a tower over an exact top.
//! Comparison works on `[lo, hi]` enclosures and answers `None` when those
//! overlap, so it never reports a wrong inequality.
//!
//! Upper bounds round logarithms of non-powers of two up; lower bounds use
//! floors.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below `2^NORMAL_BITS` a tower collapses to an exact integer.
const NORMAL_BITS: u64 = 256;
/// Exact intermediates larger than this many bits are replaced by a tower bound.
const CAP_BITS: u64 = 1 << 16;

mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A nonnegative integer, possibly far too large to write down.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerValue {
    Exact(#[serde(with = "decimal")] BigUint),
    /// `twr(height, top)`.
    Tower {
        height: u32,
        top: Box<TowerValue>,
    },
    /// `base^exponent`.
    Power {
        base: Box<TowerValue>,
        #[serde(with = "decimal")]
        exponent: BigUint,
    },
}

/// Exact integers and towers over exact tops: the forms comparison works on.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Simple {
    Exact(BigUint),
    /// height >= 2
    Tower(u32, BigUint),
}

fn bits(x: &BigUint) -> u64 {
    x.bits()
}

fn is_pow2(x: &BigUint) -> bool {
    !x.is_zero() && x.count_ones() == 1
}

fn pow2_big(e: u64) -> BigUint {
    BigUint::one() << e
}

impl Simple {
    fn tower(h: u32, top: Simple) -> Simple {
        match (h, top) {
            (1, t) => t,
            (h, Simple::Exact(mut t)) => {
                let mut h = h;
                while h >= 2 && t < BigUint::from(NORMAL_BITS) {
                    t = pow2_big(t.to_u64().expect("small"));
                    h -= 1;
                }
                if h == 1 {
                    Simple::Exact(t)
                } else {
                    Simple::Tower(h, t)
                }
            }
            (h, Simple::Tower(h2, t)) => Simple::Tower(h + h2 - 1, t),
        }
    }

    /// `log2` of a tower of height >= 2, one level down.
    fn lower(h: u32, t: &BigUint) -> Simple {
        if h == 2 {
            Simple::Exact(t.clone())
        } else {
            Simple::Tower(h - 1, t.clone())
        }
    }

    /// Evaluates exactly if the value has at most `max_bits` bits.
    fn eval_within(&self, max_bits: u64) -> Option<BigUint> {
        match self {
            Simple::Exact(x) => (bits(x) <= max_bits).then(|| x.clone()),
            Simple::Tower(h, t) => {
                let e = Simple::lower(*h, t).eval_within(64)?.to_u64()?;
                (e < max_bits).then(|| pow2_big(e))
            }
        }
    }

    fn into_value(self) -> TowerValue {
        match self {
            Simple::Exact(x) => TowerValue::Exact(x),
            Simple::Tower(h, t) => TowerValue::Tower {
                height: h,
                top: Box::new(TowerValue::Exact(t)),
            },
        }
    }
}

fn cmp_exact_tower(x: &BigUint, h: u32, t: &BigUint) -> Ordering {
    if x.is_zero() {
        return Ordering::Less;
    }
    let b = bits(x);
    let y = Simple::lower(h, t);
    if is_pow2(x) {
        simple_cmp(&Simple::Exact(BigUint::from(b - 1)), &y)
    } else {
        match simple_cmp(&Simple::Exact(BigUint::from(b)), &y) {
            Ordering::Greater => Ordering::Greater,
            _ => Ordering::Less,
        }
    }
}

fn simple_cmp(a: &Simple, b: &Simple) -> Ordering {
    match (a, b) {
        (Simple::Exact(x), Simple::Exact(y)) => x.cmp(y),
        (Simple::Exact(x), Simple::Tower(h, t)) => cmp_exact_tower(x, *h, t),
        (Simple::Tower(h, t), Simple::Exact(y)) => cmp_exact_tower(y, *h, t).reverse(),
        (Simple::Tower(h1, t1), Simple::Tower(h2, t2)) => {
            // 2^a vs 2^b compares like a vs b, so strip common levels
            let strip = h1.min(h2) - 1;
            let a = Simple::tower(h1 - strip, Simple::Exact(t1.clone()));
            let b = Simple::tower(h2 - strip, Simple::Exact(t2.clone()));
            simple_cmp(&a, &b)
        }
    }
}

/// `ceil(n * log2(k))`, exact when `k` is a power of two and otherwise
/// rounded up through a slightly enlarged rational approximation.
pub fn ceil_mul_log2(n: &BigUint, k: &BigUint) -> BigUint {
    assert!(!k.is_zero());
    if is_pow2(k) {
        return n * (bits(k) - 1);
    }
    const FRAC: u64 = 40;
    let l = log2_f64(k) * (1.0 + 1e-12) + 1e-12;
    let a = BigUint::from((l * (1u64 << FRAC) as f64).ceil() as u128);
    let num = n * a;
    let den = pow2_big(FRAC);
    (&num + &den - 1u32) / den
}

/// `floor(n * log2(k))` from below.
pub fn floor_mul_log2(n: &BigUint, k: &BigUint) -> BigUint {
    assert!(!k.is_zero());
    if is_pow2(k) {
        return n * (bits(k) - 1);
    }
    const FRAC: u64 = 40;
    let l = (log2_f64(k) * (1.0 - 1e-12) - 1e-12).max(0.0);
    let a = BigUint::from((l * (1u64 << FRAC) as f64).floor() as u128);
    (n * a) >> FRAC
}

fn log2_f64(x: &BigUint) -> f64 {
    let b = bits(x);
    if b <= 1000 {
        x.to_f64().expect("finite").log2()
    } else {
        let shift = b - 60;
        (x >> shift).to_f64().expect("finite").log2() + shift as f64
    }
}

impl TowerValue {
    pub fn exact(n: impl Into<BigUint>) -> Self {
        TowerValue::Exact(n.into())
    }

    /// `twr(height, top)` without normalizing.
    pub fn tower(height: u32, top: TowerValue) -> Self {
        TowerValue::Tower {
            height,
            top: Box::new(top),
        }
    }

    pub fn power(base: TowerValue, exponent: impl Into<BigUint>) -> Self {
        TowerValue::Power {
            base: Box::new(base),
            exponent: exponent.into(),
        }
    }

    pub fn as_exact(&self) -> Option<&BigUint> {
        match self {
            TowerValue::Exact(x) => Some(x),
            _ => None,
        }
    }

    /// Collapses `twr(1, x)` and nested towers, and evaluates whatever
    /// stays below `2^256`. Idempotent.
    pub fn normalized(&self) -> TowerValue {
        match self {
            TowerValue::Exact(_) => self.clone(),
            TowerValue::Tower { height, top } => {
                let top = top.normalized();
                if *height <= 1 {
                    return top;
                }
                match top {
                    TowerValue::Tower { height: h2, top: t2 } => TowerValue::tower(height + h2 - 1, *t2).normalized(),
                    TowerValue::Exact(mut t) => {
                        let mut h = *height;
                        while h >= 2 && t < BigUint::from(NORMAL_BITS) {
                            t = pow2_big(t.to_u64().expect("small"));
                            h -= 1;
                        }
                        if h == 1 {
                            TowerValue::Exact(t)
                        } else {
                            TowerValue::tower(h, TowerValue::Exact(t))
                        }
                    }
                    p => TowerValue::tower(*height, p),
                }
            }
            TowerValue::Power { base, exponent } => {
                let base = base.normalized();
                if exponent.is_zero() {
                    return TowerValue::exact(1u32);
                }
                if exponent.is_one() {
                    return base;
                }
                match &base {
                    TowerValue::Exact(b) => {
                        let e = exponent.to_u64();
                        match e {
                            Some(e) if bits(b).saturating_mul(e) <= NORMAL_BITS => {
                                TowerValue::Exact(num_traits::pow(b.clone(), e as usize))
                            }
                            _ if b <= &BigUint::one() => base.clone(),
                            _ => TowerValue::power(base.clone(), exponent.clone()),
                        }
                    }
                    TowerValue::Tower { height: 2, top } => match top.as_ref() {
                        TowerValue::Exact(t) => TowerValue::tower(2, TowerValue::Exact(t * exponent)).normalized(),
                        _ => TowerValue::power(base.clone(), exponent.clone()),
                    },
                    _ => TowerValue::power(base.clone(), exponent.clone()),
                }
            }
        }
    }

    /// Lower and upper enclosure in simple form.
    fn enclosure(&self) -> (Simple, Simple) {
        match self {
            TowerValue::Exact(x) => (Simple::Exact(x.clone()), Simple::Exact(x.clone())),
            TowerValue::Tower { height, top } => {
                let (lo, hi) = top.enclosure();
                (Simple::tower(*height, lo), Simple::tower(*height, hi))
            }
            TowerValue::Power { base, exponent } => {
                let (lo, hi) = base.enclosure();
                (pow_lo(lo, exponent), pow_hi(hi, exponent))
            }
        }
    }

    /// `Some` ordering when it can be certified, `None` when the enclosures overlap.
    pub fn compare(&self, other: &TowerValue) -> Option<Ordering> {
        let (alo, ahi) = self.enclosure();
        let (blo, bhi) = other.enclosure();
        if simple_cmp(&ahi, &blo) == Ordering::Less {
            return Some(Ordering::Less);
        }
        if simple_cmp(&alo, &bhi) == Ordering::Greater {
            return Some(Ordering::Greater);
        }
        if alo == ahi && blo == bhi {
            return Some(simple_cmp(&alo, &blo));
        }
        None
    }

    /// Certified `self <= other`.
    pub fn le(&self, other: &TowerValue) -> bool {
        let (_, ahi) = self.enclosure();
        let (blo, _) = other.enclosure();
        simple_cmp(&ahi, &blo) != Ordering::Greater
    }

    /// Tower height of the normal form (1 for exact values).
    pub fn height(&self) -> u32 {
        match self.normalized() {
            TowerValue::Tower { height, .. } => height,
            TowerValue::Power { base, .. } => base.height(),
            TowerValue::Exact(_) => 1,
        }
    }
}

fn pow_lo(b: Simple, e: &BigUint) -> Simple {
    if e.is_zero() {
        return Simple::Exact(BigUint::one());
    }
    match b {
        Simple::Exact(x) => {
            if x <= BigUint::one() {
                return Simple::Exact(x);
            }
            match e.to_u64() {
                Some(e64) if bits(&x).saturating_mul(e64) <= CAP_BITS => {
                    Simple::Exact(num_traits::pow(x, e64 as usize))
                }
                _ => Simple::tower(2, Simple::Exact((bits(&x) - 1) * e)),
            }
        }
        Simple::Tower(2, t) => Simple::Tower(2, t * e),
        t => t,
    }
}

fn pow_hi(b: Simple, e: &BigUint) -> Simple {
    if e.is_zero() {
        return Simple::Exact(BigUint::one());
    }
    match b {
        Simple::Exact(x) => {
            if x <= BigUint::one() {
                return Simple::Exact(x);
            }
            match e.to_u64() {
                Some(e64) if bits(&x).saturating_mul(e64) <= CAP_BITS => {
                    Simple::Exact(num_traits::pow(x, e64 as usize))
                }
                _ => Simple::Tower(2, bits(&x) * e),
            }
        }
        Simple::Tower(2, t) => Simple::Tower(2, t * e),
        // twr(h,t)^e <= twr(h, t + log e) once h >= 3
        Simple::Tower(h, t) => Simple::Tower(h, t + bits(e)),
    }
}

impl fmt::Display for TowerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TowerValue::Exact(x) => write!(f, "{x}"),
            TowerValue::Tower { height, top } => write!(f, "twr_{height}({top})"),
            TowerValue::Power { base, exponent } => write!(f, "({base})^{exponent}"),
        }
    }
}

/// Upper-bound arithmetic on simple forms.
mod ub {
    use super::*;

    pub fn cap(x: BigUint) -> Simple {
        if bits(&x) > CAP_BITS {
            Simple::Tower(2, BigUint::from(bits(&x)))
        } else {
            Simple::Exact(x)
        }
    }

    pub fn mul(v: Simple, c: &BigUint) -> Simple {
        match v {
            Simple::Exact(x) => cap(x * c),
            // twr(h,t)*c <= twr(h, t + log c) for h >= 2
            Simple::Tower(h, t) => Simple::Tower(h, t + bits(c)),
        }
    }

    pub fn pow(v: Simple, e: u64) -> Simple {
        pow_hi(v, &BigUint::from(e))
    }

    pub fn pow2(e: Simple) -> Simple {
        match e {
            Simple::Exact(x) => match x.to_u64() {
                Some(s) if s <= CAP_BITS => Simple::Exact(pow2_big(s)),
                _ => Simple::Tower(2, x),
            },
            Simple::Tower(h, t) => Simple::Tower(h + 1, t),
        }
    }

    /// `k^n`.
    pub fn pow_k(k: &BigUint, n: Simple) -> Simple {
        if k.is_one() {
            return Simple::Exact(BigUint::one());
        }
        match n {
            Simple::Exact(n) => match n.to_u64() {
                Some(n64) if bits(k).saturating_mul(n64) <= CAP_BITS => {
                    Simple::Exact(num_traits::pow(k.clone(), n64 as usize))
                }
                _ => pow2(Simple::Exact(ceil_mul_log2(&n, k))),
            },
            n => {
                let lk = ceil_mul_log2(&BigUint::one(), k);
                pow2(mul(n, &lk))
            }
        }
    }
}

/// Lower bound on `v - s` for a simple value.
fn sub_lb(v: Simple, s: &BigUint) -> Option<Simple> {
    if let Some(x) = v.eval_within(CAP_BITS) {
        return (x >= *s).then(|| Simple::Exact(x - s));
    }
    match v {
        Simple::Exact(x) => (x >= *s).then(|| Simple::Exact(x - s)),
        Simple::Tower(h, t) => {
            // v is huge, so v - s >= v/2 = 2^(log v - 1)
            let below = sub_lb(Simple::lower(h, &t), &BigUint::one())?;
            Some(ub::pow2(below))
        }
    }
}

fn to_u32(x: &BigUint) -> Result<u32> {
    x.to_u32().ok_or_else(|| Error::domain("tower height out of range"))
}

/// `twr(t, x)`, normalized.
pub fn twr(t: u32, x: TowerValue) -> Result<TowerValue> {
    if t == 0 {
        return Err(Error::domain("tower height must be at least 1"));
    }
    Ok(TowerValue::tower(t, x).normalized())
}

/// `log_(t)(x)` with floored base-2 logarithms.
pub fn log_iter(t: u32, x: &TowerValue) -> Result<TowerValue> {
    let mut v = x.normalized();
    for _ in 0..t {
        v = match v {
            TowerValue::Exact(x) => {
                if x.is_zero() {
                    return Err(Error::domain("logarithm of zero"));
                }
                TowerValue::exact(bits(&x) - 1)
            }
            TowerValue::Tower { height, top } => TowerValue::tower(height - 1, *top).normalized(),
            TowerValue::Power { .. } => return Err(Error::domain("logarithm of a power form")),
        };
    }
    Ok(v)
}

/// `min { t : log_(t)(x) <= 1 }` with real logarithms.
pub fn log_star(x: &TowerValue) -> Result<u64> {
    match x.normalized() {
        TowerValue::Exact(v) => {
            if v.is_zero() {
                return Err(Error::domain("log* of zero"));
            }
            if v.is_one() {
                return Ok(0);
            }
            let mut r = if is_pow2(&v) {
                (bits(&v) - 1) as f64
            } else {
                log2_f64(&v)
            };
            let mut count = 1;
            while r > 1.0 {
                r = r.log2();
                count += 1;
            }
            Ok(count)
        }
        TowerValue::Tower { height, top } => Ok((height - 1) as u64 + log_star(&top)?),
        TowerValue::Power { .. } => Err(Error::domain("log* of a power form")),
    }
}

/// Which pair types a pair bound covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScope {
    All,
    Left,
    Right,
    Incomparable,
}

fn big(x: u64) -> BigUint {
    BigUint::from(x)
}

/// Host depth sufficient for a depth-`d` monochromatic subtree in any `k`-coloring of pairs of the given scope.
pub fn bound_pairs(d: u64, k: u64, scope: PairScope) -> Result<TowerValue> {
    if d < 1 || k < 1 {
        return Err(Error::domain("pair bounds need d >= 1 and k >= 1"));
    }
    let star = log_star(&TowerValue::exact(4 * k))?;
    let base = 3 * d * k + star;
    Ok(match scope {
        PairScope::Left | PairScope::Right => {
            TowerValue::tower(2, TowerValue::Exact(ceil_mul_log2(&big(d * k), &big(2 * k))))
        }
        PairScope::Incomparable => TowerValue::tower(to_u32(&big(base + 3))?, TowerValue::exact(1u32)),
        PairScope::All => {
            let e = ceil_mul_log2(&big(5 * k * k), &big(k.max(2)));
            TowerValue::power(TowerValue::tower(to_u32(&big(base + 4))?, TowerValue::exact(1u32)), e)
        }
    })
}

fn chain_domain(d: u64, m: u32, k: u64) -> Result<()> {
    if m < 2 || d < m as u64 || k < 2 {
        return Err(Error::domain("chain bounds need m >= 2, d >= m, k >= 2"));
    }
    Ok(())
}

/// Closed-form bound for m-chains: `twr(m, 5 * 2^(m-2) * d * K * log k)` with
/// `K = k^(2^(m-1))`, or `K = k` when only one chain type is colored.
pub fn bound_chains(d: u64, m: u32, k: u64, single_type: bool) -> Result<TowerValue> {
    chain_domain(d, m, k)?;
    let kk = if single_type {
        big(k)
    } else {
        num_traits::pow(big(k), 1usize << (m - 1))
    };
    let n = (big(5) << (m - 2)) * d * kk;
    Ok(TowerValue::tower(m, TowerValue::Exact(ceil_mul_log2(&n, &big(k)))))
}

/// Upper bound from unfolding `R(d,1,k) = dk`, `R(d,m,k) = k^(2 R(d,m-1,k^2)^(m-1))`.
pub fn bound_chains_recursive(d: u64, m: u32, k: u64) -> Result<TowerValue> {
    if m < 1 || d < 1 || k < 1 {
        return Err(Error::domain("recursive chain bound needs m, d, k >= 1"));
    }
    Ok(recursive(d, m, &big(k)).into_value().normalized())
}

fn recursive(d: u64, m: u32, k: &BigUint) -> Simple {
    if m == 1 {
        return ub::cap(k * d);
    }
    let inner = recursive(d, m - 1, &(k * k));
    let e = ub::mul(ub::pow(inner, (m - 1) as u64), &big(2));
    ub::pow_k(k, e)
}

/// The excess in `c_i = 4 + excess / unit` from the chain-bound envelope,
/// with `excess` rounded up and `unit` rounded down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub excess: BigUint,
    pub unit: BigUint,
}

impl Envelope {
    /// Certified `c_i <= c`.
    pub fn at_most(&self, c: u64) -> bool {
        c >= 4 && self.excess <= &self.unit * (c - 4)
    }

    pub fn approx(&self) -> f64 {
        4.0 + log2_ratio(&self.excess, &self.unit).exp2()
    }
}

fn log2_ratio(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return f64::NEG_INFINITY;
    }
    log2_f64(a) - log2_f64(b)
}

/// `ceil(log_(t)(x))` for real `x >= 1`, given `ceil(x)`.
fn ceil_log_iter(t: u32, x: &BigUint) -> BigUint {
    let mut v = x.clone();
    for _ in 0..t {
        if v <= BigUint::one() {
            // log of something <= 1 is <= 0; max{1, .} absorbs it
            return BigUint::zero();
        }
        let b = bits(&v);
        v = if is_pow2(&v) { big(b - 1) } else { big(b) };
    }
    v
}

/// `c_i = 4 + sum_{j=3..i} max{1, log_(j-2)(2 * 2^(m-j) * j * log k)} / (2^(m-2) * R * log k)`
/// with `R = d * k^(2^(m-1))`.
pub fn envelope_c(i: u32, m: u32, d: u64, k: u64) -> Result<Envelope> {
    chain_domain(d, m, k)?;
    if i < 2 || i > m {
        return Err(Error::domain("envelope index must lie in 2..=m"));
    }
    let mut excess = BigUint::zero();
    for j in 3..=i {
        let x = ceil_mul_log2(&((big(2) << (m - j)) * j), &big(k));
        excess += ceil_log_iter(j - 2, &x).max(BigUint::one());
    }
    let r = num_traits::pow(big(k), 1usize << (m - 1)) * d;
    let unit = floor_mul_log2(&((r) << (m - 2)), &big(k));
    Ok(Envelope { excess, unit })
}

/// `C(d, 1 + q) * 2^(d * 2^q)` with `q = floor(d / (5 k log k))`.
pub fn alpha(d: u64, k: u64) -> Result<TowerValue> {
    if d < 1 || k < 2 {
        return Err(Error::domain("alpha needs d >= 1 and k >= 2"));
    }
    let q = (d as f64 / (5.0 * k as f64 * (k as f64).log2())).floor() as u64;
    let choose = binomial(big(d), big(1 + q));
    if q >= 40 {
        return Err(Error::domain("alpha exponent out of range"));
    }
    let e = d << q;
    let v = if e <= CAP_BITS {
        TowerValue::Exact(choose << e)
    } else {
        TowerValue::tower(2, TowerValue::exact(e + bits(&choose)))
    };
    Ok(v.normalized())
}

/// `C(n, d+1) * 2^(n * 2^d)`, the stated ceiling on level-aligned subtree counts.
pub fn subtree_count_bound(n: u64, d: u64) -> Result<BigUint> {
    if d > n {
        return Err(Error::domain("need d <= n"));
    }
    Ok(binomial(big(n), big(d + 1)) << (n << d))
}

/// `C(n+1, d+1) * 2^(n * 2^d)`: the count of level choices uses all `n+1` host levels.
pub fn subtree_count_bound_levels(n: u64, d: u64) -> Result<BigUint> {
    if d > n {
        return Err(Error::domain("need d <= n"));
    }
    Ok(binomial(big(n + 1), big(d + 1)) << (n << d))
}

/// `35 * 2^m * m * log m` with `log m := log2 max(m, 2)`, rounded up.
pub fn privacy_exponent(m: u64) -> BigUint {
    ceil_mul_log2(&((big(35) << m) * m), &big(m.max(2)))
}

/// `log2` of the chain-coloring denominator `5 * 2^m * K^(2^(m+1)) * log K`
/// with `K = (100m+1)^(m+1)` colors.
pub fn chain_color_denominator_log2(m: u64) -> f64 {
    let c = (100 * m + 1) as f64;
    5f64.log2()
        + m as f64
        + c.log2() * (m + 1) as f64 * 2f64.powi(m as i32 + 1)
        + ((m + 1) as f64).log2()
        + c.log2().log2()
}

/// `log_(m+1)(n) / 2^(35 * 2^m * m log m)`: exact when representable, otherwise a lower bound.
pub fn privacy_depth_guarantee(n: &TowerValue, m: u64) -> Result<TowerValue> {
    if m < 1 {
        return Err(Error::domain("need m >= 1"));
    }
    let l = log_iter(to_u32(&big(m + 1))?, n)?;
    let d = privacy_exponent(m);
    let (lo, _) = l.enclosure();
    let out = match lo {
        Simple::Exact(x) => Simple::Exact(x >> d.to_u64().expect("small exponent")),
        Simple::Tower(h, t) => match sub_lb(Simple::lower(h, &t), &d) {
            Some(e) => ub::pow2(e),
            None => Simple::Exact(BigUint::zero()),
        },
    };
    Ok(out.into_value().normalized())
}
