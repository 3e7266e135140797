//! Order constraints over `0..n`: partial orders, "x precedes one of S"
//! constraints, consistency, topological sorting and exact counting.
//!
//! Counting works on subsets of the ground set encoded as `u64` masks, so
//! ground sets are limited to 64 elements and the exponential routines to the
//! configured [`EnumCaps`].

use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("ground set of size {n} exceeds the cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("element {0} is outside the ground set")]
    OutOfRange(usize),
    #[error("relation {0} < {1} closes a cycle")]
    Cycle(usize, usize),
    #[error("threshold {0} is below 0.8")]
    AlphaTooSmall(f64),
    #[error("thresholded preference relation is cyclic")]
    CycleDetected,
    #[error("no order satisfies the constraints")]
    Infeasible,
    #[error("no order is consistent with the constraints")]
    NoConsistentOrder,
    #[error("constraint on {0} has an empty set or names its own subject")]
    InvalidConstraint(usize),
    #[error("malformed clause {index}: {reason}")]
    MalformedClause { index: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, ConstraintError>;

pub const MAX_GROUND: usize = 64;

/// Size limits for the exponential oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumCaps {
    pub poset: usize,
    pub general: usize,
}

impl Default for EnumCaps {
    fn default() -> Self {
        EnumCaps {
            poset: 18,
            general: 9,
        }
    }
}

impl EnumCaps {
    pub const ENV: &'static str = "SMLAB_ENUM_CAP";

    /// Accepts `N` (both caps) or `poset=N,general=M` (either key optional).
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let mut caps = EnumCaps::default();
        if let Ok(n) = text.parse::<usize>() {
            caps.poset = n;
            caps.general = n;
        } else {
            for part in text.split(',') {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
                let value: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad cap value {value:?}"))?;
                match key.trim() {
                    "poset" => caps.poset = value,
                    "general" => caps.general = value,
                    other => return Err(format!("unknown cap {other:?}")),
                }
            }
        }
        if caps.poset > 26 || caps.general > 26 {
            return Err("caps above 26 would need more than 2^26 table entries".into());
        }
        Ok(caps)
    }

    pub fn from_env() -> std::result::Result<Self, String> {
        match std::env::var(Self::ENV) {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(Self::default()),
        }
    }

    /// Caps from the environment, read once; an unparsable value falls back
    /// to the defaults (front ends validate it separately).
    pub fn current() -> Self {
        static CAPS: OnceLock<EnumCaps> = OnceLock::new();
        *CAPS.get_or_init(|| Self::from_env().unwrap_or_default())
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n > MAX_GROUND {
        Err(ConstraintError::TooLarge { n, cap })
    } else {
        Ok(())
    }
}

fn bit(x: usize) -> u64 {
    1u64 << x
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        bit(n) - 1
    }
}

fn members(mask: u64) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let x = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(x)
        }
    })
}

/// Exact count of orders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExtensionCount(pub BigUint);

impl ExtensionCount {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == BigUint::from(0u8)
    }
}

impl From<u128> for ExtensionCount {
    fn from(v: u128) -> Self {
        ExtensionCount(BigUint::from(v))
    }
}

impl fmt::Display for ExtensionCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A threshold in `[0, 1]` held as an exact fraction. Floats are rounded to
/// nine decimals first so that `0.8` means exactly `4/5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    num: u128,
    den: u128,
}

impl Threshold {
    pub fn new(num: u128, den: u128) -> Self {
        assert!(den > 0 && num <= den, "threshold must lie in [0, 1]");
        Threshold { num, den }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!((0.0..=1.0).contains(&x), "threshold must lie in [0, 1]");
        let den = 1_000_000_000u128;
        let num = (x * den as f64).round() as u128;
        let g = gcd(num, den);
        Threshold::new(num / g, den / g)
    }

    /// `count / total >= self`.
    pub fn reached(&self, count: u128, total: u128) -> bool {
        count * self.den >= self.num * total
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

// ---------------------------------------------------------------------------
// Posets

/// Strict partial order on `0..n`, kept transitively closed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Poset {
    n: usize,
    // below[b] has bit a iff a < b
    below: Vec<u64>,
    above: Vec<u64>,
}

impl Poset {
    pub fn empty(n: usize) -> Self {
        assert!(n <= MAX_GROUND, "posets are limited to {MAX_GROUND} elements");
        Poset {
            n,
            below: vec![0; n],
            above: vec![0; n],
        }
    }

    pub fn new(n: usize, relations: &[(usize, usize)]) -> Result<Self> {
        if n > MAX_GROUND {
            return Err(ConstraintError::TooLarge { n, cap: MAX_GROUND });
        }
        let mut p = Poset::empty(n);
        for &(a, b) in relations {
            p.add(a, b)?;
        }
        Ok(p)
    }

    /// The chain `order[0] < order[1] < ...`.
    pub fn chain(n: usize, order: &[usize]) -> Result<Self> {
        let rel: Vec<_> = order.windows(2).map(|w| (w[0], w[1])).collect();
        Poset::new(n, &rel)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds `a < b` and closes transitively. Returns whether the relation was new.
    pub fn add(&mut self, a: usize, b: usize) -> Result<bool> {
        if a >= self.n {
            return Err(ConstraintError::OutOfRange(a));
        }
        if b >= self.n {
            return Err(ConstraintError::OutOfRange(b));
        }
        if a == b || self.precedes(b, a) {
            return Err(ConstraintError::Cycle(a, b));
        }
        if self.precedes(a, b) {
            return Ok(false);
        }
        let lower = self.below[a] | bit(a);
        let upper = self.above[b] | bit(b);
        for y in members(upper) {
            self.below[y] |= lower;
        }
        for x in members(lower) {
            self.above[x] |= upper;
        }
        Ok(true)
    }

    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.below[b] & bit(a) != 0
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.precedes(a, b) || self.precedes(b, a)
    }

    pub fn below_mask(&self, b: usize) -> u64 {
        self.below[b]
    }

    pub fn above_mask(&self, a: usize) -> u64 {
        self.above[a]
    }

    /// All pairs of the closed relation, sorted.
    pub fn relations(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|a| members(self.above[a]).map(move |b| (a, b)))
            .collect()
    }

    pub fn is_total(&self) -> bool {
        (0..self.n).all(|a| (self.below[a] | self.above[a]).count_ones() as usize + 1 == self.n)
    }

    pub fn is_linear_extension(&self, order: &[usize]) -> bool {
        if !is_permutation(order, self.n) {
            return false;
        }
        let mut seen = 0u64;
        for &x in order {
            if self.below[x] & !seen != 0 {
                return false;
            }
            seen |= bit(x);
        }
        true
    }

    /// Back-to-front sort placing the largest-index maximal element last, so
    /// that free elements come out in ascending order.
    pub fn toposort(&self) -> Vec<usize> {
        let mut remaining = full_mask(self.n);
        let mut out = vec![0; self.n];
        for slot in (0..self.n).rev() {
            let x = members(remaining)
                .filter(|&x| self.above[x] & remaining == 0)
                .last()
                .expect("acyclic");
            out[slot] = x;
            remaining &= !bit(x);
        }
        out
    }
}

pub fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &x in order {
        if x >= n || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// Forward and backward counts over down-sets. `forward[D]` counts orderings
/// of the down-set `D` as a prefix, `backward[D]` the completions after it;
/// both are zero off down-sets.
#[derive(Debug, Clone)]
pub struct DownSetTable {
    n: usize,
    forward: Vec<u128>,
    backward: Vec<u128>,
}

impl DownSetTable {
    pub fn new(poset: &Poset, cap: usize) -> Result<Self> {
        let n = poset.len();
        check_cap(n, cap)?;
        let size = 1usize << n;
        let mut forward = vec![0u128; size];
        forward[0] = 1;
        for mask in 0..size {
            let c = forward[mask];
            if c == 0 {
                continue;
            }
            let m = mask as u64;
            for a in members(full_mask(n) & !m) {
                if poset.below[a] & !m == 0 {
                    forward[mask | (1 << a)] += c;
                }
            }
        }
        let mut backward = vec![0u128; size];
        backward[size - 1] = 1;
        for mask in (0..size - 1).rev() {
            if forward[mask] == 0 {
                continue;
            }
            let m = mask as u64;
            backward[mask] = members(full_mask(n) & !m)
                .filter(|&a| poset.below[a] & !m == 0)
                .map(|a| backward[mask | (1 << a)])
                .sum();
        }
        Ok(DownSetTable {
            n,
            forward,
            backward,
        })
    }

    pub fn total(&self) -> u128 {
        self.forward[self.forward.len() - 1]
    }

    /// Linear extensions of the sub-order induced on `mask` when `mask` is a down-set.
    pub fn prefix_count(&self, mask: u64) -> u128 {
        self.forward[mask as usize]
    }

    /// `counts[a][b]` = number of extensions with `a` before `b`.
    pub fn before_counts(&self, poset: &Poset) -> Vec<Vec<u128>> {
        let n = self.n;
        let mut counts = vec![vec![0u128; n]; n];
        let all = full_mask(n);
        for (mask, &f) in self.forward.iter().enumerate() {
            if f == 0 {
                continue;
            }
            let m = mask as u64;
            for a in members(all & !m) {
                if poset.below[a] & !m != 0 {
                    continue;
                }
                let ways = f * self.backward[mask | (1 << a)];
                if ways == 0 {
                    continue;
                }
                for b in members(all & !m & !bit(a)) {
                    counts[a][b] += ways;
                }
            }
        }
        counts
    }
}

pub fn count_extensions_poset(poset: &Poset) -> Result<ExtensionCount> {
    count_extensions_poset_capped(poset, EnumCaps::current().poset)
}

pub fn count_extensions_poset_capped(poset: &Poset, cap: usize) -> Result<ExtensionCount> {
    Ok(DownSetTable::new(poset, cap)?.total().into())
}

/// Fractions of extensions putting `a` before `b`, for all pairs at once.
#[derive(Debug, Clone)]
pub struct PairFractions {
    total: u128,
    before: Vec<Vec<u128>>,
}

impl PairFractions {
    pub fn new(poset: &Poset) -> Result<Self> {
        Self::with_cap(poset, EnumCaps::current().poset)
    }

    pub fn with_cap(poset: &Poset, cap: usize) -> Result<Self> {
        let table = DownSetTable::new(poset, cap)?;
        Ok(PairFractions {
            total: table.total(),
            before: table.before_counts(poset),
        })
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn before(&self, a: usize, b: usize) -> u128 {
        self.before[a][b]
    }

    pub fn frac(&self, a: usize, b: usize) -> BigRational {
        ratio(self.before[a][b], self.total)
    }

    pub fn frac_f64(&self, a: usize, b: usize) -> f64 {
        self.before[a][b] as f64 / self.total as f64
    }

    pub fn at_least(&self, a: usize, b: usize, t: Threshold) -> bool {
        a != b && t.reached(self.before[a][b], self.total)
    }

    /// Pairs `(a, b)` with `a != b` whose fraction reaches `t`.
    pub fn thresholded(&self, t: Threshold) -> Vec<(usize, usize)> {
        let n = self.before.len();
        (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.at_least(a, b, t))
            .collect()
    }
}

/// Fraction of linear extensions with `a` before `b`; zero when `b < a` is forced.
pub fn pref_frac(poset: &Poset, a: usize, b: usize) -> Result<BigRational> {
    for x in [a, b] {
        if x >= poset.len() {
            return Err(ConstraintError::OutOfRange(x));
        }
    }
    assert_ne!(a, b, "pref_frac needs two distinct elements");
    Ok(PairFractions::new(poset)?.frac(a, b))
}

pub const MIN_ALPHA: f64 = 0.8;

/// Linear extension of the relation "before in at least an `alpha` fraction
/// of extensions".
pub fn representative_order_exact(poset: &Poset, alpha: f64) -> Result<Vec<usize>> {
    representative_order_capped(poset, alpha, EnumCaps::current().poset)
}

pub fn representative_order_capped(poset: &Poset, alpha: f64, cap: usize) -> Result<Vec<usize>> {
    if alpha.is_nan() || alpha < MIN_ALPHA {
        return Err(ConstraintError::AlphaTooSmall(alpha));
    }
    let fr = PairFractions::with_cap(poset, cap)?;
    let s = fr.thresholded(Threshold::from_f64(alpha.min(1.0)));
    let strong = Poset::new(poset.len(), &s).map_err(|_| ConstraintError::CycleDetected)?;
    let pairs: Vec<GeneralConstraint> = s
        .into_iter()
        .map(|(a, b)| GeneralConstraint::new(a, vec![b]))
        .collect::<Result<_>>()?;
    let cs = ConstraintSet::from_constraints(poset.len(), pairs)?;
    let order = generalized_toposort(&cs)?;
    debug_assert!(strong.is_linear_extension(&order));
    Ok(order)
}

// ---------------------------------------------------------------------------
// General constraints

/// `subject` must precede at least one element of `set`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneralConstraint {
    subject: usize,
    set: Vec<usize>,
}

impl GeneralConstraint {
    pub fn new(subject: usize, mut set: Vec<usize>) -> Result<Self> {
        set.sort_unstable();
        set.dedup();
        if set.is_empty() || set.contains(&subject) {
            return Err(ConstraintError::InvalidConstraint(subject));
        }
        Ok(GeneralConstraint { subject, set })
    }

    pub fn subject(&self) -> usize {
        self.subject
    }

    pub fn set(&self) -> &[usize] {
        &self.set
    }

    pub fn mask(&self) -> u64 {
        self.set.iter().fold(0, |m, &x| m | bit(x))
    }

    pub fn holds(&self, position: &[usize]) -> bool {
        self.set.iter().any(|&y| position[self.subject] < position[y])
    }
}

impl fmt::Display for GeneralConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <", self.subject)?;
        for (i, x) in self.set.iter().enumerate() {
            write!(f, "{}{x}", if i == 0 { " {" } else { "," })?;
        }
        f.write_str("}")
    }
}

/// Constraints over the ground set `0..n`, without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintSet {
    n: usize,
    constraints: Vec<GeneralConstraint>,
}

impl ConstraintSet {
    pub fn new(n: usize) -> Self {
        assert!(n <= MAX_GROUND, "ground sets are limited to {MAX_GROUND} elements");
        ConstraintSet {
            n,
            constraints: Vec::new(),
        }
    }

    pub fn from_constraints(n: usize, constraints: Vec<GeneralConstraint>) -> Result<Self> {
        let mut cs = ConstraintSet::new(n);
        for c in constraints {
            cs.push(c)?;
        }
        Ok(cs)
    }

    /// Pairwise constraints `a < b`.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let cs = pairs
            .iter()
            .map(|&(a, b)| GeneralConstraint::new(a, vec![b]))
            .collect::<Result<Vec<_>>>()?;
        Self::from_constraints(n, cs)
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    /// Adds a constraint; returns `false` if it was already present.
    pub fn push(&mut self, c: GeneralConstraint) -> Result<bool> {
        if let Some(&x) = std::iter::once(&c.subject)
            .chain(&c.set)
            .find(|&&x| x >= self.n)
        {
            return Err(ConstraintError::OutOfRange(x));
        }
        if self.constraints.contains(&c) {
            return Ok(false);
        }
        self.constraints.push(c);
        Ok(true)
    }

    pub fn contains(&self, c: &GeneralConstraint) -> bool {
        self.constraints.contains(c)
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GeneralConstraint> {
        self.constraints.iter()
    }

    pub fn is_pairwise(&self) -> bool {
        self.constraints.iter().all(|c| c.set.len() == 1)
    }

    /// The partial order generated by singleton constraints.
    pub fn to_poset(&self) -> Result<Poset> {
        let mut p = Poset::empty(self.n);
        for c in &self.constraints {
            if c.set.len() != 1 {
                return Err(ConstraintError::InvalidConstraint(c.subject));
            }
            p.add(c.subject, c.set[0])?;
        }
        Ok(p)
    }

    /// Per element, the set masks of constraints with that subject.
    fn masks_by_subject(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new(); self.n];
        for c in &self.constraints {
            out[c.subject].push(c.mask());
        }
        out
    }
}

pub fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (i, &x) in order.iter().enumerate() {
        pos[x] = i;
    }
    pos
}

/// Whether the permutation `order` satisfies every constraint.
pub fn is_consistent(order: &[usize], constraints: &ConstraintSet) -> bool {
    assert!(
        is_permutation(order, constraints.n),
        "order must be a permutation of the ground set"
    );
    let pos = positions(order);
    constraints.iter().all(|c| c.holds(&pos))
}

/// Builds an order back to front, each time placing last the largest-index
/// element that is not the subject of a live constraint, then retiring the
/// constraints whose set contains it. Free elements thus come out ascending.
pub fn generalized_toposort(constraints: &ConstraintSet) -> Result<Vec<usize>> {
    let n = constraints.n;
    let mut live_as_subject = vec![0usize; n];
    for c in constraints.iter() {
        live_as_subject[c.subject] += 1;
    }
    let mut retired = vec![false; constraints.len()];
    let mut placed = vec![false; n];
    let mut out = vec![0; n];
    for slot in (0..n).rev() {
        let x = (0..n)
            .rev()
            .find(|&x| !placed[x] && live_as_subject[x] == 0)
            .ok_or(ConstraintError::Infeasible)?;
        placed[x] = true;
        out[slot] = x;
        for (i, c) in constraints.iter().enumerate() {
            if !retired[i] && c.set.binary_search(&x).is_ok() {
                retired[i] = true;
                live_as_subject[c.subject] -= 1;
            }
        }
    }
    Ok(out)
}

/// Prefix-set counts for general constraints: `forward[D]` is the number of
/// valid orderings of `D` as a prefix. Appending `x` after prefix `D` is valid
/// iff no constraint `(x, S)` has `S` inside `D`.
#[derive(Debug, Clone)]
pub struct PrefixTable {
    n: usize,
    masks: Vec<Vec<u64>>,
    forward: Vec<u128>,
    backward: Vec<u128>,
}

impl PrefixTable {
    pub fn new(constraints: &ConstraintSet, cap: usize) -> Result<Self> {
        let n = constraints.n;
        check_cap(n, cap)?;
        let masks = constraints.masks_by_subject();
        let size = 1usize << n;
        let all = full_mask(n);
        let mut forward = vec![0u128; size];
        forward[0] = 1;
        for mask in 0..size {
            let c = forward[mask];
            if c == 0 {
                continue;
            }
            let m = mask as u64;
            for x in members(all & !m) {
                if appendable(&masks[x], m) {
                    forward[mask | (1 << x)] += c;
                }
            }
        }
        let mut backward = vec![0u128; size];
        backward[size - 1] = 1;
        for mask in (0..size - 1).rev() {
            let m = mask as u64;
            backward[mask] = members(all & !m)
                .filter(|&x| appendable(&masks[x], m))
                .map(|x| backward[mask | (1 << x)])
                .sum();
        }
        Ok(PrefixTable {
            n,
            masks,
            forward,
            backward,
        })
    }

    pub fn total(&self) -> u128 {
        self.forward[self.forward.len() - 1]
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn prefix_count(&self, mask: u64) -> u128 {
        self.forward[mask as usize]
    }

    pub fn appendable(&self, x: usize, prefix: u64) -> bool {
        appendable(&self.masks[x], prefix)
    }

    /// Number of consistent orders in which `a` comes after every other
    /// element of `remaining`.
    pub fn last_count(&self, remaining: u64, a: usize) -> u128 {
        let all = full_mask(self.n);
        let required = remaining & !bit(a);
        let free = all & !remaining;
        // iterate over subsets E of the elements outside `remaining`
        let mut total = 0u128;
        let mut e = 0u64;
        loop {
            let d = required | e;
            if self.appendable(a, d) {
                total += self.forward[d as usize] * self.backward[(d | bit(a)) as usize];
            }
            if e == free {
                break;
            }
            e = (e.wrapping_sub(free)) & free;
        }
        total
    }
}

fn appendable(masks: &[u64], prefix: u64) -> bool {
    masks.iter().all(|&s| s & !prefix != 0)
}

pub fn count_consistent_general(constraints: &ConstraintSet) -> Result<ExtensionCount> {
    count_consistent_general_capped(constraints, EnumCaps::current().general)
}

pub fn count_consistent_general_capped(
    constraints: &ConstraintSet,
    cap: usize,
) -> Result<ExtensionCount> {
    Ok(PrefixTable::new(constraints, cap)?.total().into())
}

pub fn mask_of(elements: &[usize]) -> u64 {
    elements.iter().fold(0, |m, &x| m | bit(x))
}

/// Fraction of consistent orders that rank `a` last among `remaining`.
pub fn last_frac(constraints: &ConstraintSet, remaining: &[usize], a: usize) -> Result<BigRational> {
    let table = PrefixTable::new(constraints, EnumCaps::current().general)?;
    for &x in remaining.iter().chain([&a]) {
        if x >= constraints.n {
            return Err(ConstraintError::OutOfRange(x));
        }
    }
    assert!(remaining.contains(&a), "a must belong to the remaining set");
    let total = table.total();
    if total == 0 {
        return Err(ConstraintError::NoConsistentOrder);
    }
    Ok(ratio(table.last_count(mask_of(remaining), a), total))
}

// ---------------------------------------------------------------------------
// Mixed instances and the satisfiability reduction

/// Constraints of two kinds: `precede` = subject before at least one of the
/// set, `follow` = subject after at least one of the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedInstance {
    pub n: usize,
    pub precede: Vec<GeneralConstraint>,
    pub follow: Vec<GeneralConstraint>,
}

impl MixedInstance {
    pub fn holds(&self, order: &[usize]) -> bool {
        let pos = positions(order);
        self.precede.iter().all(|c| c.holds(&pos))
            && self
                .follow
                .iter()
                .all(|c| c.set.iter().any(|&y| pos[y] < pos[c.subject]))
    }
}

/// Whether some permutation satisfies a mixed instance, by reachability over
/// prefix sets.
pub fn decide_mixed_consistent(instance: &MixedInstance) -> Result<bool> {
    decide_mixed_capped(instance, EnumCaps::current().general)
}

pub fn decide_mixed_capped(instance: &MixedInstance, cap: usize) -> Result<bool> {
    let n = instance.n;
    check_cap(n, cap)?;
    let mut pre = vec![Vec::new(); n];
    let mut fol = vec![Vec::new(); n];
    for c in &instance.precede {
        pre[c.subject].push(c.mask());
    }
    for c in &instance.follow {
        fol[c.subject].push(c.mask());
    }
    let size = 1usize << n;
    let all = full_mask(n);
    let mut reach = vec![false; size];
    reach[0] = true;
    for mask in 0..size {
        if !reach[mask] {
            continue;
        }
        let m = mask as u64;
        for x in members(all & !m) {
            if appendable(&pre[x], m) && fol[x].iter().all(|&s| s & m != 0) {
                reach[mask | (1 << x)] = true;
            }
        }
    }
    Ok(reach[size - 1])
}

/// CNF over variables `1..=vars`; literal `k` is `x_k`, `-k` its negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|cl| {
            cl.iter()
                .any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }

    /// Truth-table satisfiability.
    pub fn brute_force_satisfiable(&self) -> bool {
        assert!(self.vars < 32, "truth tables are limited to 31 variables");
        (0u64..1 << self.vars).any(|bits| {
            let assignment: Vec<bool> = (0..self.vars).map(|i| bits >> i & 1 == 1).collect();
            self.satisfied_by(&assignment)
        })
    }
}

/// Element ids used by the reduction.
pub fn literal_element(lit: i32) -> usize {
    let v = lit.unsigned_abs() as usize - 1;
    2 * v + usize::from(lit < 0)
}

/// Maps a CNF to a mixed instance on `2v + 1` elements that has a consistent
/// order iff the formula is satisfiable. Element `2i` is the literal `x_{i+1}`,
/// `2i + 1` its negation and `2v` the separator: literals after the separator
/// read as true.
pub fn reduce_3sat(cnf: &Cnf) -> Result<MixedInstance> {
    let y = 2 * cnf.vars;
    for (index, clause) in cnf.clauses.iter().enumerate() {
        let bad = |reason: &str| ConstraintError::MalformedClause {
            index,
            reason: reason.to_string(),
        };
        if clause.is_empty() {
            return Err(bad("empty clause"));
        }
        if clause.len() > 3 {
            return Err(bad("more than three literals"));
        }
        if let Some(&l) = clause
            .iter()
            .find(|&&l| l == 0 || l.unsigned_abs() as usize > cnf.vars)
        {
            return Err(bad(&format!("literal {l} outside 1..={}", cnf.vars)));
        }
    }
    let follow = (0..cnf.vars)
        .map(|i| GeneralConstraint::new(y, vec![2 * i, 2 * i + 1]))
        .collect::<Result<_>>()?;
    let precede = cnf
        .clauses
        .iter()
        .map(|cl| GeneralConstraint::new(y, cl.iter().map(|&l| literal_element(l)).collect()))
        .collect::<Result<_>>()?;
    Ok(MixedInstance {
        n: y + 1,
        precede,
        follow,
    })
}
