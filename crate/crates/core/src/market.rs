//! Two-sided markets, matchings and pairwise stability.
//!
//! Agents are addressed by `(side, index)`. Preference lists hold indices of
//! the opposite side, most preferred first; an index missing from a list is
//! unacceptable to the owner. Quotas bound the number of partners per agent.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Worker,
    Firm,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Worker => Side::Firm,
            Side::Firm => Side::Worker,
        }
    }

    pub fn tag(self) -> char {
        match self {
            Side::Worker => 'W',
            Side::Firm => 'F',
        }
    }
}

/// An agent on one side of the market. Orders workers before firms, then by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub const fn worker(index: usize) -> Self {
        AgentId { side: Side::Worker, index }
    }

    pub const fn firm(index: usize) -> Self {
        AgentId { side: Side::Firm, index }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Worker => write!(f, "w{}", self.index),
            Side::Firm => write!(f, "f{}", self.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("agent {0} is out of range")]
    UnknownAgent(AgentId),
    #[error("matching exceeds the quota of {agent}")]
    QuotaViolation { agent: AgentId },
    #[error("quota {quota} of {agent} is outside 1..={max}")]
    InvalidQuota {
        agent: AgentId,
        quota: usize,
        max: usize,
    },
    #[error("preference list of {agent} names {other} more than once")]
    DuplicatePreference { agent: AgentId, other: usize },
    #[error("preference list of {agent} names unknown index {other}")]
    UnknownPreference { agent: AgentId, other: usize },
    #[error("{side:?} side has {got} entries, expected {expected}")]
    ShapeMismatch {
        side: Side,
        expected: usize,
        got: usize,
    },
    #[error("matching is not perfect: {agent} holds {held} of {quota} partners")]
    NotPerfect {
        agent: AgentId,
        held: usize,
        quota: usize,
    },
    #[error("phantom pair (w{worker}, f{firm}) blocks the completed matching")]
    PhantomBlock { worker: usize, firm: usize },
    #[error("market does not have full preference lists")]
    NotFull,
    #[error("market is not one-to-one")]
    NotOneToOne,
}

/// Strict ranking over a subset of the opposite side, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PreferenceOrder {
    ranked: Vec<usize>,
}

impl PreferenceOrder {
    /// Panics on duplicates; use [`Market::new`] for validated construction.
    pub fn new(ranked: Vec<usize>) -> Self {
        let mut seen = BTreeSet::new();
        for &x in &ranked {
            assert!(seen.insert(x), "duplicate entry {x} in preference order");
        }
        PreferenceOrder { ranked }
    }

    pub fn ranked(&self) -> &[usize] {
        &self.ranked
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn position(&self, x: usize) -> Option<usize> {
        self.ranked.iter().position(|&y| y == x)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.ranked
    }
}

impl From<Vec<usize>> for PreferenceOrder {
    fn from(ranked: Vec<usize>) -> Self {
        PreferenceOrder::new(ranked)
    }
}

/// A two-sided market with quotas and (possibly partial) strict preferences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Market {
    worker_quotas: Vec<usize>,
    firm_quotas: Vec<usize>,
    worker_prefs: Vec<PreferenceOrder>,
    firm_prefs: Vec<PreferenceOrder>,
    // rank tables: rank[a][b] = position of b in a's list
    worker_rank: Vec<Vec<Option<usize>>>,
    firm_rank: Vec<Vec<Option<usize>>>,
}

fn rank_table(
    side: Side,
    prefs: &[Vec<usize>],
    n_opposite: usize,
) -> Result<Vec<Vec<Option<usize>>>, MarketError> {
    prefs
        .iter()
        .enumerate()
        .map(|(i, list)| {
            let agent = AgentId { side, index: i };
            let mut ranks = vec![None; n_opposite];
            for (pos, &other) in list.iter().enumerate() {
                if other >= n_opposite {
                    return Err(MarketError::UnknownPreference { agent, other });
                }
                if ranks[other].is_some() {
                    return Err(MarketError::DuplicatePreference { agent, other });
                }
                ranks[other] = Some(pos);
            }
            Ok(ranks)
        })
        .collect()
}

impl Market {
    pub fn new(
        worker_quotas: Vec<usize>,
        firm_quotas: Vec<usize>,
        worker_prefs: Vec<Vec<usize>>,
        firm_prefs: Vec<Vec<usize>>,
    ) -> Result<Self, MarketError> {
        let n_w = worker_quotas.len();
        let n_f = firm_quotas.len();
        for (side, expected, got) in [
            (Side::Worker, n_w, worker_prefs.len()),
            (Side::Firm, n_f, firm_prefs.len()),
        ] {
            if expected != got {
                return Err(MarketError::ShapeMismatch {
                    side,
                    expected,
                    got,
                });
            }
        }
        for (side, quotas, max) in [
            (Side::Worker, &worker_quotas, n_f),
            (Side::Firm, &firm_quotas, n_w),
        ] {
            for (index, &quota) in quotas.iter().enumerate() {
                if quota == 0 || quota > max {
                    return Err(MarketError::InvalidQuota {
                        agent: AgentId { side, index },
                        quota,
                        max,
                    });
                }
            }
        }
        let worker_rank = rank_table(Side::Worker, &worker_prefs, n_f)?;
        let firm_rank = rank_table(Side::Firm, &firm_prefs, n_w)?;
        Ok(Market {
            worker_quotas,
            firm_quotas,
            worker_prefs: worker_prefs
                .into_iter()
                .map(|ranked| PreferenceOrder { ranked })
                .collect(),
            firm_prefs: firm_prefs
                .into_iter()
                .map(|ranked| PreferenceOrder { ranked })
                .collect(),
            worker_rank,
            firm_rank,
        })
    }

    /// All quotas 1.
    pub fn one_to_one(
        worker_prefs: Vec<Vec<usize>>,
        firm_prefs: Vec<Vec<usize>>,
    ) -> Result<Self, MarketError> {
        Market::new(
            vec![1; worker_prefs.len()],
            vec![1; firm_prefs.len()],
            worker_prefs,
            firm_prefs,
        )
    }

    pub fn n_workers(&self) -> usize {
        self.worker_quotas.len()
    }

    pub fn n_firms(&self) -> usize {
        self.firm_quotas.len()
    }

    pub fn population(&self, side: Side) -> usize {
        match side {
            Side::Worker => self.n_workers(),
            Side::Firm => self.n_firms(),
        }
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        agent.index < self.population(agent.side)
    }

    pub fn quota(&self, agent: AgentId) -> usize {
        match agent.side {
            Side::Worker => self.worker_quotas[agent.index],
            Side::Firm => self.firm_quotas[agent.index],
        }
    }

    pub fn quotas(&self, side: Side) -> &[usize] {
        match side {
            Side::Worker => &self.worker_quotas,
            Side::Firm => &self.firm_quotas,
        }
    }

    pub fn prefs(&self, agent: AgentId) -> &PreferenceOrder {
        match agent.side {
            Side::Worker => &self.worker_prefs[agent.index],
            Side::Firm => &self.firm_prefs[agent.index],
        }
    }

    /// Position of `other` (an opposite-side index) in `agent`'s list.
    pub fn rank(&self, agent: AgentId, other: usize) -> Option<usize> {
        match agent.side {
            Side::Worker => self.worker_rank[agent.index][other],
            Side::Firm => self.firm_rank[agent.index][other],
        }
    }

    pub fn acceptable(&self, agent: AgentId, other: usize) -> bool {
        self.rank(agent, other).is_some()
    }

    /// True iff `agent` ranks `a` strictly above `b`. Unacceptable agents rank
    /// below every acceptable one.
    pub fn prefers(&self, agent: AgentId, a: usize, b: usize) -> bool {
        match (self.rank(agent, a), self.rank(agent, b)) {
            (Some(ra), Some(rb)) => ra < rb,
            (Some(_), None) => true,
            _ => false,
        }
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.n_workers())
            .map(AgentId::worker)
            .chain((0..self.n_firms()).map(AgentId::firm))
    }

    pub fn is_one_to_one(&self) -> bool {
        self.worker_quotas.iter().chain(&self.firm_quotas).all(|&q| q == 1)
    }

    /// Complete lists everywhere and balanced total quota.
    pub fn is_full(&self) -> bool {
        let complete = self.worker_prefs.iter().all(|p| p.len() == self.n_firms())
            && self.firm_prefs.iter().all(|p| p.len() == self.n_workers());
        let balanced =
            self.worker_quotas.iter().sum::<usize>() == self.firm_quotas.iter().sum::<usize>();
        complete && balanced
    }

    pub fn total_quota(&self, side: Side) -> usize {
        self.quotas(side).iter().sum()
    }
}

/// A set of `(worker, firm)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Matching {
    pairs: BTreeSet<(usize, usize)>,
}

impl Matching {
    pub fn new() -> Self {
        Matching::default()
    }

    pub fn insert(&mut self, worker: usize, firm: usize) -> bool {
        self.pairs.insert((worker, firm))
    }

    pub fn remove(&mut self, worker: usize, firm: usize) -> bool {
        self.pairs.remove(&(worker, firm))
    }

    pub fn contains(&self, worker: usize, firm: usize) -> bool {
        self.pairs.contains(&(worker, firm))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Partners of `agent`, ascending.
    pub fn partners(&self, agent: AgentId) -> Vec<usize> {
        match agent.side {
            Side::Worker => self
                .pairs
                .range((agent.index, 0)..(agent.index + 1, 0))
                .map(|&(_, f)| f)
                .collect(),
            Side::Firm => self
                .pairs
                .iter()
                .filter(|&&(_, f)| f == agent.index)
                .map(|&(w, _)| w)
                .collect(),
        }
    }

    pub fn partner_lists(&self, n_workers: usize, n_firms: usize) -> Partners {
        let mut workers = vec![Vec::new(); n_workers];
        let mut firms = vec![Vec::new(); n_firms];
        for &(w, f) in &self.pairs {
            if w < n_workers && f < n_firms {
                workers[w].push(f);
                firms[f].push(w);
            }
        }
        Partners { workers, firms }
    }
}

impl FromIterator<(usize, usize)> for Matching {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Matching {
            pairs: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (w, firm)) in self.pairs().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "({w},{firm})")?;
        }
        f.write_str("]")
    }
}

/// Per-agent partner lists of a matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partners {
    pub workers: Vec<Vec<usize>>,
    pub firms: Vec<Vec<usize>>,
}

impl Partners {
    pub fn of(&self, agent: AgentId) -> &[usize] {
        match agent.side {
            Side::Worker => &self.workers[agent.index],
            Side::Firm => &self.firms[agent.index],
        }
    }
}

/// The environment's answer to a proposed matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryResponse {
    Stable,
    Blocking { worker: usize, firm: usize },
    IndividuallyBlocking(AgentId),
}

impl fmt::Display for QueryResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            QueryResponse::Stable => f.write_str("stable"),
            QueryResponse::Blocking { worker, firm } => write!(f, "block {worker} {firm}"),
            QueryResponse::IndividuallyBlocking(a) => {
                write!(f, "iblock {} {}", a.side.tag(), a.index)
            }
        }
    }
}

/// Checks ranges and quotas, returning the partner lists.
pub fn validate_matching(market: &Market, matching: &Matching) -> Result<Partners, MarketError> {
    for (w, f) in matching.pairs() {
        if w >= market.n_workers() {
            return Err(MarketError::UnknownAgent(AgentId::worker(w)));
        }
        if f >= market.n_firms() {
            return Err(MarketError::UnknownAgent(AgentId::firm(f)));
        }
    }
    let partners = matching.partner_lists(market.n_workers(), market.n_firms());
    for agent in market.agents() {
        if partners.of(agent).len() > market.quota(agent) {
            return Err(MarketError::QuotaViolation { agent });
        }
    }
    Ok(partners)
}

/// True iff `agent` has a free slot or ranks `other` above some current partner.
fn wants(market: &Market, agent: AgentId, other: usize, partners: &[usize]) -> bool {
    partners.len() < market.quota(agent)
        || partners.iter().any(|&p| market.prefers(agent, other, p))
}

/// All blocking pairs, sorted by `(worker, firm)`.
pub fn find_blocking_pairs(
    market: &Market,
    matching: &Matching,
) -> Result<Vec<(usize, usize)>, MarketError> {
    let partners = validate_matching(market, matching)?;
    Ok(blocking_pairs_unchecked(market, matching, &partners))
}

pub(crate) fn blocking_pairs_unchecked(
    market: &Market,
    matching: &Matching,
    partners: &Partners,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for w in 0..market.n_workers() {
        let worker = AgentId::worker(w);
        for f in 0..market.n_firms() {
            let firm = AgentId::firm(f);
            if matching.contains(w, f)
                || !market.acceptable(worker, f)
                || !market.acceptable(firm, w)
            {
                continue;
            }
            if wants(market, firm, w, &partners.firms[f])
                && wants(market, worker, f, &partners.workers[w])
            {
                out.push((w, f));
            }
        }
    }
    out
}

/// Agents matched to at least one partner missing from their list.
pub fn individually_blocking_agents(
    market: &Market,
    matching: &Matching,
) -> Result<Vec<AgentId>, MarketError> {
    let partners = validate_matching(market, matching)?;
    Ok(individually_blocking_unchecked(market, &partners))
}

fn individually_blocking_unchecked(market: &Market, partners: &Partners) -> Vec<AgentId> {
    market
        .agents()
        .filter(|&a| partners.of(a).iter().any(|&p| !market.acceptable(a, p)))
        .collect()
}

pub fn is_stable(market: &Market, matching: &Matching) -> Result<bool, MarketError> {
    let partners = validate_matching(market, matching)?;
    Ok(individually_blocking_unchecked(market, &partners).is_empty()
        && blocking_pairs_unchecked(market, matching, &partners).is_empty())
}

/// Every agent holds exactly its quota.
pub fn is_perfect(market: &Market, matching: &Matching) -> Result<bool, MarketError> {
    let partners = validate_matching(market, matching)?;
    Ok(market
        .agents()
        .all(|a| partners.of(a).len() == market.quota(a)))
}

pub(crate) fn require_perfect(market: &Market, matching: &Matching) -> Result<Partners, MarketError> {
    let partners = validate_matching(market, matching)?;
    for agent in market.agents() {
        let held = partners.of(agent).len();
        let quota = market.quota(agent);
        if held != quota {
            return Err(MarketError::NotPerfect { agent, held, quota });
        }
    }
    Ok(partners)
}

/// Every quota-respecting matching of the market, by backtracking over the
/// `n_workers * n_firms` candidate pairs. Exponential; meant for tiny markets.
pub fn all_matchings(market: &Market) -> Vec<Matching> {
    let n_w = market.n_workers();
    let n_f = market.n_firms();
    let mut load_w = vec![0usize; n_w];
    let mut load_f = vec![0usize; n_f];
    let mut current = Vec::new();
    let mut out = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn go(
        k: usize,
        n_f: usize,
        total: usize,
        market: &Market,
        load_w: &mut [usize],
        load_f: &mut [usize],
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Matching>,
    ) {
        if k == total {
            out.push(current.iter().copied().collect());
            return;
        }
        let (w, f) = (k / n_f, k % n_f);
        go(k + 1, n_f, total, market, load_w, load_f, current, out);
        if load_w[w] < market.quota(AgentId::worker(w)) && load_f[f] < market.quota(AgentId::firm(f)) {
            load_w[w] += 1;
            load_f[f] += 1;
            current.push((w, f));
            go(k + 1, n_f, total, market, load_w, load_f, current, out);
            current.pop();
            load_w[w] -= 1;
            load_f[f] -= 1;
        }
    }

    go(
        0,
        n_f,
        n_w * n_f,
        market,
        &mut load_w,
        &mut load_f,
        &mut current,
        &mut out,
    );
    out
}

/// Every stable matching, by brute force over [`all_matchings`].
pub fn all_stable_matchings(market: &Market) -> Vec<Matching> {
    all_matchings(market)
        .into_iter()
        .filter(|m| is_stable(market, m).unwrap_or(false))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identical(n: usize) -> Market {
        let list: Vec<usize> = (0..n).collect();
        Market::one_to_one(vec![list.clone(); n], vec![list; n]).unwrap()
    }

    /// Definitional check of the three blocking conditions, written against
    /// raw lists rather than rank tables.
    fn brute_blocks(market: &Market, m: &Matching, w: usize, f: usize) -> bool {
        let wl = market.prefs(AgentId::worker(w)).ranked();
        let fl = market.prefs(AgentId::firm(f)).ranked();
        let pos = |l: &[usize], x: usize| l.iter().position(|&y| y == x);
        if m.contains(w, f) || pos(wl, f).is_none() || pos(fl, w).is_none() {
            return false;
        }
        let pf = m.partners(AgentId::firm(f));
        let pw = m.partners(AgentId::worker(w));
        let firm_ok = pf.len() < market.quota(AgentId::firm(f))
            || pf
                .iter()
                .any(|&x| pos(fl, x).is_none_or(|r| r > pos(fl, w).unwrap()));
        let worker_ok = pw.len() < market.quota(AgentId::worker(w))
            || pw
                .iter()
                .any(|&x| pos(wl, x).is_none_or(|r| r > pos(wl, f).unwrap()));
        firm_ok && worker_ok
    }

    #[test]
    fn single_pair_unmatched_blocks() {
        let m = Market::one_to_one(vec![vec![0]], vec![vec![0]]).unwrap();
        assert_eq!(find_blocking_pairs(&m, &Matching::new()).unwrap(), vec![(0, 0)]);
        let matched: Matching = [(0, 0)].into_iter().collect();
        assert!(find_blocking_pairs(&m, &matched).unwrap().is_empty());
    }

    #[test]
    fn anti_diagonal_blocking_set_matches_brute_force() {
        let market = identical(3);
        let m: Matching = [(0, 2), (1, 1), (2, 0)].into_iter().collect();
        let expected: Vec<(usize, usize)> = (0..3)
            .flat_map(|w| (0..3).map(move |f| (w, f)))
            .filter(|&(w, f)| brute_blocks(&market, &m, w, f))
            .collect();
        // frozen from the brute-force scan above
        assert_eq!(expected, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(find_blocking_pairs(&market, &m).unwrap(), expected);
    }

    #[test]
    fn empty_market_is_stable() {
        let m = Market::new(vec![], vec![], vec![], vec![]).unwrap();
        assert!(is_stable(&m, &Matching::new()).unwrap());
    }

    #[test]
    fn quota_and_range_errors() {
        let market = identical(2);
        let over: Matching = [(0, 0), (0, 1)].into_iter().collect();
        assert_eq!(
            find_blocking_pairs(&market, &over),
            Err(MarketError::QuotaViolation {
                agent: AgentId::worker(0)
            })
        );
        let oob: Matching = [(0, 5)].into_iter().collect();
        assert_eq!(
            is_stable(&market, &oob),
            Err(MarketError::UnknownAgent(AgentId::firm(5)))
        );
    }

    #[test]
    fn individually_blocking_empty_list() {
        let m = Market::one_to_one(vec![vec![]], vec![vec![0]]).unwrap();
        let matched: Matching = [(0, 0)].into_iter().collect();
        assert_eq!(
            individually_blocking_agents(&m, &matched).unwrap(),
            vec![AgentId::worker(0)]
        );
        assert!(!is_stable(&m, &matched).unwrap());
        let full = identical(3);
        let any: Matching = [(0, 1), (2, 2)].into_iter().collect();
        assert!(individually_blocking_agents(&full, &any).unwrap().is_empty());
    }

    #[test]
    fn serial_dictatorship_is_unique_stable() {
        // women (firms) share the order w0 > w1 > w2 > w3; men are workers
        let worker_prefs = vec![vec![2, 0, 1, 3], vec![2, 1, 3, 0], vec![0, 3, 1, 2], vec![1, 0, 2, 3]];
        let firm_prefs = vec![vec![0, 1, 2, 3]; 4];
        let market = Market::one_to_one(worker_prefs, firm_prefs).unwrap();
        // w0 takes f2, w1 takes f1, w2 takes f0, w3 takes f3
        let sd: Matching = [(0, 2), (1, 1), (2, 0), (3, 3)].into_iter().collect();
        assert!(is_stable(&market, &sd).unwrap());
        let stable = all_stable_matchings(&market);
        assert_eq!(stable, vec![sd.clone()]);
        let swapped: Matching = [(0, 1), (1, 2), (2, 0), (3, 3)].into_iter().collect();
        assert!(!is_stable(&market, &swapped).unwrap());
    }

    #[test]
    fn invalid_markets_rejected() {
        assert!(matches!(
            Market::new(vec![2], vec![1], vec![vec![0]], vec![vec![0]]),
            Err(MarketError::InvalidQuota { .. })
        ));
        assert!(matches!(
            Market::one_to_one(vec![vec![0, 0]], vec![vec![0]]),
            Err(MarketError::DuplicatePreference { .. })
        ));
        assert!(matches!(
            Market::one_to_one(vec![vec![3]], vec![vec![0]]),
            Err(MarketError::UnknownPreference { .. })
        ));
    }

    #[test]
    fn full_flag() {
        assert!(identical(3).is_full());
        let partial = Market::one_to_one(vec![vec![0], vec![0, 1]], vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(!partial.is_full());
        let unbalanced = Market::new(vec![2, 1], vec![1, 1], vec![vec![0, 1]; 2], vec![vec![0, 1]; 2]).unwrap();
        assert!(!unbalanced.is_full());
    }

    #[test]
    fn all_matchings_counts() {
        // 2x2 one-to-one: empty, 4 singletons, 2 perfect
        assert_eq!(all_matchings(&identical(2)).len(), 7);
    }
}
