//! Completion of a market with partial lists into one with full lists by
//! adding quota-1 phantom agents, and the matching bijection between the two.
//!
//! Completed index layout: real agents keep their indices; the phantoms of
//! each real agent follow on the opposite side, grouped by owner in
//! ascending owner order.

use std::ops::Range;

use crate::market::{
    blocking_pairs_unchecked, require_perfect, validate_matching, AgentId, Market, MarketError,
    Matching, Side,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketEmbedding {
    original: Market,
    completed: Market,
    /// For each real worker, its phantom firms in the completed market.
    worker_phantoms: Vec<Range<usize>>,
    /// For each real firm, its phantom workers in the completed market.
    firm_phantoms: Vec<Range<usize>>,
}

fn phantom_ranges(quotas: &[usize], start: usize) -> Vec<Range<usize>> {
    let mut next = start;
    quotas
        .iter()
        .map(|&q| {
            let r = next..next + q;
            next += q;
            r
        })
        .collect()
}

/// Own list, then own phantoms, then everything else ascending.
fn extend_list(own: &[usize], phantoms: Range<usize>, total: usize) -> Vec<usize> {
    let mut listed = vec![false; total];
    let mut out = Vec::with_capacity(total);
    for x in own.iter().copied().chain(phantoms) {
        listed[x] = true;
        out.push(x);
    }
    out.extend((0..total).filter(|&x| !listed[x]));
    out
}

fn phantom_list(owner: usize, total: usize) -> Vec<usize> {
    std::iter::once(owner)
        .chain((0..total).filter(|&x| x != owner))
        .collect()
}

pub fn complete_market(market: &Market) -> MarketEmbedding {
    let n_w = market.n_workers();
    let n_f = market.n_firms();
    let worker_phantoms = phantom_ranges(market.quotas(Side::Worker), n_f);
    let firm_phantoms = phantom_ranges(market.quotas(Side::Firm), n_w);
    let total_w = n_w + market.total_quota(Side::Firm);
    let total_f = n_f + market.total_quota(Side::Worker);

    let mut worker_quotas = market.quotas(Side::Worker).to_vec();
    worker_quotas.resize(total_w, 1);
    let mut firm_quotas = market.quotas(Side::Firm).to_vec();
    firm_quotas.resize(total_f, 1);

    let mut worker_prefs: Vec<Vec<usize>> = (0..n_w)
        .map(|w| {
            extend_list(
                market.prefs(AgentId::worker(w)).ranked(),
                worker_phantoms[w].clone(),
                total_f,
            )
        })
        .collect();
    for (f, range) in firm_phantoms.iter().enumerate() {
        worker_prefs.extend(range.clone().map(|_| phantom_list(f, total_f)));
    }
    let mut firm_prefs: Vec<Vec<usize>> = (0..n_f)
        .map(|f| {
            extend_list(
                market.prefs(AgentId::firm(f)).ranked(),
                firm_phantoms[f].clone(),
                total_w,
            )
        })
        .collect();
    for (w, range) in worker_phantoms.iter().enumerate() {
        firm_prefs.extend(range.clone().map(|_| phantom_list(w, total_w)));
    }

    let completed = Market::new(worker_quotas, firm_quotas, worker_prefs, firm_prefs)
        .expect("completed market is well formed by construction");
    debug_assert!(completed.is_full());
    MarketEmbedding {
        original: market.clone(),
        completed,
        worker_phantoms,
        firm_phantoms,
    }
}

impl MarketEmbedding {
    pub fn original(&self) -> &Market {
        &self.original
    }

    pub fn completed(&self) -> &Market {
        &self.completed
    }

    /// Phantoms owned by a real agent, as indices on the opposite side.
    pub fn phantoms_of(&self, agent: AgentId) -> Range<usize> {
        match agent.side {
            Side::Worker => self.worker_phantoms[agent.index].clone(),
            Side::Firm => self.firm_phantoms[agent.index].clone(),
        }
    }

    pub fn is_phantom(&self, agent: AgentId) -> bool {
        agent.index >= self.original.population(agent.side)
    }

    /// The real agent that owns a phantom of the completed market.
    pub fn phantom_owner(&self, agent: AgentId) -> Option<AgentId> {
        let ranges = match agent.side {
            Side::Worker => &self.firm_phantoms,
            Side::Firm => &self.worker_phantoms,
        };
        ranges
            .iter()
            .position(|r| r.contains(&agent.index))
            .map(|owner| AgentId {
                side: agent.side.opposite(),
                index: owner,
            })
    }

    /// Maps a matching of the original market to a perfect matching of the
    /// completed one: real agents fill leftover quota with their most
    /// preferred phantoms, the remaining phantoms are paired by one-to-one
    /// deferred acceptance among themselves.
    pub fn extend_matching(&self, matching: &Matching) -> Result<Matching, MarketError> {
        let partners = validate_matching(&self.original, matching)?;
        let mut out = matching.clone();
        let mut spare_workers = Vec::new();
        let mut spare_firms = Vec::new();

        for (w, range) in self.worker_phantoms.iter().enumerate() {
            let free = range.len() - partners.workers[w].len();
            for (k, p) in range.clone().enumerate() {
                if k < free {
                    out.insert(w, p);
                } else {
                    spare_firms.push(p);
                }
            }
        }
        for (f, range) in self.firm_phantoms.iter().enumerate() {
            let free = range.len() - partners.firms[f].len();
            for (k, p) in range.clone().enumerate() {
                if k < free {
                    out.insert(p, f);
                } else {
                    spare_workers.push(p);
                }
            }
        }
        debug_assert_eq!(spare_workers.len(), spare_firms.len());
        for (w, f) in self.pair_spare_phantoms(&spare_workers, &spare_firms) {
            out.insert(w, f);
        }
        Ok(out)
    }

    /// One-to-one deferred acceptance on the spare phantoms, workers proposing,
    /// using completed-market preferences restricted to the spare sets.
    fn pair_spare_phantoms(&self, workers: &[usize], firms: &[usize]) -> Vec<(usize, usize)> {
        let m = &self.completed;
        let lists: Vec<Vec<usize>> = workers
            .iter()
            .map(|&w| {
                m.prefs(AgentId::worker(w))
                    .ranked()
                    .iter()
                    .copied()
                    .filter(|f| firms.contains(f))
                    .collect()
            })
            .collect();
        let mut next = vec![0usize; workers.len()];
        let mut held: Vec<Option<usize>> = vec![None; firms.len()];
        let mut free: Vec<usize> = (0..workers.len()).rev().collect();
        while let Some(i) = free.pop() {
            let f = lists[i][next[i]];
            next[i] += 1;
            let slot = firms.iter().position(|&x| x == f).unwrap();
            match held[slot] {
                None => held[slot] = Some(i),
                Some(j) => {
                    if m.prefers(AgentId::firm(f), workers[i], workers[j]) {
                        held[slot] = Some(i);
                        free.push(j);
                    } else {
                        free.push(i);
                    }
                }
            }
        }
        held.iter()
            .enumerate()
            .map(|(slot, i)| (workers[i.expect("spare sets have equal size")], firms[slot]))
            .collect()
    }

    /// Inverse of [`extend_matching`](Self::extend_matching): drops every pair
    /// that involves a phantom.
    pub fn restrict_matching(&self, full: &Matching) -> Result<Matching, MarketError> {
        let partners = require_perfect(&self.completed, full)?;
        let n_w = self.original.n_workers();
        let n_f = self.original.n_firms();
        for (w, f) in blocking_pairs_unchecked(&self.completed, full, &partners) {
            if w >= n_w && f >= n_f {
                return Err(MarketError::PhantomBlock { worker: w, firm: f });
            }
        }
        Ok(full.pairs().filter(|&(w, f)| w < n_w && f < n_f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{all_matchings, all_stable_matchings, find_blocking_pairs, is_stable};

    #[test]
    fn lone_unacceptable_pair() {
        let market = Market::one_to_one(vec![vec![]], vec![vec![]]).unwrap();
        let emb = complete_market(&market);
        let c = emb.completed();
        assert_eq!((c.n_workers(), c.n_firms()), (2, 2));
        assert!(c.is_full());
        assert_eq!(c.prefs(AgentId::worker(0)).ranked(), &[1, 0]);
        assert_eq!(c.prefs(AgentId::worker(1)).ranked(), &[0, 1]);
        // enumerated by brute force: the only stable matching pairs each real
        // agent with its phantom
        let stable = all_stable_matchings(c);
        let expected: Matching = [(0, 1), (1, 0)].into_iter().collect();
        assert_eq!(stable, vec![expected.clone()]);
        assert_eq!(emb.extend_matching(&Matching::new()).unwrap(), expected);
        assert_eq!(emb.restrict_matching(&expected).unwrap(), Matching::new());
    }

    #[test]
    fn phantom_counts_follow_quotas() {
        let market = Market::new(
            vec![1, 1],
            vec![2],
            vec![vec![0], vec![0]],
            vec![vec![1, 0]],
        )
        .unwrap();
        let emb = complete_market(&market);
        assert_eq!(emb.phantoms_of(AgentId::firm(0)).len(), 2);
        assert_eq!(emb.phantoms_of(AgentId::worker(1)).len(), 1);
        assert_eq!(emb.phantom_owner(AgentId::worker(2)), Some(AgentId::firm(0)));
        assert_eq!(emb.phantom_owner(AgentId::firm(2)), Some(AgentId::worker(1)));
        assert_eq!(emb.phantom_owner(AgentId::firm(0)), None);
        assert!(emb.completed().is_full());
    }

    #[test]
    fn full_market_round_trip() {
        let market = Market::one_to_one(vec![vec![0, 1], vec![1, 0]], vec![vec![1, 0], vec![0, 1]]).unwrap();
        let emb = complete_market(&market);
        assert_eq!(emb.completed().n_workers(), 4);
        for m in all_matchings(&market) {
            let ext = emb.extend_matching(&m).unwrap();
            assert_eq!(emb.restrict_matching(&ext).unwrap(), m);
            assert_eq!(
                is_stable(&market, &m).unwrap(),
                is_stable(emb.completed(), &ext).unwrap()
            );
        }
    }

    #[test]
    fn empty_matching_uses_all_phantoms() {
        let market = Market::new(vec![2], vec![1, 1], vec![vec![1]], vec![vec![0], vec![]]).unwrap();
        let emb = complete_market(&market);
        let ext = emb.extend_matching(&Matching::new()).unwrap();
        for w in emb.phantoms_of(AgentId::worker(0)) {
            assert!(ext.contains(0, w));
        }
        for f in 0..2 {
            let p = emb.phantoms_of(AgentId::firm(f)).start;
            assert!(ext.contains(p, f));
        }
    }

    #[test]
    fn restrict_rejects_imperfect_and_phantom_blocks() {
        let market = Market::one_to_one(vec![vec![0]], vec![vec![0]]).unwrap();
        let emb = complete_market(&market);
        assert!(matches!(
            emb.restrict_matching(&Matching::new()),
            Err(MarketError::NotPerfect { .. })
        ));
        // completed: workers {w0, p(f0)=w1}, firms {f0, p(w0)=f1}
        // matching phantoms together while real pair is matched cannot block;
        // build a 2-quota case where phantoms can block each other
        let market = Market::one_to_one(vec![vec![], vec![]], vec![vec![], vec![]]).unwrap();
        let emb = complete_market(&market);
        let c = emb.completed();
        // real agents to own phantoms, phantoms of f0/f1 crossed with phantoms of w0/w1
        // p(f0)=w2 ranks f0 first then f1, f2, f3; p(w0)=f2 ranks w0 first then w1, w2, w3
        let m: Matching = [(0, 2), (1, 3), (2, 0), (3, 1)].into_iter().collect();
        assert!(emb.restrict_matching(&m).is_ok());
        let _ = find_blocking_pairs(c, &m).unwrap();
    }
}
