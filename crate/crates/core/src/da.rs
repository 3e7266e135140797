//! Deferred acceptance for full markets.

use crate::market::{AgentId, Market, MarketError, Matching, Side};

fn agent(side: Side, index: usize) -> AgentId {
    AgentId { side, index }
}

fn orient(side: Side, proposer: usize, receiver: usize) -> (usize, usize) {
    match side {
        Side::Worker => (proposer, receiver),
        Side::Firm => (receiver, proposer),
    }
}

/// Gale-Shapley on a full one-to-one market.
pub fn gale_shapley_one_to_one(market: &Market, proposing: Side) -> Result<Matching, MarketError> {
    if !market.is_one_to_one() {
        return Err(MarketError::NotOneToOne);
    }
    deferred_acceptance_many(market, proposing)
}

/// Many-to-many deferred acceptance on a full market. Proposers go down their
/// lists until their quota is filled; receivers keep their best `q` offers.
/// Each round every proposer with free slots makes one proposal, in ascending
/// index order.
pub fn deferred_acceptance_many(market: &Market, proposing: Side) -> Result<Matching, MarketError> {
    if !market.is_full() {
        return Err(MarketError::NotFull);
    }
    let receiving = proposing.opposite();
    let n_p = market.population(proposing);
    let n_r = market.population(receiving);
    let mut next = vec![0usize; n_p];
    let mut load = vec![0usize; n_p];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); n_r];

    loop {
        let mut any = false;
        for p in 0..n_p {
            let pa = agent(proposing, p);
            if load[p] >= market.quota(pa) {
                continue;
            }
            let list = market.prefs(pa).ranked();
            if next[p] >= list.len() {
                continue;
            }
            any = true;
            let r = list[next[p]];
            next[p] += 1;
            let ra = agent(receiving, r);
            held[r].push(p);
            load[p] += 1;
            if held[r].len() > market.quota(ra) {
                let (worst_pos, &worst) = held[r]
                    .iter()
                    .enumerate()
                    .max_by_key(|&(_, &x)| market.rank(ra, x))
                    .expect("non-empty");
                held[r].swap_remove(worst_pos);
                load[worst] -= 1;
            }
        }
        if !any {
            break;
        }
    }

    Ok(held
        .iter()
        .enumerate()
        .flat_map(|(r, ps)| ps.iter().map(move |&p| orient(proposing, p, r)))
        .collect())
}
