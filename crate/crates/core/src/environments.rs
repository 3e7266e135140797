//! The responding side: environments that hold (or lazily draw) the true
//! preferences and answer proposals with one blocking pair.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::market::{
    blocking_pairs_unchecked, require_perfect, validate_matching, AgentId, Market, MarketError,
    Matching, QueryResponse,
};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("preferences are only fully drawn after the run terminates")]
    NotTerminated,
}

pub type Result<T> = std::result::Result<T, EnvError>;

pub trait Environment {
    fn respond(&mut self, matching: &Matching) -> Result<QueryResponse>;
    /// Name of the response policy.
    fn policy_name(&self) -> &'static str;
    fn worker_quotas(&self) -> Vec<usize>;
    fn firm_quotas(&self) -> Vec<usize>;
    /// Preferences the learner is allowed to know in advance.
    fn public_preferences(&self) -> Vec<(AgentId, Vec<usize>)> {
        Vec::new()
    }
    /// Independent stability check of a matching against the true
    /// preferences; `None` when they are not yet determined.
    fn verify_stable(&self, matching: &Matching) -> Option<bool>;
}

/// Which blocking pair a truthful environment reveals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// First pair in `(worker, firm)` order.
    Lexicographic,
    /// Uniform over all blocking pairs.
    RandomUniform,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Lexicographic => "lex",
            Policy::RandomUniform => "random",
        }
    }
}

/// Answers with respect to a fixed, fully specified market.
#[derive(Debug, Clone)]
pub struct TruthEnvironment {
    market: Market,
    policy: Policy,
    rng: SimRng,
}

impl TruthEnvironment {
    pub fn new(market: Market, policy: Policy, seed: u64) -> Self {
        TruthEnvironment {
            market,
            policy,
            rng: rng_from_seed(seed),
        }
    }

    pub fn market(&self) -> &Market {
        &self.market
    }
}

/// Stable, else the smallest individually blocking agent, else a blocking
/// pair picked by `policy`.
pub fn respond<R: Rng + ?Sized>(
    market: &Market,
    matching: &Matching,
    policy: Policy,
    rng: &mut R,
) -> std::result::Result<QueryResponse, MarketError> {
    let partners = validate_matching(market, matching)?;
    if let Some(agent) = market
        .agents()
        .find(|&a| partners.of(a).iter().any(|&p| !market.acceptable(a, p)))
    {
        return Ok(QueryResponse::IndividuallyBlocking(agent));
    }
    let blocks = blocking_pairs_unchecked(market, matching, &partners);
    let pick = match policy {
        _ if blocks.is_empty() => return Ok(QueryResponse::Stable),
        Policy::Lexicographic => blocks[0],
        Policy::RandomUniform => blocks[rng.gen_range(0..blocks.len())],
    };
    Ok(QueryResponse::Blocking {
        worker: pick.0,
        firm: pick.1,
    })
}

impl Environment for TruthEnvironment {
    fn respond(&mut self, matching: &Matching) -> Result<QueryResponse> {
        Ok(respond(&self.market, matching, self.policy, &mut self.rng)?)
    }

    fn policy_name(&self) -> &'static str {
        self.policy.name()
    }

    fn worker_quotas(&self) -> Vec<usize> {
        self.market.quotas(crate::Side::Worker).to_vec()
    }

    fn firm_quotas(&self) -> Vec<usize> {
        self.market.quotas(crate::Side::Firm).to_vec()
    }

    fn verify_stable(&self, matching: &Matching) -> Option<bool> {
        crate::market::is_stable(&self.market, matching).ok()
    }
}

/// Per-man knowledge of the adversary: revealed immediate-predecessor links
/// among his remaining women, and, once decided, his full ranking.
#[derive(Debug, Clone)]
struct ManState {
    pred: Vec<Option<usize>>,
    succ: Vec<Option<usize>>,
    links: usize,
    ranking: Option<Vec<usize>>,
}

/// The hard instance for one-to-one learning: all women (firms) share the
/// public order `m_0 > m_1 > ...` over men (workers), and each man's uniformly
/// random ranking is drawn only as far as the answers require.
///
/// Men are resolved in index order. While man `i` is the first undecided man,
/// a proposal pairing him with `w` (a woman with no revealed predecessor) is
/// accepted as his serial-dictatorship partner with probability `1/chi`, where
/// `chi` is the number of chains among his remaining women; otherwise the
/// tail of a uniformly chosen other chain is revealed as `w`'s immediate
/// predecessor.
#[derive(Debug, Clone)]
pub struct SerialDictatorshipEnv {
    n: usize,
    men: Vec<ManState>,
    partner: Vec<Option<usize>>,
    terminated: bool,
    rng: SimRng,
}

impl SerialDictatorshipEnv {
    pub fn new(n: usize, seed: u64) -> Self {
        SerialDictatorshipEnv {
            n,
            men: (0..n)
                .map(|_| ManState {
                    pred: vec![None; n],
                    succ: vec![None; n],
                    links: 0,
                    ranking: None,
                })
                .collect(),
            partner: vec![None; n],
            terminated: false,
            rng: rng_from_seed(seed),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Number of men whose ranking has been decided.
    pub fn decided(&self) -> usize {
        self.partner.iter().take_while(|p| p.is_some()).count()
    }

    /// Women not taken by earlier men, ascending.
    fn remaining(&self, i: usize) -> Vec<usize> {
        let taken: Vec<usize> = self.partner[..i].iter().map(|p| p.unwrap()).collect();
        (0..self.n).filter(|w| !taken.contains(w)).collect()
    }

    /// Chains among the remaining women of the frontier man `i`.
    pub fn chain_count(&self, i: usize) -> usize {
        (self.n - i) - self.men[i].links
    }

    /// Revealed chains of man `i`, each listed from its head.
    pub fn chains(&self, i: usize) -> Vec<Vec<usize>> {
        let st = &self.men[i];
        self.remaining(i)
            .into_iter()
            .filter(|&w| st.pred[w].is_none())
            .map(|head| {
                let mut chain = vec![head];
                while let Some(next) = st.succ[*chain.last().unwrap()] {
                    chain.push(next);
                }
                chain
            })
            .collect()
    }

    /// Draws the full ranking of man `i` with `first` on top of his remaining
    /// women. Links are immediate, so chains stay contiguous: `first`'s chain
    /// leads, the other chains follow in uniform order, and women taken by
    /// earlier men are inserted at uniform positions.
    fn decide(&mut self, i: usize, first: usize) {
        let mut chains = self.chains(i);
        let own = chains
            .iter()
            .position(|c| c[0] == first)
            .expect("partner heads a chain");
        let mut ranking = chains.swap_remove(own);
        chains.shuffle(&mut self.rng);
        ranking.extend(chains.into_iter().flatten());
        for j in 0..i {
            let w = self.partner[j].unwrap();
            let at = self.rng.gen_range(0..=ranking.len());
            ranking.insert(at, w);
        }
        self.men[i].ranking = Some(ranking);
        self.partner[i] = Some(first);
    }

    /// Predecessor of `w` in man `i`'s decided ranking restricted to his
    /// remaining women.
    fn decided_predecessor(&self, i: usize, w: usize) -> usize {
        let remaining = self.remaining(i);
        let ranking = self.men[i].ranking.as_ref().unwrap();
        let restricted: Vec<usize> = ranking
            .iter()
            .copied()
            .filter(|x| remaining.contains(x))
            .collect();
        let at = restricted.iter().position(|&x| x == w).unwrap();
        restricted[at - 1]
    }

    /// Men's rankings after termination.
    pub fn realized_preferences(&self) -> Result<Vec<Vec<usize>>> {
        if !self.terminated {
            return Err(EnvError::NotTerminated);
        }
        Ok(self
            .men
            .iter()
            .map(|m| m.ranking.clone().unwrap())
            .collect())
    }

    /// Women's common order.
    pub fn women_order(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    /// The realized market; available after termination.
    pub fn realized_market(&self) -> Result<Market> {
        let men = self.realized_preferences()?;
        Ok(Market::one_to_one(men, vec![self.women_order(); self.n])?)
    }

    fn check_chains(&self, i: usize) {
        let chains = self.chains(i);
        let covered: usize = chains.iter().map(Vec::len).sum();
        assert_eq!(covered, self.n - i, "chains must partition the remaining women");
        assert_eq!(chains.len(), self.chain_count(i));
    }
}

impl Environment for SerialDictatorshipEnv {
    fn respond(&mut self, matching: &Matching) -> Result<QueryResponse> {
        let market_shape = Market::one_to_one(vec![vec![]; self.n], vec![vec![]; self.n])?;
        let partners = require_perfect(&market_shape, matching)?;
        let held = |i: usize| partners.workers[i][0];
        loop {
            let frontier = self.decided();
            if let Some(i) = (0..frontier).find(|&i| Some(held(i)) != self.partner[i]) {
                let w = self.decided_predecessor(i, held(i));
                return Ok(QueryResponse::Blocking { worker: i, firm: w });
            }
            if frontier == self.n {
                self.terminated = true;
                return Ok(QueryResponse::Stable);
            }
            let i = frontier;
            let w = held(i);
            if let Some(p) = self.men[i].pred[w] {
                return Ok(QueryResponse::Blocking { worker: i, firm: p });
            }
            let chi = self.chain_count(i);
            if self.rng.gen_range(0..chi) == 0 {
                self.decide(i, w);
                continue;
            }
            let own_tail = {
                let mut t = w;
                while let Some(s) = self.men[i].succ[t] {
                    t = s;
                }
                t
            };
            let tails: Vec<usize> = self
                .remaining(i)
                .into_iter()
                .filter(|&x| self.men[i].succ[x].is_none() && x != own_tail)
                .collect();
            let &p = tails.choose(&mut self.rng).expect("another chain exists");
            let st = &mut self.men[i];
            st.succ[p] = Some(w);
            st.pred[w] = Some(p);
            st.links += 1;
            debug_assert_eq!(self.chain_count(i), chi - 1);
            if cfg!(debug_assertions) {
                self.check_chains(i);
            }
            return Ok(QueryResponse::Blocking { worker: i, firm: p });
        }
    }

    fn policy_name(&self) -> &'static str {
        "serial"
    }

    fn worker_quotas(&self) -> Vec<usize> {
        vec![1; self.n]
    }

    fn firm_quotas(&self) -> Vec<usize> {
        vec![1; self.n]
    }

    fn public_preferences(&self) -> Vec<(AgentId, Vec<usize>)> {
        (0..self.n)
            .map(|f| (AgentId::firm(f), self.women_order()))
            .collect()
    }

    fn verify_stable(&self, matching: &Matching) -> Option<bool> {
        let market = self.realized_market().ok()?;
        crate::market::is_stable(&market, matching).ok()
    }
}

/// The matching where men, in index order, each take their favourite
/// remaining woman.
pub fn serial_dictatorship(men: &[Vec<usize>]) -> Matching {
    let mut taken = vec![false; men.len()];
    let mut out = Matching::new();
    for (i, ranking) in men.iter().enumerate() {
        let &w = ranking.iter().find(|&&w| !taken[w]).expect("complete rankings");
        taken[w] = true;
        out.insert(i, w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::find_blocking_pairs;

    fn identical(n: usize) -> Market {
        let list: Vec<usize> = (0..n).collect();
        Market::one_to_one(vec![list.clone(); n], vec![list; n]).unwrap()
    }

    #[test]
    fn lexicographic_picks_first_pair() {
        let market = identical(2);
        let m: Matching = [(0, 1), (1, 0)].into_iter().collect();
        // brute force: only (0, 0) blocks
        assert_eq!(find_blocking_pairs(&market, &m).unwrap(), vec![(0, 0)]);
        let mut env = TruthEnvironment::new(market, Policy::Lexicographic, 0);
        assert_eq!(env.respond(&m).unwrap(), QueryResponse::Blocking { worker: 0, firm: 0 });
        let stable: Matching = [(0, 0), (1, 1)].into_iter().collect();
        assert_eq!(env.respond(&stable).unwrap(), QueryResponse::Stable);
    }

    #[test]
    fn random_policy_is_uniform() {
        let market = identical(3);
        let m: Matching = [(0, 2), (1, 1), (2, 0)].into_iter().collect();
        let blocks = find_blocking_pairs(&market, &m).unwrap();
        assert_eq!(blocks.len(), 3);
        let mut env = TruthEnvironment::new(market, Policy::RandomUniform, 11);
        let mut counts = [0usize; 3];
        let trials = 50_000;
        for _ in 0..trials {
            match env.respond(&m).unwrap() {
                QueryResponse::Blocking { worker, firm } => {
                    let k = blocks.iter().position(|&b| b == (worker, firm)).unwrap();
                    counts[k] += 1;
                }
                other => panic!("unexpected {other}"),
            }
        }
        for c in counts {
            assert!((c as f64 / trials as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn individually_blocking_comes_first() {
        let market = Market::one_to_one(vec![vec![0], vec![]], vec![vec![0, 1], vec![0]]).unwrap();
        let m: Matching = [(1, 1)].into_iter().collect();
        let mut env = TruthEnvironment::new(market, Policy::Lexicographic, 0);
        assert_eq!(
            env.respond(&m).unwrap(),
            QueryResponse::IndividuallyBlocking(AgentId::worker(1))
        );
    }

    #[test]
    fn serial_single_man() {
        let mut env = SerialDictatorshipEnv::new(1, 0);
        assert_eq!(env.realized_preferences(), Err(EnvError::NotTerminated));
        let m: Matching = [(0, 0)].into_iter().collect();
        assert_eq!(env.respond(&m).unwrap(), QueryResponse::Stable);
        assert_eq!(env.realized_preferences().unwrap(), vec![vec![0]]);
    }

    #[test]
    fn serial_rejects_imperfect() {
        let mut env = SerialDictatorshipEnv::new(2, 0);
        let m: Matching = [(0, 0)].into_iter().collect();
        assert!(matches!(
            env.respond(&m),
            Err(EnvError::Market(MarketError::NotPerfect { .. }))
        ));
    }

    #[test]
    fn serial_answers_are_sound() {
        // cycle through all perfect matchings until stable, then audit
        for seed in 0..200 {
            let n = 4;
            let mut env = SerialDictatorshipEnv::new(n, seed);
            let mut rng = rng_from_seed(seed + 1000);
            let mut log = Vec::new();
            loop {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let m: Matching = perm.iter().enumerate().map(|(w, &f)| (w, f)).collect();
                let r = env.respond(&m).unwrap();
                log.push((m, r));
                if r == QueryResponse::Stable {
                    break;
                }
            }
            let market = env.realized_market().unwrap();
            let men = env.realized_preferences().unwrap();
            for (m, r) in &log {
                match *r {
                    QueryResponse::Blocking { worker, firm } => {
                        assert!(find_blocking_pairs(&market, m).unwrap().contains(&(worker, firm)));
                    }
                    QueryResponse::Stable => assert_eq!(*m, serial_dictatorship(&men)),
                    _ => unreachable!(),
                }
            }
        }
    }
}
