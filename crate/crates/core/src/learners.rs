//! Learners: propose matchings that are stable for speculative preferences,
//! and turn each revealed blocking pair into preference constraints.
//!
//! A blocking pair `(w, f)` against proposal `M` tells the learner that `w`
//! ranks `f` above one of its partners in `M`, and `f` ranks `w` above one of
//! its partners. In one-to-one markets both are plain pairwise comparisons.

use rand::Rng;
use thiserror::Error;

use crate::constraints::{
    generalized_toposort, representative_order_capped, ConstraintError, ConstraintSet,
    EnumCaps, GeneralConstraint, Poset, PrefixTable,
};
use crate::da::deferred_acceptance_many;
use crate::market::{AgentId, Market, MarketError, Matching, QueryResponse, Side};
use crate::rng::{rng_from_seed, SimRng};
use crate::sampler::{sample_ranking, ConsistentSampler, RankingParams, SamplerError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("protocol violation in round {round}: {reason}")]
    ProtocolViolation { round: usize, reason: String },
    #[error("round {round}: blocking pair repeats known constraints of {worker} and {firm}")]
    DuplicateConstraint {
        round: usize,
        worker: AgentId,
        firm: AgentId,
    },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

pub type Result<T> = std::result::Result<T, LearnerError>;

/// The propose/observe side of the protocol.
pub trait Learner {
    fn propose(&mut self) -> Result<Matching>;
    fn observe(&mut self, response: QueryResponse) -> Result<()>;
    fn finished(&self) -> bool;
    /// Restarts spent by sampling strategies so far.
    fn restarts(&self) -> usize {
        0
    }
}

/// How speculative orders are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Any consistent order (generalized topological sort), one-to-one only.
    Naive,
    /// Exact representative orders.
    RepExact { alpha: f64 },
    /// Thresholded sample estimates; `k = None` means `ceil(600 ln n)`.
    RepSampled {
        k: Option<usize>,
        threshold: f64,
        restart_cap: usize,
        mcmc_steps: Option<u64>,
    },
    /// Any consistent order, many-to-many.
    MmSimple,
    /// Last-element fractions computed exactly.
    MmExact,
    /// Last-element fractions estimated from `k` samples per position;
    /// `None` means `ceil(6 n^2 ln n)`.
    MmSampled { k: Option<usize> },
}

impl Strategy {
    pub fn rep_exact() -> Self {
        Strategy::RepExact { alpha: 0.8 }
    }

    pub fn rep_sampled() -> Self {
        Strategy::RepSampled {
            k: None,
            threshold: RankingParams::DEFAULT_THRESHOLD,
            restart_cap: RankingParams::DEFAULT_RESTART_CAP,
            mcmc_steps: None,
        }
    }

    pub fn mm_sampled() -> Self {
        Strategy::MmSampled { k: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::RepExact { .. } => "rep-exact",
            Strategy::RepSampled { .. } => "rep-sampled",
            Strategy::MmSimple => "mm-simple",
            Strategy::MmExact => "mm-exact",
            Strategy::MmSampled { .. } => "mm-sampled",
        }
    }

    pub fn is_one_to_one(&self) -> bool {
        matches!(
            self,
            Strategy::Naive | Strategy::RepExact { .. } | Strategy::RepSampled { .. }
        )
    }

    fn is_sampled(&self) -> bool {
        matches!(self, Strategy::RepSampled { .. } | Strategy::MmSampled { .. })
    }
}

/// `ceil(6 n^2 ln n)`, at least one.
pub fn default_last_frac_samples(n: usize) -> usize {
    let n = n.max(1) as f64;
    ((6.0 * n * n * n.ln()).ceil() as usize).max(1)
}

/// What a learner knows before the first round: quotas, and the orders of
/// agents whose preferences are public.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnerSetup {
    pub worker_quotas: Vec<usize>,
    pub firm_quotas: Vec<usize>,
    pub known: Vec<(AgentId, Vec<usize>)>,
}

impl LearnerSetup {
    pub fn one_to_one(n: usize) -> Self {
        LearnerSetup {
            worker_quotas: vec![1; n],
            firm_quotas: vec![1; n],
            known: Vec::new(),
        }
    }

    /// Quotas of a market, nothing known.
    pub fn from_market(market: &Market) -> Self {
        LearnerSetup {
            worker_quotas: market.quotas(Side::Worker).to_vec(),
            firm_quotas: market.quotas(Side::Firm).to_vec(),
            known: Vec::new(),
        }
    }

    pub fn with_known(mut self, known: Vec<(AgentId, Vec<usize>)>) -> Self {
        self.known = known;
        self
    }
}

/// The learner of the interaction loop, parameterized by a [`Strategy`].
#[derive(Debug, Clone)]
pub struct InteractiveLearner {
    strategy: Strategy,
    n_workers: usize,
    quotas: Vec<usize>,
    known: Vec<Option<Vec<usize>>>,
    constraints: Vec<ConstraintSet>,
    posets: Vec<Poset>,
    speculative: Vec<Vec<usize>>,
    dirty: Vec<bool>,
    proposal: Option<Matching>,
    updated: Vec<AgentId>,
    round: usize,
    finished: bool,
    restarts: usize,
    stalls: usize,
    caps: EnumCaps,
    rng: SimRng,
}

impl InteractiveLearner {
    pub fn new(setup: LearnerSetup, strategy: Strategy, seed: u64) -> Result<Self> {
        Self::with_caps(setup, strategy, seed, EnumCaps::current())
    }

    pub fn with_caps(setup: LearnerSetup, strategy: Strategy, seed: u64, caps: EnumCaps) -> Result<Self> {
        let n_workers = setup.worker_quotas.len();
        let n_firms = setup.firm_quotas.len();
        let total = n_workers + n_firms;
        if setup.worker_quotas.iter().sum::<usize>() != setup.firm_quotas.iter().sum::<usize>() {
            return Err(LearnerError::Unsupported("quotas are not balanced".into()));
        }
        let one_to_one = setup
            .worker_quotas
            .iter()
            .chain(&setup.firm_quotas)
            .all(|&q| q == 1);
        if strategy.is_one_to_one() && !one_to_one {
            return Err(LearnerError::Unsupported(format!(
                "learner {} needs a one-to-one market",
                strategy.name()
            )));
        }
        if let Strategy::RepExact { alpha } = strategy {
            if alpha.is_nan() || !(0.8..1.0).contains(&alpha) {
                return Err(ConstraintError::AlphaTooSmall(alpha).into());
            }
        }
        let opposite = |i: usize| if i < n_workers { n_firms } else { n_workers };
        let mut known = vec![None; total];
        for (agent, order) in setup.known {
            let idx = slot(n_workers, agent);
            if idx >= total || !crate::constraints::is_permutation(&order, opposite(idx)) {
                return Err(LearnerError::Unsupported(format!(
                    "known order of {agent} is not a full ranking"
                )));
            }
            known[idx] = Some(order);
        }
        let constraints: Vec<ConstraintSet> =
            (0..total).map(|i| ConstraintSet::new(opposite(i))).collect();
        let posets = (0..total).map(|i| Poset::empty(opposite(i))).collect();
        let mut quotas = setup.worker_quotas;
        quotas.extend(setup.firm_quotas);
        Ok(InteractiveLearner {
            strategy,
            n_workers,
            quotas,
            known,
            constraints,
            posets,
            speculative: vec![Vec::new(); total],
            dirty: vec![true; total],
            proposal: None,
            updated: Vec::new(),
            round: 0,
            finished: false,
            restarts: 0,
            stalls: 0,
            caps,
            rng: rng_from_seed(seed),
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    fn agent_at(&self, i: usize) -> AgentId {
        if i < self.n_workers {
            AgentId::worker(i)
        } else {
            AgentId::firm(i - self.n_workers)
        }
    }

    pub fn constraints(&self, agent: AgentId) -> &ConstraintSet {
        &self.constraints[slot(self.n_workers, agent)]
    }

    /// Pairwise constraints of a one-to-one learner as a closed partial order.
    pub fn poset(&self, agent: AgentId) -> &Poset {
        &self.posets[slot(self.n_workers, agent)]
    }

    pub fn is_known(&self, agent: AgentId) -> bool {
        self.known[slot(self.n_workers, agent)].is_some()
    }

    /// Speculative order used for the latest proposal.
    pub fn speculative(&self, agent: AgentId) -> &[usize] {
        &self.speculative[slot(self.n_workers, agent)]
    }

    /// Total number of stored constraints.
    pub fn phi(&self) -> usize {
        self.constraints.iter().map(ConstraintSet::len).sum()
    }

    /// Agents whose constraint sets grew on the latest observation.
    pub fn last_updated(&self) -> &[AgentId] {
        &self.updated
    }

    pub fn rounds(&self) -> usize {
        self.round
    }

    /// Rounds of sampled strategies in which a response only repeated known
    /// constraints.
    pub fn stalls(&self) -> usize {
        self.stalls
    }

    /// The market of speculative preferences behind the latest proposal.
    pub fn speculative_market(&self) -> Result<Market> {
        let (wq, fq) = self.quotas.split_at(self.n_workers);
        let (wp, fp) = self.speculative.split_at(self.n_workers);
        Ok(Market::new(wq.to_vec(), fq.to_vec(), wp.to_vec(), fp.to_vec())?)
    }

    fn recompute(&mut self, i: usize) -> Result<Vec<usize>> {
        if let Some(order) = &self.known[i] {
            return Ok(order.clone());
        }
        let cs = &self.constraints[i];
        let order = match &self.strategy {
            Strategy::Naive | Strategy::MmSimple => generalized_toposort(cs)?,
            Strategy::RepExact { alpha } => {
                representative_order_capped(&self.posets[i], *alpha, self.caps.poset)?
            }
            Strategy::RepSampled {
                k,
                threshold,
                restart_cap,
                mcmc_steps,
            } => {
                let n = cs.ground_size();
                let params = RankingParams {
                    k: k.unwrap_or_else(|| RankingParams::default_k(n)),
                    threshold: *threshold,
                    restart_cap: *restart_cap,
                    mcmc_steps: *mcmc_steps,
                };
                let out = sample_ranking(&self.posets[i], &mut self.rng, &params)?;
                self.restarts += out.restarts;
                out.order
            }
            Strategy::MmExact => last_frac_order_exact(cs, self.caps.general)?,
            Strategy::MmSampled { k } => {
                let k = k.unwrap_or_else(|| default_last_frac_samples(cs.ground_size()));
                let sampler = ConsistentSampler::with_cap(
                    cs,
                    self.caps.general,
                    crate::sampler::REJECTION_BUDGET,
                )?;
                last_frac_order_sampled(&sampler, cs.ground_size(), k, &mut self.rng)?
            }
        };
        Ok(order)
    }

    fn violation(&self, reason: impl Into<String>) -> LearnerError {
        LearnerError::ProtocolViolation {
            round: self.round,
            reason: reason.into(),
        }
    }

    /// Records `(subject, set)` for agent slot `i`. Returns whether it was new.
    fn learn(&mut self, i: usize, subject: usize, set: Vec<usize>) -> Result<bool> {
        let agent = self.agent_at(i);
        if let Some(order) = &self.known[i] {
            let pos = crate::constraints::positions(order);
            if !set.iter().any(|&y| pos[subject] < pos[y]) {
                return Err(self.violation(format!("response contradicts the known order of {agent}")));
            }
            return Ok(false);
        }
        let c = GeneralConstraint::new(subject, set.clone())?;
        if self.constraints[i].contains(&c) {
            return Ok(false);
        }
        if set.len() == 1 {
            self.posets[i]
                .add(subject, set[0])
                .map_err(|_| self.violation(format!("constraints of {agent} became cyclic")))?;
        }
        self.constraints[i].push(c)?;
        self.dirty[i] = true;
        Ok(true)
    }
}

fn slot(n_workers: usize, agent: AgentId) -> usize {
    match agent.side {
        Side::Worker => agent.index,
        Side::Firm => n_workers + agent.index,
    }
}

impl Learner for InteractiveLearner {
    fn propose(&mut self) -> Result<Matching> {
        if self.finished {
            return Err(self.violation("proposal requested after termination"));
        }
        for i in 0..self.dirty.len() {
            if self.dirty[i] {
                self.speculative[i] = self.recompute(i)?;
                self.dirty[i] = false;
            }
        }
        let market = self.speculative_market()?;
        let matching = deferred_acceptance_many(&market, Side::Worker)?;
        self.round += 1;
        self.proposal = Some(matching.clone());
        Ok(matching)
    }

    fn observe(&mut self, response: QueryResponse) -> Result<()> {
        let proposal = self
            .proposal
            .take()
            .ok_or_else(|| self.violation("response without a proposal"))?;
        self.updated.clear();
        match response {
            QueryResponse::Stable => {
                self.finished = true;
                Ok(())
            }
            QueryResponse::IndividuallyBlocking(agent) => Err(self.violation(format!(
                "{agent} reported individually blocking a perfect matching"
            ))),
            QueryResponse::Blocking { worker, firm } => {
                let n_firms = self.quotas.len() - self.n_workers;
                if worker >= self.n_workers || firm >= n_firms {
                    return Err(self.violation(format!("pair ({worker}, {firm}) out of range")));
                }
                if proposal.contains(worker, firm) {
                    return Err(self.violation(format!("pair ({worker}, {firm}) is in the matching")));
                }
                let w = AgentId::worker(worker);
                let f = AgentId::firm(firm);
                // an agent below quota may block out of slack alone, which
                // says nothing about its order
                let learn_for = |this: &mut Self, agent: AgentId, subject: usize| -> Result<bool> {
                    let i = slot(this.n_workers, agent);
                    let partners = proposal.partners(agent);
                    if partners.len() < this.quotas[i] {
                        return Ok(false);
                    }
                    this.learn(i, subject, partners)
                };
                let w_new = learn_for(self, w, firm)?;
                let f_new = learn_for(self, f, worker)?;
                if w_new {
                    self.updated.push(w);
                }
                if f_new {
                    self.updated.push(f);
                }
                if !w_new && !f_new {
                    if self.strategy.is_sampled() {
                        self.stalls += 1;
                    } else if self.strategy.is_one_to_one() {
                        return Err(self.violation(format!(
                            "blocking pair ({worker}, {firm}) adds no new comparison"
                        )));
                    } else {
                        return Err(LearnerError::DuplicateConstraint {
                            round: self.round,
                            worker: w,
                            firm: f,
                        });
                    }
                }
                Ok(())
            }
        }
    }

    fn finished(&self) -> bool {
        self.finished
    }

    fn restarts(&self) -> usize {
        self.restarts
    }
}

/// Builds an order back to front, each time placing last the remaining
/// element with the largest exact last-fraction (smallest index on ties).
pub fn last_frac_order_exact(constraints: &ConstraintSet, cap: usize) -> Result<Vec<usize>> {
    let table = PrefixTable::new(constraints, cap)?;
    if table.total() == 0 {
        return Err(ConstraintError::NoConsistentOrder.into());
    }
    let n = constraints.ground_size();
    let mut remaining: u64 = (0..n).fold(0, |m, x| m | 1 << x);
    let mut out = vec![0; n];
    for slot in (0..n).rev() {
        let mut best: Option<(u128, usize)> = None;
        for a in (0..n).filter(|&a| remaining >> a & 1 == 1) {
            let c = table.last_count(remaining, a);
            if best.is_none_or(|(bc, _)| c > bc) {
                best = Some((c, a));
            }
        }
        let (_, a) = best.expect("remaining is non-empty");
        out[slot] = a;
        remaining &= !(1 << a);
    }
    Ok(out)
}

/// As [`last_frac_order_exact`], with fractions estimated from `k` fresh
/// uniform consistent orders at every position.
pub fn last_frac_order_sampled<R: Rng + ?Sized>(
    sampler: &ConsistentSampler,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut remaining = vec![true; n];
    let mut out = vec![0; n];
    for slot in (0..n).rev() {
        let mut hits = vec![0usize; n];
        for _ in 0..k {
            let order = sampler.sample(rng)?;
            let last = *order
                .iter()
                .rev()
                .find(|&&x| remaining[x])
                .expect("remaining is non-empty");
            hits[last] += 1;
        }
        let mut best: Option<usize> = None;
        for a in (0..n).filter(|&a| remaining[a]) {
            if best.is_none_or(|b| hits[a] > hits[b]) {
                best = Some(a);
            }
        }
        let a = best.expect("remaining is non-empty");
        out[slot] = a;
        remaining[a] = false;
    }
    Ok(out)
}

/// Worst-case unsuccessful rounds of the naive learner: `n^2 (n - 1)`.
pub fn naive_round_bound(n: usize) -> u64 {
    let n = n as u64;
    n * n * n.saturating_sub(1) + 1
}

/// `sum_a C(n_opp, q_a) (n_opp - q_a)` over all agents.
pub fn mm_simple_round_bound(worker_quotas: &[usize], firm_quotas: &[usize]) -> u128 {
    let part = |quotas: &[usize], n_opp: usize| -> u128 {
        quotas
            .iter()
            .map(|&q| binomial(n_opp as u64, q as u64) * (n_opp - q) as u128)
            .sum()
    };
    part(worker_quotas, firm_quotas.len()) + part(firm_quotas, worker_quotas.len())
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `ln((n!)^(2n))`.
pub fn ln_scenarios(n: usize) -> f64 {
    let ln_fact: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
    2.0 * n as f64 * ln_fact
}

/// `ceil(log_{1/alpha}((n!)^(2n))) + 1` for the exact representative learner.
pub fn representative_round_bound(n: usize, alpha: f64) -> u64 {
    (ln_scenarios(n) / (1.0 / alpha).ln()).ceil() as u64 + 1
}

/// `ceil(log_{n/(n-1)}((n!)^(2n)))` for the exact last-fraction learner.
pub fn last_frac_round_bound(n: usize) -> u64 {
    assert!(n >= 2);
    let base = n as f64 / (n as f64 - 1.0);
    (ln_scenarios(n) / base.ln()).ceil() as u64
}
