//! Uniform sampling of linear extensions and of orders consistent with
//! general constraints, and the thresholded-sample ranking.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::constraints::{
    mask_of, ConstraintError, ConstraintSet, DownSetTable, EnumCaps, Poset, PrefixTable,
    Threshold,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("sampled ranking restarted {0} times without an acyclic estimate")]
    RestartLimit(usize),
    #[error("rejection sampling found no consistent order in {0} draws")]
    Starvation(u64),
}

pub type Result<T> = std::result::Result<T, SamplerError>;

/// Exact uniform sampler over the linear extensions of a poset, built from
/// the down-set counts. Orders are drawn back to front: the last element of
/// the remaining down-set `M` is a maximal `a` chosen with probability
/// `e(M - a) / e(M)`.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    poset: Poset,
    table: DownSetTable,
}

impl ExactSampler {
    pub fn new(poset: &Poset) -> Result<Self> {
        Self::with_cap(poset, EnumCaps::current().poset)
    }

    pub fn with_cap(poset: &Poset, cap: usize) -> Result<Self> {
        Ok(ExactSampler {
            poset: poset.clone(),
            table: DownSetTable::new(poset, cap)?,
        })
    }

    pub fn count(&self) -> u128 {
        self.table.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.poset.len();
        let mut mask: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut out = vec![0; n];
        for slot in (0..n).rev() {
            let total = self.table.prefix_count(mask);
            let mut r = rng.gen_range(0..total);
            let mut chosen = None;
            for a in 0..n {
                if mask >> a & 1 == 0 || self.poset.above_mask(a) & mask != 0 {
                    continue;
                }
                let w = self.table.prefix_count(mask & !(1 << a));
                if r < w {
                    chosen = Some(a);
                    break;
                }
                r -= w;
            }
            let a = chosen.expect("weights sum to the prefix count");
            out[slot] = a;
            mask &= !(1 << a);
        }
        out
    }
}

pub fn sample_extension_exact<R: Rng + ?Sized>(poset: &Poset, rng: &mut R) -> Result<Vec<usize>> {
    Ok(ExactSampler::new(poset)?.sample(rng))
}

/// `ceil(8 n^3 ln(n + 1))`.
pub fn default_mcmc_steps(n: usize) -> u64 {
    let n = n as f64;
    (8.0 * n.powi(3) * (n + 1.0).ln()).ceil() as u64
}

/// Adjacent-transposition chain with the middle-biased index weights
/// `i (n - i)`: pick a boundary, then swap across it with probability 1/2
/// when the poset allows. Starts from the topological sort.
pub fn sample_extension_mcmc<R: Rng + ?Sized>(poset: &Poset, rng: &mut R, steps: u64) -> Vec<usize> {
    let n = poset.len();
    let mut order = poset.toposort();
    if n < 2 {
        return order;
    }
    let weights: Vec<usize> = (1..n).map(|i| i * (n - i)).collect();
    let boundary = WeightedIndex::new(&weights).expect("positive weights");
    for _ in 0..steps {
        let i = boundary.sample(rng);
        if rng.gen_bool(0.5) {
            let (a, b) = (order[i], order[i + 1]);
            if !poset.precedes(a, b) {
                order.swap(i, i + 1);
            }
        }
    }
    order
}

/// Draws from a poset by the exact sampler when it fits the cap, else by MCMC.
#[derive(Debug, Clone)]
pub enum ExtensionSampler {
    Exact(ExactSampler),
    Mcmc { poset: Poset, steps: u64 },
}

impl ExtensionSampler {
    pub fn new(poset: &Poset, cap: usize, mcmc_steps: Option<u64>) -> Result<Self> {
        if poset.len() <= cap {
            Ok(ExtensionSampler::Exact(ExactSampler::with_cap(poset, cap)?))
        } else {
            Ok(ExtensionSampler::Mcmc {
                poset: poset.clone(),
                steps: mcmc_steps.unwrap_or_else(|| default_mcmc_steps(poset.len())),
            })
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match self {
            ExtensionSampler::Exact(s) => s.sample(rng),
            ExtensionSampler::Mcmc { poset, steps } => sample_extension_mcmc(poset, rng, *steps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingParams {
    /// Number of sampled extensions.
    pub k: usize,
    pub threshold: f64,
    pub restart_cap: usize,
    /// Chain length when the poset is too large for the exact sampler.
    pub mcmc_steps: Option<u64>,
}

impl RankingParams {
    pub const DEFAULT_THRESHOLD: f64 = 0.85;
    pub const DEFAULT_RESTART_CAP: usize = 50;

    /// `ceil(600 ln n)` samples, at least one.
    pub fn default_k(n: usize) -> usize {
        ((600.0 * (n.max(1) as f64).ln()).ceil() as usize).max(1)
    }

    pub fn for_size(n: usize) -> Self {
        RankingParams {
            k: Self::default_k(n),
            threshold: Self::DEFAULT_THRESHOLD,
            restart_cap: Self::DEFAULT_RESTART_CAP,
            mcmc_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingOutcome {
    pub order: Vec<usize>,
    pub restarts: usize,
}

/// Samples `k` extensions, keeps the pairs ordered the same way in at least a
/// `threshold` fraction of them, and returns a topological sort of those pairs.
/// Starts over when the kept pairs are cyclic.
pub fn sample_ranking<R: Rng + ?Sized>(
    poset: &Poset,
    rng: &mut R,
    params: &RankingParams,
) -> Result<RankingOutcome> {
    let n = poset.len();
    let sampler = ExtensionSampler::new(poset, EnumCaps::current().poset, params.mcmc_steps)?;
    if sampler_count(&sampler) == Some(0) {
        return Err(ConstraintError::NoConsistentOrder.into());
    }
    let t = Threshold::from_f64(params.threshold);
    let k = params.k.max(1);
    let mut restarts = 0;
    loop {
        let mut before = vec![vec![0u128; n]; n];
        for _ in 0..k {
            let order = sampler.sample(rng);
            for i in 0..n {
                for j in i + 1..n {
                    before[order[i]][order[j]] += 1;
                }
            }
        }
        let kept: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && t.reached(before[a][b], k as u128))
            .collect();
        match Poset::new(n, &kept) {
            Ok(estimate) => {
                let order = estimate.toposort();
                assert!(
                    poset.is_linear_extension(&order),
                    "sampled ranking must extend its input"
                );
                return Ok(RankingOutcome { order, restarts });
            }
            Err(_) => {
                restarts += 1;
                if restarts > params.restart_cap {
                    return Err(SamplerError::RestartLimit(restarts - 1));
                }
            }
        }
    }
}

fn sampler_count(s: &ExtensionSampler) -> Option<u128> {
    match s {
        ExtensionSampler::Exact(e) => Some(e.count()),
        ExtensionSampler::Mcmc { .. } => None,
    }
}

pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Uniform sampler over the orders consistent with general constraints:
/// exact through prefix counts within the cap, rejection from uniform
/// permutations beyond it.
#[derive(Debug, Clone)]
pub enum ConsistentSampler {
    Exact(PrefixTable),
    Rejection { constraints: ConstraintSet, budget: u64 },
}

impl ConsistentSampler {
    pub fn new(constraints: &ConstraintSet) -> Result<Self> {
        Self::with_cap(constraints, EnumCaps::current().general, REJECTION_BUDGET)
    }

    pub fn with_cap(constraints: &ConstraintSet, cap: usize, budget: u64) -> Result<Self> {
        if constraints.ground_size() <= cap {
            let table = PrefixTable::new(constraints, cap)?;
            if table.total() == 0 {
                return Err(ConstraintError::NoConsistentOrder.into());
            }
            Ok(ConsistentSampler::Exact(table))
        } else {
            Ok(ConsistentSampler::Rejection {
                constraints: constraints.clone(),
                budget,
            })
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<usize>> {
        match self {
            ConsistentSampler::Exact(table) => Ok(sample_prefix_table(table, rng)),
            ConsistentSampler::Rejection {
                constraints,
                budget,
            } => {
                let n = constraints.ground_size();
                let mut order: Vec<usize> = (0..n).collect();
                for _ in 0..*budget {
                    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
                    if crate::constraints::is_consistent(&order, constraints) {
                        return Ok(order);
                    }
                }
                Err(SamplerError::Starvation(*budget))
            }
        }
    }
}

fn sample_prefix_table<R: Rng + ?Sized>(table: &PrefixTable, rng: &mut R) -> Vec<usize> {
    let n = table.ground_size();
    let mut mask = mask_of(&(0..n).collect::<Vec<_>>());
    let mut out = vec![0; n];
    for slot in (0..n).rev() {
        let total = table.prefix_count(mask);
        let mut r = rng.gen_range(0..total);
        let mut chosen = None;
        for x in 0..n {
            if mask >> x & 1 == 0 {
                continue;
            }
            let rest = mask & !(1 << x);
            if !table.appendable(x, rest) {
                continue;
            }
            let w = table.prefix_count(rest);
            if r < w {
                chosen = Some(x);
                break;
            }
            r -= w;
        }
        let x = chosen.expect("weights sum to the prefix count");
        out[slot] = x;
        mask &= !(1 << x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{is_consistent, positions, GeneralConstraint, PairFractions};
    use crate::rng::rng_from_seed;
    use std::collections::HashMap;

    fn frequencies(draws: impl Iterator<Item = Vec<usize>>) -> (HashMap<Vec<usize>, usize>, usize) {
        let mut map = HashMap::new();
        let mut total = 0;
        for d in draws {
            *map.entry(d).or_insert(0) += 1;
            total += 1;
        }
        (map, total)
    }

    #[test]
    fn chain_has_one_extension() {
        let chain = Poset::chain(5, &[4, 2, 0, 3, 1]).unwrap();
        let mut rng = rng_from_seed(0);
        for _ in 0..20 {
            assert_eq!(sample_extension_exact(&chain, &mut rng).unwrap(), vec![4, 2, 0, 3, 1]);
            assert_eq!(sample_extension_mcmc(&chain, &mut rng, 500), vec![4, 2, 0, 3, 1]);
        }
        let out = sample_ranking(&chain, &mut rng, &RankingParams::for_size(5)).unwrap();
        assert_eq!(out, RankingOutcome { order: vec![4, 2, 0, 3, 1], restarts: 0 });
    }

    #[test]
    fn exact_uniform_on_small_posets() {
        let mut rng = rng_from_seed(1);
        let s = ExactSampler::new(&Poset::empty(3)).unwrap();
        let (freq, total) = frequencies((0..100_000).map(|_| s.sample(&mut rng)));
        assert_eq!(freq.len(), 6);
        for c in freq.values() {
            assert!((*c as f64 / total as f64 - 1.0 / 6.0).abs() < 0.02);
        }
        let p = Poset::new(3, &[(0, 1)]).unwrap();
        let s = ExactSampler::new(&p).unwrap();
        let (freq, total) = frequencies((0..100_000).map(|_| s.sample(&mut rng)));
        assert_eq!(freq.len(), 3);
        for (o, c) in &freq {
            assert!(p.is_linear_extension(o));
            assert!((*c as f64 / total as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn mcmc_close_to_uniform() {
        let mut rng = rng_from_seed(2);
        let p = Poset::new(5, &[(0, 1)]).unwrap();
        let steps = default_mcmc_steps(5);
        let (freq, total) =
            frequencies((0..20_000).map(|_| sample_extension_mcmc(&p, &mut rng, steps)));
        assert_eq!(freq.len(), 60);
        for (o, c) in &freq {
            assert!(p.is_linear_extension(o));
            assert!((*c as f64 / total as f64 - 1.0 / 60.0).abs() < 0.02);
        }
    }

    #[test]
    fn ranking_reproducible_and_symmetric() {
        let p = Poset::empty(2);
        let params = RankingParams::for_size(2);
        let a = sample_ranking(&p, &mut rng_from_seed(5), &params).unwrap();
        let b = sample_ranking(&p, &mut rng_from_seed(5), &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.order, vec![0, 1]);
    }

    #[test]
    fn ranking_is_point_nine_representative() {
        let mut rng = rng_from_seed(6);
        let p = Poset::new(6, &[(0, 1), (0, 2), (3, 4)]).unwrap();
        let fr = PairFractions::new(&p).unwrap();
        let strong = fr.thresholded(Threshold::from_f64(0.9));
        for _ in 0..20 {
            let out = sample_ranking(&p, &mut rng, &RankingParams::for_size(6)).unwrap();
            let pos = positions(&out.order);
            assert!(strong.iter().all(|&(a, b)| pos[a] < pos[b]));
        }
    }

    #[test]
    fn consistent_sampler_exact_and_rejection_agree_on_support() {
        let cs = ConstraintSet::from_constraints(
            4,
            vec![
                GeneralConstraint::new(0, vec![1, 2]).unwrap(),
                GeneralConstraint::new(3, vec![0]).unwrap(),
            ],
        )
        .unwrap();
        let mut rng = rng_from_seed(7);
        let exact = ConsistentSampler::new(&cs).unwrap();
        let rejection = ConsistentSampler::with_cap(&cs, 0, 1000).unwrap();
        let (fe, te) = frequencies((0..30_000).map(|_| exact.sample(&mut rng).unwrap()));
        let (fr, tr) = frequencies((0..30_000).map(|_| rejection.sample(&mut rng).unwrap()));
        // 4!/... counted by brute force: 3 before 0, 0 before one of {1,2}
        let support = crate::constraints::count_consistent_general(&cs).unwrap();
        assert_eq!(support.to_string(), fe.len().to_string());
        assert_eq!(fe.len(), fr.len());
        for (o, c) in &fe {
            assert!(is_consistent(o, &cs));
            let expect = 1.0 / fe.len() as f64;
            assert!((*c as f64 / te as f64 - expect).abs() < 0.02);
            assert!((fr[o] as f64 / tr as f64 - expect).abs() < 0.02);
        }
    }

    #[test]
    fn infeasible_sets_report() {
        let cyc = ConstraintSet::from_pairs(2, &[(0, 1), (1, 0)]).unwrap();
        assert!(matches!(
            ConsistentSampler::new(&cyc),
            Err(SamplerError::Constraint(ConstraintError::NoConsistentOrder))
        ));
        let starving = ConsistentSampler::with_cap(&cyc, 0, 10).unwrap();
        assert_eq!(starving.sample(&mut rng_from_seed(0)), Err(SamplerError::Starvation(10)));
    }
}
