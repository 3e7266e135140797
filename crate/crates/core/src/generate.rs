//! Random instances for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constraints::{Cnf, Poset};
use crate::market::{AgentId, Market, Matching, Side};

fn shuffled<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

/// One-to-one market with complete uniformly random lists.
pub fn random_one_to_one<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Market {
    let w = (0..n).map(|_| shuffled(n, rng)).collect();
    let f = (0..n).map(|_| shuffled(n, rng)).collect();
    Market::one_to_one(w, f).expect("valid by construction")
}

/// Quotas in `1..=q_max` (capped by the opposite side) with equal totals on
/// both sides. Panics when no such quotas exist.
pub fn random_balanced_quotas<R: Rng + ?Sized>(
    n_workers: usize,
    n_firms: usize,
    q_max: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    assert!(n_workers > 0 && n_firms > 0 && q_max > 0);
    let cap_w = q_max.min(n_firms);
    let cap_f = q_max.min(n_workers);
    assert!(
        n_firms <= n_workers * cap_w && n_workers <= n_firms * cap_f,
        "no balanced quotas for {n_workers}x{n_firms} with q_max {q_max}"
    );
    loop {
        let wq: Vec<usize> = (0..n_workers).map(|_| rng.gen_range(1..=cap_w)).collect();
        let total: usize = wq.iter().sum();
        if total < n_firms || total > n_firms * cap_f {
            continue;
        }
        let mut fq = vec![1; n_firms];
        for _ in 0..total - n_firms {
            let open: Vec<usize> = (0..n_firms).filter(|&f| fq[f] < cap_f).collect();
            fq[*open.choose(rng).unwrap()] += 1;
        }
        return (wq, fq);
    }
}

/// Full market (complete lists, balanced quotas).
pub fn random_full_market<R: Rng + ?Sized>(
    n_workers: usize,
    n_firms: usize,
    q_max: usize,
    rng: &mut R,
) -> Market {
    let (wq, fq) = random_balanced_quotas(n_workers, n_firms, q_max, rng);
    random_full_with_quotas(wq, fq, rng)
}

pub fn random_full_with_quotas<R: Rng + ?Sized>(wq: Vec<usize>, fq: Vec<usize>, rng: &mut R) -> Market {
    let (nw, nf) = (wq.len(), fq.len());
    let w = (0..nw).map(|_| shuffled(nf, rng)).collect();
    let f = (0..nf).map(|_| shuffled(nw, rng)).collect();
    Market::new(wq, fq, w, f).expect("valid by construction")
}

/// Market with arbitrary quotas in `1..=q_max` and each partner acceptable
/// with probability `p_accept`.
pub fn random_partial_market<R: Rng + ?Sized>(
    n_workers: usize,
    n_firms: usize,
    q_max: usize,
    p_accept: f64,
    rng: &mut R,
) -> Market {
    let wq = (0..n_workers)
        .map(|_| rng.gen_range(1..=q_max.min(n_firms).max(1)))
        .collect();
    let fq = (0..n_firms)
        .map(|_| rng.gen_range(1..=q_max.min(n_workers).max(1)))
        .collect();
    let mut list = |n: usize| -> Vec<usize> {
        shuffled(n, rng)
            .into_iter()
            .filter(|_| rng.gen_bool(p_accept))
            .collect()
    };
    let w = (0..n_workers).map(|_| list(n_firms)).collect();
    let f = (0..n_firms).map(|_| list(n_workers)).collect();
    Market::new(wq, fq, w, f).expect("valid by construction")
}

/// Random quota-respecting matching: candidate pairs in random order, each
/// kept with probability 1/2 when both sides have room.
pub fn random_matching<R: Rng + ?Sized>(market: &Market, rng: &mut R) -> Matching {
    let mut pairs: Vec<(usize, usize)> = (0..market.n_workers())
        .flat_map(|w| (0..market.n_firms()).map(move |f| (w, f)))
        .collect();
    pairs.shuffle(rng);
    let mut lw = vec![0; market.n_workers()];
    let mut lf = vec![0; market.n_firms()];
    let mut m = Matching::new();
    for (w, f) in pairs {
        if lw[w] < market.quota(AgentId::worker(w))
            && lf[f] < market.quota(AgentId::firm(f))
            && rng.gen_bool(0.5)
        {
            m.insert(w, f);
            lw[w] += 1;
            lf[f] += 1;
        }
    }
    m
}

/// Random partial order: a hidden random linear order, with each of its
/// forward pairs kept with probability `density`, then closed.
pub fn random_poset<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Poset {
    let order = shuffled(n, rng);
    let mut p = Poset::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                p.add(order[i], order[j]).expect("consistent with the hidden order");
            }
        }
    }
    p
}

/// CNF with `clauses` clauses of 1 to 3 literals over `vars` variables.
pub fn random_cnf<R: Rng + ?Sized>(vars: usize, clauses: usize, rng: &mut R) -> Cnf {
    let clauses = (0..clauses)
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let v = rng.gen_range(1..=vars as i32);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect();
    Cnf { vars, clauses }
}

/// Size of the larger side.
pub fn market_size(market: &Market) -> usize {
    market.population(Side::Worker).max(market.population(Side::Firm))
}
