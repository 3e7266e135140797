use proptest::prelude::*;
use smlab_core::constraints::{count_extensions_poset, PairFractions};
use smlab_core::da::deferred_acceptance_many;
use smlab_core::embedding::complete_market;
use smlab_core::generate::{random_full_market, random_partial_market, random_poset};
use smlab_core::market::{is_perfect, is_stable};
use smlab_core::rng::rng_from_seed;
use smlab_core::sampler::{sample_extension_exact, sample_extension_mcmc};
use smlab_core::Side;

proptest! {
    #[test]
    fn da_is_stable_on_full_markets(seed: u64, nw in 1usize..6, nf in 1usize..6, q in 1usize..3) {
        prop_assume!(nf <= nw * q.min(nf) && nw <= nf * q.min(nw));
        let mut rng = rng_from_seed(seed);
        let m = random_full_market(nw, nf, q, &mut rng);
        for side in [Side::Worker, Side::Firm] {
            let out = deferred_acceptance_many(&m, side).unwrap();
            prop_assert!(is_stable(&m, &out).unwrap());
        }
    }

    #[test]
    fn completion_gives_perfect_stable_matchings(seed: u64, nw in 1usize..4, nf in 1usize..4, p in 0.0f64..1.0) {
        let mut rng = rng_from_seed(seed);
        let m = random_partial_market(nw, nf, 2, p, &mut rng);
        let emb = complete_market(&m);
        let full = deferred_acceptance_many(emb.completed(), Side::Worker).unwrap();
        prop_assert!(is_perfect(emb.completed(), &full).unwrap());
        let back = emb.restrict_matching(&full).unwrap();
        prop_assert!(is_stable(&m, &back).unwrap());
        prop_assert_eq!(emb.extend_matching(&back).unwrap(), full);
    }

    #[test]
    fn samples_are_linear_extensions(seed: u64, n in 1usize..9, density in 0.0f64..0.6) {
        let mut rng = rng_from_seed(seed);
        let poset = random_poset(n, density, &mut rng);
        prop_assert!(poset.is_linear_extension(&poset.toposort()));
        prop_assert!(poset.is_linear_extension(&sample_extension_exact(&poset, &mut rng).unwrap()));
        prop_assert!(poset.is_linear_extension(&sample_extension_mcmc(&poset, &mut rng, 200)));
    }

    #[test]
    fn pair_fractions_are_complementary(seed: u64, n in 2usize..8, density in 0.0f64..0.6) {
        let mut rng = rng_from_seed(seed);
        let poset = random_poset(n, density, &mut rng);
        let fr = PairFractions::new(&poset).unwrap();
        let total = count_extensions_poset(&poset).unwrap();
        prop_assert_eq!(total.value().clone(), fr.total().into());
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    prop_assert_eq!(fr.before(a, b) + fr.before(b, a), fr.total());
                    prop_assert_eq!(fr.before(a, b) == fr.total(), poset.precedes(a, b));
                }
            }
        }
    }
}
