use rand::Rng;
use smlab_core::generate::{random_full_market, random_full_with_quotas, random_one_to_one, random_partial_market};
use smlab_core::learners::{representative_round_bound, InteractiveLearner, LearnerSetup, Strategy};
use smlab_core::market::{is_stable, Market};
use smlab_core::protocol::{replay, Outcome, Transcript};
use smlab_core::rng::{learner_seed, rng_from_seed};
use smlab_harness::run::{learn, learn_serial, strategy_from_name, Adversary, LearnerParams};
use smlab_harness::{parse_market_file, write_market_file};

#[test]
fn random_markets_round_trip_through_files() {
    let mut rng = rng_from_seed(17);
    for i in 0..100 {
        let (nw, nf) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let m = if i % 2 == 0 {
            random_partial_market(nw, nf, 3, 0.6, &mut rng)
        } else {
            random_full_market(nw, nw, 2, &mut rng)
        };
        let text = write_market_file(&m);
        assert_eq!(parse_market_file(&text).unwrap(), m, "{text}");
    }
}

#[test]
fn partial_lists_are_learned_through_completion() {
    let mut rng = rng_from_seed(5);
    for seed in 0..40 {
        let m = random_partial_market(3, 3, 2, 0.5, &mut rng);
        for (name, adv) in [("mm-simple", Adversary::Lex), ("mm-exact", Adversary::Random)] {
            let s = strategy_from_name(name, &LearnerParams::default()).unwrap();
            let r = learn(&m, s, adv, seed, None).unwrap();
            assert_eq!(r.outcome(), Outcome::Stable);
            let found = r.matching.unwrap();
            assert!(is_stable(&m, &found).unwrap(), "{found} in {m:?}");
        }
    }
}

#[test]
fn one_to_one_partial_lists_with_one_to_one_learners() {
    let m = parse_market_file(
        "sides: W=2 F=2\npref W 0: 1\npref W 1: 1 0\npref F 0: 1\npref F 1: 0 1\n",
    )
    .unwrap();
    let r = learn(&m, Strategy::rep_exact(), Adversary::Lex, 3, None).unwrap();
    let found = r.matching.unwrap();
    assert!(is_stable(&m, &found).unwrap());
    assert_eq!(found.to_string(), "[(0,1),(1,0)]");
}

#[test]
fn transcripts_replay_identically() {
    let market = random_one_to_one(4, &mut rng_from_seed(0));
    let a = learn(&market, Strategy::Naive, Adversary::Lex, 0, None).unwrap();
    let b = learn(&market, Strategy::Naive, Adversary::Lex, 0, None).unwrap();
    assert_eq!(a.transcript.to_text(), b.transcript.to_text());
    let parsed = Transcript::parse(&a.transcript.to_text()).unwrap();
    assert_eq!(parsed, a.transcript);
    let mut fresh = InteractiveLearner::new(LearnerSetup::from_market(&market), Strategy::Naive, learner_seed(0)).unwrap();
    replay(&parsed, &mut fresh).unwrap();

    let s1 = learn_serial(4, Strategy::Naive, 11, None).unwrap();
    let s2 = learn_serial(4, Strategy::Naive, 11, None).unwrap();
    assert_eq!(s1.transcript.to_text(), s2.transcript.to_text());
}

#[test]
fn representative_learner_against_serial_adversary() {
    let bound = representative_round_bound(5, 0.8) as usize;
    for seed in 0..100 {
        let r = learn_serial(5, Strategy::rep_exact(), seed, None).unwrap();
        assert_eq!(r.outcome(), Outcome::Stable);
        assert!(r.queries() <= bound, "seed {seed}: {} > {bound}", r.queries());
    }
}

#[test]
fn single_agents_finish_in_one_round() {
    let m = Market::one_to_one(vec![vec![0]], vec![vec![0]]).unwrap();
    for name in ["naive", "rep-exact", "rep-sampled", "mm-simple", "mm-exact", "mm-sampled"] {
        let s = strategy_from_name(name, &LearnerParams::default()).unwrap();
        for adv in [Adversary::Lex, Adversary::Random, Adversary::Serial] {
            let r = learn(&m, s.clone(), adv, 1, None).unwrap();
            assert_eq!(r.queries(), 1, "{name} {adv:?}");
        }
    }
}

#[test]
fn serial_adversary_needs_square_one_to_one_markets() {
    let m = random_full_with_quotas(vec![2, 1, 1], vec![2, 2], &mut rng_from_seed(2));
    assert!(learn(&m, Strategy::MmSimple, Adversary::Serial, 0, None).is_err());
    let rect = Market::new(vec![1], vec![1, 1], vec![vec![0, 1]], vec![vec![0], vec![0]]).unwrap();
    assert!(learn(&rect, Strategy::MmSimple, Adversary::Serial, 0, None).is_err());
}
