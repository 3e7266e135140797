//! Single protocol runs.

use std::str::FromStr;

use smlab_core::embedding::complete_market;
use smlab_core::environments::{Environment, Policy, SerialDictatorshipEnv, TruthEnvironment};
use smlab_core::generate::market_size;
use smlab_core::learners::{InteractiveLearner, Learner, LearnerSetup, Strategy};
use smlab_core::market::{AgentId, Market, Matching};
use smlab_core::protocol::{
    default_max_rounds, params_string, run_protocol, Outcome, Transcript, TranscriptHeader,
};
use smlab_core::rng::{learner_seed, RNG_NAME};
use smlab_core::sampler::RankingParams;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    Lex,
    Random,
    Serial,
}

impl Adversary {
    pub fn name(self) -> &'static str {
        match self {
            Adversary::Lex => "lex",
            Adversary::Random => "random",
            Adversary::Serial => "serial",
        }
    }
}

impl FromStr for Adversary {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lex" => Ok(Adversary::Lex),
            "random" => Ok(Adversary::Random),
            "serial" => Ok(Adversary::Serial),
            other => Err(HarnessError::Config(format!(
                "unknown adversary {other:?} (expected lex, random or serial)"
            ))),
        }
    }
}

pub const LEARNER_NAMES: [&str; 6] = [
    "naive",
    "rep-exact",
    "rep-sampled",
    "mm-simple",
    "mm-exact",
    "mm-sampled",
];

/// Optional learner parameters; `None` keeps the default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LearnerParams {
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub threshold: Option<f64>,
    pub mcmc_steps: Option<u64>,
}

impl LearnerParams {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(a) = self.alpha {
            if !(0.8..1.0).contains(&a) {
                return Err(HarnessError::Config(format!("alpha {a} outside [0.8, 1)")));
            }
        }
        if self.k == Some(0) {
            return Err(HarnessError::Config("k must be positive".into()));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(HarnessError::Config(format!("threshold {t} outside (0, 1]")));
            }
        }
        if self.mcmc_steps == Some(0) {
            return Err(HarnessError::Config("mcmc_steps must be positive".into()));
        }
        Ok(())
    }
}

pub fn strategy_from_name(name: &str, params: &LearnerParams) -> Result<Strategy, HarnessError> {
    params.validate()?;
    Ok(match name {
        "naive" => Strategy::Naive,
        "rep-exact" => Strategy::RepExact {
            alpha: params.alpha.unwrap_or(0.8),
        },
        "rep-sampled" => Strategy::RepSampled {
            k: params.k,
            threshold: params.threshold.unwrap_or(RankingParams::DEFAULT_THRESHOLD),
            restart_cap: RankingParams::DEFAULT_RESTART_CAP,
            mcmc_steps: params.mcmc_steps,
        },
        "mm-simple" => Strategy::MmSimple,
        "mm-exact" => Strategy::MmExact,
        "mm-sampled" => Strategy::MmSampled { k: params.k },
        other => {
            return Err(HarnessError::Config(format!(
                "unknown learner {other:?} (expected one of {})",
                LEARNER_NAMES.join(", ")
            )))
        }
    })
}

fn strategy_params(strategy: &Strategy) -> String {
    let opt = |x: Option<usize>| x.map_or("default".to_string(), |v| v.to_string());
    match strategy {
        Strategy::RepExact { alpha } => params_string(&[("alpha", alpha.to_string())]),
        Strategy::RepSampled {
            k,
            threshold,
            mcmc_steps,
            ..
        } => params_string(&[
            ("k", opt(*k)),
            ("threshold", threshold.to_string()),
            ("mcmc_steps", mcmc_steps.map_or("default".into(), |s| s.to_string())),
        ]),
        Strategy::MmSampled { k } => params_string(&[("k", opt(*k))]),
        _ => params_string(&[]),
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub transcript: Transcript,
    /// Final proposal, restricted to the real agents of the input market.
    pub matching: Option<Matching>,
    pub restarts: usize,
}

impl RunResult {
    pub fn queries(&self) -> usize {
        self.transcript.queries()
    }

    pub fn outcome(&self) -> Outcome {
        self.transcript.outcome
    }
}

fn header(strategy: &Strategy, env: &dyn Environment, seed: u64) -> TranscriptHeader {
    TranscriptHeader {
        learner: strategy.name().into(),
        policy: env.policy_name().into(),
        seed,
        learner_seed: learner_seed(seed),
        rng: RNG_NAME.into(),
        n_workers: env.worker_quotas().len(),
        n_firms: env.firm_quotas().len(),
        params: strategy_params(strategy),
    }
}

fn drive(
    strategy: Strategy,
    env: &mut dyn Environment,
    known: Vec<(AgentId, Vec<usize>)>,
    seed: u64,
    max_rounds: Option<usize>,
) -> Result<(Transcript, usize), HarnessError> {
    let setup = LearnerSetup {
        worker_quotas: env.worker_quotas(),
        firm_quotas: env.firm_quotas(),
        known,
    };
    let n = setup.worker_quotas.len().max(setup.firm_quotas.len());
    let head = header(&strategy, env, seed);
    let mut learner = InteractiveLearner::new(setup, strategy, learner_seed(seed))?;
    let max = max_rounds.unwrap_or_else(|| default_max_rounds(n));
    let transcript = run_protocol(&mut learner, env, max, head)?;
    Ok((transcript, learner.restarts()))
}

/// Runs `strategy` against `market` under a lexicographic or uniform
/// adversary. A market with partial lists or unbalanced quotas is completed
/// with phantom agents first; phantom preferences are public.
pub fn learn_market(
    market: &Market,
    strategy: Strategy,
    policy: Policy,
    seed: u64,
    max_rounds: Option<usize>,
) -> Result<RunResult, HarnessError> {
    if market.is_full() {
        let mut env = TruthEnvironment::new(market.clone(), policy, seed);
        let (transcript, restarts) = drive(strategy, &mut env, Vec::new(), seed, max_rounds)?;
        let matching = transcript.final_matching().cloned();
        return Ok(RunResult {
            transcript,
            matching,
            restarts,
        });
    }
    let emb = complete_market(market);
    let completed = emb.completed();
    let known = completed
        .agents()
        .filter(|&a| emb.is_phantom(a))
        .map(|a| (a, completed.prefs(a).ranked().to_vec()))
        .collect();
    let mut env = TruthEnvironment::new(completed.clone(), policy, seed);
    let (transcript, restarts) = drive(strategy, &mut env, known, seed, max_rounds)?;
    let matching = match (transcript.outcome, transcript.final_matching()) {
        (Outcome::Stable, Some(m)) => Some(
            emb.restrict_matching(m)
                .map_err(|e| HarnessError::Failed(format!("restricting the result: {e}")))?,
        ),
        _ => None,
    };
    Ok(RunResult {
        transcript,
        matching,
        restarts,
    })
}

/// Runs `strategy` against the lower-bound adversary on `n` men and `n`
/// women; the women's common order is public.
pub fn learn_serial(
    n: usize,
    strategy: Strategy,
    seed: u64,
    max_rounds: Option<usize>,
) -> Result<RunResult, HarnessError> {
    let mut env = SerialDictatorshipEnv::new(n, seed);
    let known = env.public_preferences();
    let (transcript, restarts) = drive(strategy, &mut env, known, seed, max_rounds)?;
    let matching = transcript.final_matching().cloned();
    Ok(RunResult {
        transcript,
        matching,
        restarts,
    })
}

/// Dispatches on the adversary. The serial adversary draws its own
/// preferences and uses `market` only for its size, which must be one-to-one
/// with equal sides.
pub fn learn(
    market: &Market,
    strategy: Strategy,
    adversary: Adversary,
    seed: u64,
    max_rounds: Option<usize>,
) -> Result<RunResult, HarnessError> {
    match adversary {
        Adversary::Lex => learn_market(market, strategy, Policy::Lexicographic, seed, max_rounds),
        Adversary::Random => learn_market(market, strategy, Policy::RandomUniform, seed, max_rounds),
        Adversary::Serial => {
            if !market.is_one_to_one() || market.n_workers() != market.n_firms() {
                return Err(HarnessError::Config(
                    "the serial adversary needs a one-to-one market with equal sides".into(),
                ));
            }
            learn_serial(market_size(market), strategy, seed, max_rounds)
        }
    }
}

