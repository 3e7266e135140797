//! The interaction loop and its transcript.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::environments::{EnvError, Environment};
use crate::learners::{Learner, LearnerError};
use crate::market::{AgentId, Matching, QueryResponse, Side};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("round {round}: {source}")]
    Learner { round: usize, source: LearnerError },
    #[error("round {round}: {source}")]
    Environment { round: usize, source: EnvError },
    #[error("round {round}: environment declared a matching stable that fails verification")]
    Unverified { round: usize },
}

impl ProtocolError {
    pub fn round(&self) -> usize {
        match *self {
            ProtocolError::Learner { round, .. }
            | ProtocolError::Environment { round, .. }
            | ProtocolError::Unverified { round } => round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptHeader {
    pub learner: String,
    pub policy: String,
    pub seed: u64,
    pub learner_seed: u64,
    pub rng: String,
    pub n_workers: usize,
    pub n_firms: usize,
    /// Free-form `key=value` list without spaces, `-` when empty.
    pub params: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub t: usize,
    pub proposal: Matching,
    pub response: QueryResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Stable,
    MaxRounds,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Stable => "stable",
            Outcome::MaxRounds => "max_rounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub rounds: Vec<Round>,
    pub outcome: Outcome,
}

impl Transcript {
    pub fn queries(&self) -> usize {
        self.rounds.len()
    }

    pub fn final_matching(&self) -> Option<&Matching> {
        self.rounds.last().map(|r| &r.proposal)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, TranscriptError> {
        text.parse()
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        writeln!(f, "# smlab transcript")?;
        writeln!(
            f,
            "learner={} policy={} seed={} learner_seed={} rng={} workers={} firms={} params={}",
            h.learner, h.policy, h.seed, h.learner_seed, h.rng, h.n_workers, h.n_firms, h.params
        )?;
        for r in &self.rounds {
            writeln!(f, "t={} propose={} response={}", r.t, r.proposal, r.response)?;
        }
        writeln!(f, "outcome={} queries={}", self.outcome.name(), self.queries())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transcript line {line}: {reason}")]
pub struct TranscriptError {
    pub line: usize,
    pub reason: String,
}

fn fields(line: &str) -> Vec<(&str, &str)> {
    line.split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect()
}

fn parse_matching(text: &str) -> Option<Matching> {
    let inner = text.strip_prefix('[')?.strip_suffix(']')?;
    let mut m = Matching::new();
    if inner.is_empty() {
        return Some(m);
    }
    for pair in inner.split("),(") {
        let pair = pair.trim_start_matches('(').trim_end_matches(')');
        let (w, f) = pair.split_once(',')?;
        m.insert(w.parse().ok()?, f.parse().ok()?);
    }
    Some(m)
}

fn parse_response(text: &str) -> Option<QueryResponse> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    match parts.as_slice() {
        ["stable"] => Some(QueryResponse::Stable),
        ["block", w, f] => Some(QueryResponse::Blocking {
            worker: w.parse().ok()?,
            firm: f.parse().ok()?,
        }),
        ["iblock", side, idx] => {
            let index = idx.parse().ok()?;
            let side = match *side {
                "W" => Side::Worker,
                "F" => Side::Firm,
                _ => return None,
            };
            Some(QueryResponse::IndividuallyBlocking(AgentId { side, index }))
        }
        _ => None,
    }
}

impl FromStr for Transcript {
    type Err = TranscriptError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut header = None;
        let mut rounds = Vec::new();
        let mut outcome = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: &str| TranscriptError {
                line: line_no,
                reason: reason.to_string(),
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("learner=") {
                let kv = fields(line);
                let get = |k: &str| {
                    kv.iter()
                        .find(|(key, _)| *key == k)
                        .map(|(_, v)| v.to_string())
                        .ok_or_else(|| err(&format!("missing {k}")))
                };
                let num = |k: &str| -> Result<u64, TranscriptError> {
                    get(k)?.parse().map_err(|_| err(&format!("bad {k}")))
                };
                header = Some(TranscriptHeader {
                    learner: get("learner")?,
                    policy: get("policy")?,
                    seed: num("seed")?,
                    learner_seed: num("learner_seed")?,
                    rng: get("rng")?,
                    n_workers: num("workers")? as usize,
                    n_firms: num("firms")? as usize,
                    params: get("params")?,
                });
            } else if let Some(rest) = line.strip_prefix("t=") {
                let (t, rest) = rest.split_once(' ').ok_or_else(|| err("truncated round"))?;
                let rest = rest.trim_start();
                let rest = rest.strip_prefix("propose=").ok_or_else(|| err("missing propose"))?;
                let (m, rest) = rest.split_once(' ').ok_or_else(|| err("missing response"))?;
                let resp = rest
                    .trim_start()
                    .strip_prefix("response=")
                    .ok_or_else(|| err("missing response"))?;
                rounds.push(Round {
                    t: t.parse().map_err(|_| err("bad round number"))?,
                    proposal: parse_matching(m).ok_or_else(|| err("bad matching"))?,
                    response: parse_response(resp).ok_or_else(|| err("bad response"))?,
                });
            } else if line.starts_with("outcome=") {
                let kv = fields(line);
                outcome = Some(match kv.first().map(|(_, v)| *v) {
                    Some("stable") => Outcome::Stable,
                    Some("max_rounds") => Outcome::MaxRounds,
                    _ => return Err(err("bad outcome")),
                });
                if let Some((_, q)) = kv.iter().find(|(k, _)| *k == "queries") {
                    if q.parse::<usize>().ok() != Some(rounds.len()) {
                        return Err(err("query count disagrees with the rounds"));
                    }
                }
            } else {
                return Err(err("unrecognized line"));
            }
        }
        let last = text.lines().count();
        Ok(Transcript {
            header: header.ok_or(TranscriptError {
                line: last,
                reason: "missing header".into(),
            })?,
            rounds,
            outcome: outcome.ok_or(TranscriptError {
                line: last,
                reason: "missing outcome".into(),
            })?,
        })
    }
}

/// `10 n^3 ceil(log2(n + 1))` for the larger side `n`.
pub fn default_max_rounds(n: usize) -> usize {
    let n = n.max(1);
    let log = usize::BITS - n.leading_zeros(); // ceil(log2(n + 1))
    10 * n * n * n * log as usize
}

/// Alternates proposals and responses until the environment reports a
/// stable matching (verified independently) or `max_rounds` pass.
pub fn run_protocol<L: Learner + ?Sized, E: Environment + ?Sized>(
    learner: &mut L,
    env: &mut E,
    max_rounds: usize,
    header: TranscriptHeader,
) -> Result<Transcript, ProtocolError> {
    run_protocol_observed(learner, env, max_rounds, header, |_, _| {})
}

/// As [`run_protocol`], calling `hook` once before the first round and after
/// every observed response.
pub fn run_protocol_observed<L, E, H>(
    learner: &mut L,
    env: &mut E,
    max_rounds: usize,
    header: TranscriptHeader,
    mut hook: H,
) -> Result<Transcript, ProtocolError>
where
    L: Learner + ?Sized,
    E: Environment + ?Sized,
    H: FnMut(&L, Option<&Round>),
{
    let mut rounds = Vec::new();
    hook(learner, None);
    for t in 1..=max_rounds {
        let proposal = learner
            .propose()
            .map_err(|source| ProtocolError::Learner { round: t, source })?;
        let response = env
            .respond(&proposal)
            .map_err(|source| ProtocolError::Environment { round: t, source })?;
        learner
            .observe(response)
            .map_err(|source| ProtocolError::Learner { round: t, source })?;
        rounds.push(Round {
            t,
            proposal,
            response,
        });
        hook(learner, rounds.last());
        if response == QueryResponse::Stable {
            let last = &rounds.last().unwrap().proposal;
            if env.verify_stable(last) != Some(true) {
                return Err(ProtocolError::Unverified { round: t });
            }
            return Ok(Transcript {
                header,
                rounds,
                outcome: Outcome::Stable,
            });
        }
    }
    Ok(Transcript {
        header,
        rounds,
        outcome: Outcome::MaxRounds,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("round {round}: learner proposed {got}, transcript has {expected}")]
    Diverged {
        round: usize,
        expected: String,
        got: String,
    },
    #[error("round {round}: {source}")]
    Learner { round: usize, source: LearnerError },
}

/// Feeds the recorded responses to `learner` and checks that it proposes the
/// recorded matchings.
pub fn replay<L: Learner + ?Sized>(transcript: &Transcript, learner: &mut L) -> Result<(), ReplayError> {
    for r in &transcript.rounds {
        let got = learner.propose().map_err(|source| ReplayError::Learner {
            round: r.t,
            source,
        })?;
        if got != r.proposal {
            return Err(ReplayError::Diverged {
                round: r.t,
                expected: r.proposal.to_string(),
                got: got.to_string(),
            });
        }
        learner.observe(r.response).map_err(|source| ReplayError::Learner {
            round: r.t,
            source,
        })?;
    }
    Ok(())
}

/// Short parameter string for headers, e.g. `alpha=0.8`.
pub fn params_string(pairs: &[(&str, String)]) -> String {
    if pairs.is_empty() {
        return "-".into();
    }
    let mut s = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}
