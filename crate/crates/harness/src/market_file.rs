//! Line-oriented market files.
//!
//! ```text
//! # comment
//! sides: W=2 F=2
//! quota F 1 2            # optional, default 1
//! pref W 0: 1 0          # most preferred first; omitted agents are unacceptable
//! pref F 1: 0
//! ```

use std::fmt::Write as _;

use smlab_core::market::{AgentId, Market, MarketError, Side};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketFileError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate entry {what}")]
    DuplicateEntry { line: usize, what: String },
    #[error("line {line}: index {index} out of range for side {side}")]
    IndexOutOfRange { line: usize, side: char, index: usize },
    #[error("line {line}: quota {quota} outside 1..={max}")]
    QuotaOutOfRange { line: usize, quota: usize, max: usize },
}

fn side_of(tok: &str) -> Option<Side> {
    match tok {
        "W" => Some(Side::Worker),
        "F" => Some(Side::Firm),
        _ => None,
    }
}

pub fn parse_market_file(text: &str) -> Result<Market, MarketFileError> {
    let mut sizes: Option<(usize, usize)> = None;
    let mut quotas: [Vec<Option<usize>>; 2] = [Vec::new(), Vec::new()];
    let mut prefs: [Vec<Option<Vec<usize>>>; 2] = [Vec::new(), Vec::new()];
    let idx = |s: Side| usize::from(s == Side::Firm);

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let parse_err = |reason: String| MarketFileError::Parse { line, reason };
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let size = |side: Side| -> Result<usize, MarketFileError> {
            let (w, f) = sizes.ok_or_else(|| parse_err("sides line must come first".into()))?;
            Ok(if side == Side::Worker { w } else { f })
        };
        let number = |tok: &str| -> Result<usize, MarketFileError> {
            tok.parse()
                .map_err(|_| parse_err(format!("expected a non-negative integer, got {tok:?}")))
        };
        if let Some(rest) = content.strip_prefix("sides:") {
            if sizes.is_some() {
                return Err(MarketFileError::DuplicateEntry {
                    line,
                    what: "sides".into(),
                });
            }
            let mut w = None;
            let mut f = None;
            for tok in rest.split_whitespace() {
                match tok.split_once('=') {
                    Some(("W", v)) => w = Some(number(v)?),
                    Some(("F", v)) => f = Some(number(v)?),
                    _ => return Err(parse_err(format!("unexpected token {tok:?}"))),
                }
            }
            let (w, f) = w
                .zip(f)
                .ok_or_else(|| parse_err("sides needs W=<int> and F=<int>".into()))?;
            sizes = Some((w, f));
            quotas = [vec![None; w], vec![None; f]];
            prefs = [vec![None; w], vec![None; f]];
        } else if let Some(rest) = content.strip_prefix("quota ") {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            let [s, a, q] = toks[..] else {
                return Err(parse_err("expected: quota (W|F) <index> <int>".into()));
            };
            let side = side_of(s).ok_or_else(|| parse_err(format!("unknown side {s:?}")))?;
            let a = number(a)?;
            let q = number(q)?;
            if a >= size(side)? {
                return Err(MarketFileError::IndexOutOfRange { line, side: side.tag(), index: a });
            }
            let max = size(side.opposite())?;
            if q == 0 || q > max {
                return Err(MarketFileError::QuotaOutOfRange { line, quota: q, max });
            }
            let slot = &mut quotas[idx(side)][a];
            if slot.is_some() {
                return Err(MarketFileError::DuplicateEntry {
                    line,
                    what: format!("quota {} {a}", side.tag()),
                });
            }
            *slot = Some(q);
        } else if let Some(rest) = content.strip_prefix("pref ") {
            let (head, list) = rest
                .split_once(':')
                .ok_or_else(|| parse_err("expected: pref (W|F) <index>: <idx> ...".into()))?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            let [s, a] = toks[..] else {
                return Err(parse_err("expected: pref (W|F) <index>:".into()));
            };
            let side = side_of(s).ok_or_else(|| parse_err(format!("unknown side {s:?}")))?;
            let a = number(a)?;
            if a >= size(side)? {
                return Err(MarketFileError::IndexOutOfRange { line, side: side.tag(), index: a });
            }
            let opp = size(side.opposite())?;
            let mut ranked = Vec::new();
            for tok in list.split_whitespace() {
                let x = number(tok)?;
                if x >= opp {
                    return Err(MarketFileError::IndexOutOfRange {
                        line,
                        side: side.opposite().tag(),
                        index: x,
                    });
                }
                if ranked.contains(&x) {
                    return Err(MarketFileError::DuplicateEntry {
                        line,
                        what: format!("{x} in the list of {} {a}", side.tag()),
                    });
                }
                ranked.push(x);
            }
            let slot = &mut prefs[idx(side)][a];
            if slot.is_some() {
                return Err(MarketFileError::DuplicateEntry {
                    line,
                    what: format!("pref {} {a}", side.tag()),
                });
            }
            *slot = Some(ranked);
        } else {
            return Err(parse_err(format!("unrecognized line {content:?}")));
        }
    }

    let last = text.lines().count().max(1);
    if sizes.is_none() {
        return Err(MarketFileError::Parse {
            line: last,
            reason: "missing sides line".into(),
        });
    }
    let [wq, fq] = quotas.map(|v| v.into_iter().map(|q| q.unwrap_or(1)).collect::<Vec<_>>());
    let [wp, fp] = prefs.map(|v| v.into_iter().map(Option::unwrap_or_default).collect::<Vec<_>>());
    Market::new(wq, fq, wp, fp).map_err(|e| match e {
        // a default quota of 1 can only fail when the opposite side is empty
        MarketError::InvalidQuota { quota, max, .. } => MarketFileError::QuotaOutOfRange {
            line: last,
            quota,
            max,
        },
        other => MarketFileError::Parse {
            line: last,
            reason: other.to_string(),
        },
    })
}

pub fn write_market_file(market: &Market) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sides: W={} F={}", market.n_workers(), market.n_firms());
    for a in market.agents() {
        let q = market.quota(a);
        if q != 1 {
            let _ = writeln!(out, "quota {} {} {q}", a.side.tag(), a.index);
        }
    }
    for a in market.agents() {
        let _ = write!(out, "pref {} {}:", a.side.tag(), a.index);
        for x in market.prefs(a).ranked() {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

/// Renders a matching with agent tags, e.g. `w0-f1 w1-f0`.
pub fn describe_matching(m: &smlab_core::Matching) -> String {
    m.pairs()
        .map(|(w, f)| format!("{}-{}", AgentId::worker(w), AgentId::firm(f)))
        .collect::<Vec<_>>()
        .join(" ")
}
