//! Exact oracles behind `smlab oracle`.
//!
//! Text forms: relations `0<1,1<2`; general constraints `0<{1,2};3<{0}`
//! (braces optional for one element); formulas `1 -2 3; -1` with clauses
//! separated by `;` and literals by spaces.

use std::fmt;

use num_rational::BigRational;
use smlab_core::constraints::{
    count_extensions_poset, decide_mixed_consistent, last_frac, pref_frac, reduce_3sat, Cnf,
    ConstraintSet, GeneralConstraint, Poset,
};
use smlab_core::market::{all_stable_matchings, Market, Matching};

use crate::HarnessError;

/// Largest side and quota accepted by [`stable_all`].
pub const STABLE_ALL_MAX_SIDE: usize = 5;
pub const STABLE_ALL_MAX_QUOTA: usize = 2;

fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn element(tok: &str) -> Result<usize, HarnessError> {
    tok.trim()
        .parse()
        .map_err(|_| config(format!("expected an element index, got {tok:?}")))
}

pub fn parse_relations(text: &str) -> Result<Vec<(usize, usize)>, HarnessError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|rel| {
            let (a, b) = rel
                .split_once('<')
                .ok_or_else(|| config(format!("expected a<b, got {rel:?}")))?;
            Ok((element(a)?, element(b)?))
        })
        .collect()
}

pub fn parse_constraints(n: usize, text: &str) -> Result<ConstraintSet, HarnessError> {
    let mut cs = ConstraintSet::new(n);
    for part in text.split(';').filter(|s| !s.trim().is_empty()) {
        let (x, set) = part
            .split_once('<')
            .ok_or_else(|| config(format!("expected x<{{..}}, got {part:?}")))?;
        let set = set.trim().trim_start_matches('{').trim_end_matches('}');
        let set = set
            .split(',')
            .map(element)
            .collect::<Result<Vec<_>, _>>()?;
        cs.push(GeneralConstraint::new(element(x)?, set)?)?;
    }
    Ok(cs)
}

pub fn parse_cnf(text: &str, vars: Option<usize>) -> Result<Cnf, HarnessError> {
    let clauses = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|cl| {
            cl.split_whitespace()
                .map(|l| l.parse::<i32>().map_err(|_| config(format!("bad literal {l:?}"))))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let used = clauses
        .iter()
        .flatten()
        .map(|l| l.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    Ok(Cnf {
        vars: vars.unwrap_or(used),
        clauses,
    })
}

fn ratio_text(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn count_extensions(n: usize, relations: &str) -> Result<String, HarnessError> {
    let poset = Poset::new(n, &parse_relations(relations)?)?;
    Ok(count_extensions_poset(&poset)?.to_string())
}

pub fn pref_frac_text(n: usize, relations: &str, a: usize, b: usize) -> Result<String, HarnessError> {
    let poset = Poset::new(n, &parse_relations(relations)?)?;
    Ok(ratio_text(&pref_frac(&poset, a, b)?))
}

pub fn last_frac_text(
    n: usize,
    constraints: &str,
    remaining: &[usize],
    a: usize,
) -> Result<String, HarnessError> {
    let cs = parse_constraints(n, constraints)?;
    if !remaining.contains(&a) {
        return Err(config(format!("{a} is not among the remaining elements")));
    }
    Ok(ratio_text(&last_frac(&cs, remaining, a)?))
}

pub fn stable_all(market: &Market) -> Result<Vec<Matching>, HarnessError> {
    let side = market.n_workers().max(market.n_firms());
    let quota = market.agents().map(|a| market.quota(a)).max().unwrap_or(0);
    if side > STABLE_ALL_MAX_SIDE || quota > STABLE_ALL_MAX_QUOTA {
        return Err(HarnessError::Cap(format!(
            "stable-all enumerates markets with at most {STABLE_ALL_MAX_SIDE} agents per side \
             and quotas at most {STABLE_ALL_MAX_QUOTA}"
        )));
    }
    Ok(all_stable_matchings(market))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SatCheck {
    pub truth_table: bool,
    pub orders: bool,
}

impl SatCheck {
    pub fn agrees(&self) -> bool {
        self.truth_table == self.orders
    }
}

impl fmt::Display for SatCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = |b: bool| if b { "SAT" } else { "UNSAT" };
        if self.agrees() {
            write!(f, "{} agrees", word(self.truth_table))
        } else {
            write!(
                f,
                "DISAGREE truth-table={} orders={}",
                word(self.truth_table),
                word(self.orders)
            )
        }
    }
}

/// Truth table against order existence for the reduced instance.
pub fn sat_check(cnf: &Cnf) -> Result<SatCheck, HarnessError> {
    let instance = reduce_3sat(cnf)?;
    let orders = decide_mixed_consistent(&instance)?;
    Ok(SatCheck {
        truth_table: cnf.brute_force_satisfiable(),
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_market_file;

    #[test]
    fn counts_and_fractions() {
        assert_eq!(count_extensions(4, "").unwrap(), "24");
        assert_eq!(count_extensions(3, "0<1").unwrap(), "3");
        assert_eq!(count_extensions(3, "0<1,1<2").unwrap(), "1");
        assert_eq!(pref_frac_text(3, "", 0, 2).unwrap(), "1/2");
        assert_eq!(pref_frac_text(3, "0<1", 1, 0).unwrap(), "0/1");
        // consistent orders: 012 021 102 201
        assert_eq!(last_frac_text(3, "0<{1,2}", &[0, 1, 2], 0).unwrap(), "0/1");
        assert_eq!(last_frac_text(3, "0<{1,2}", &[0, 1, 2], 1).unwrap(), "1/2");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_relations("0-1"), Err(HarnessError::Config(_))));
        assert!(matches!(count_extensions(2, "0<1,1<0"), Err(HarnessError::Config(_))));
        assert!(matches!(count_extensions(40, ""), Err(HarnessError::Cap(_))));
        assert!(parse_constraints(3, "0<{0}").is_err());
    }

    #[test]
    fn stable_all_on_identical_pair() {
        let m = parse_market_file("sides: W=2 F=2\npref W 0: 0 1\npref W 1: 0 1\npref F 0: 0 1\npref F 1: 0 1\n")
            .unwrap();
        let all = stable_all(&m).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].to_string(), "[(0,0),(1,1)]");
    }

    #[test]
    fn sat_agreement() {
        assert_eq!(sat_check(&parse_cnf("1; -1", None).unwrap()).unwrap().to_string(), "UNSAT agrees");
        assert_eq!(sat_check(&parse_cnf("1 2; -1", None).unwrap()).unwrap().to_string(), "SAT agrees");
        assert!(matches!(sat_check(&parse_cnf("1 2 3; 4 5", None).unwrap()), Err(HarnessError::Cap(_))));
    }
}
