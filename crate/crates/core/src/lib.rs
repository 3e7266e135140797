//! Interactive learning of stable matchings from blocking-pair feedback.
//!
//! A learner proposes matchings; an environment holding the true preferences
//! answers with `Stable` or one blocking pair. The learners here keep per-agent
//! constraint sets derived from those answers and pick speculative preference
//! orders that summarize the remaining possibilities.

pub mod constraints;
pub mod da;
pub mod embedding;
pub mod environments;
pub mod generate;
pub mod learners;
pub mod market;
pub mod protocol;
pub mod rng;
pub mod sampler;

pub use market::{AgentId, Market, MarketError, Matching, PreferenceOrder, QueryResponse, Side};
