//! Command-line front end: market files, single protocol runs, benchmarks and
//! oracle queries.

pub mod bench;
pub mod market_file;
pub mod oracle;
pub mod run;

use smlab_core::constraints::ConstraintError;
use smlab_core::learners::LearnerError;
use smlab_core::protocol::ProtocolError;
use smlab_core::sampler::SamplerError;
use thiserror::Error;

pub use market_file::{parse_market_file, write_market_file, MarketFileError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    MarketFile(#[from] MarketFileError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{0}")]
    Cap(String),
    #[error("{0}")]
    Failed(String),
}

impl HarnessError {
    /// 2 parse/config, 3 protocol violation, 4 cap exceeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::MarketFile(_) | HarnessError::Io { .. } => 2,
            HarnessError::Protocol(e) if protocol_hit_cap(e) => 4,
            HarnessError::Protocol(_) => 3,
            HarnessError::Cap(_) => 4,
            HarnessError::Failed(_) => 1,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

fn constraint_cap(e: &ConstraintError) -> bool {
    matches!(e, ConstraintError::TooLarge { .. })
}

pub(crate) fn learner_hit_cap(e: &LearnerError) -> bool {
    match e {
        LearnerError::Constraint(c) => constraint_cap(c),
        LearnerError::Sampler(SamplerError::Constraint(c)) => constraint_cap(c),
        _ => false,
    }
}

fn protocol_hit_cap(e: &ProtocolError) -> bool {
    matches!(e, ProtocolError::Learner { source, .. } if learner_hit_cap(source))
}

impl From<ConstraintError> for HarnessError {
    fn from(e: ConstraintError) -> Self {
        if constraint_cap(&e) {
            HarnessError::Cap(e.to_string())
        } else {
            HarnessError::Config(e.to_string())
        }
    }
}

impl From<LearnerError> for HarnessError {
    fn from(e: LearnerError) -> Self {
        if learner_hit_cap(&e) {
            HarnessError::Cap(e.to_string())
        } else {
            HarnessError::Config(e.to_string())
        }
    }
}

pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<String, HarnessError> {
    std::fs::read_to_string(path.as_ref()).map_err(|e| HarnessError::io(path, e))
}
