//! Probability-map sources behind one interface.

mod corrupt;
mod oracle;
pub mod remote;

use std::fmt;
use std::str::FromStr;

use servobench_core::ProbabilityMap;
use thiserror::Error;

use crate::world::Frame;

pub use corrupt::{corrupt, gaussian_blur, CorruptProvider, CorruptionProfile};
pub use oracle::OracleProvider;
pub use remote::RemoteProvider;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider timed out after retry: {0}")]
    Timeout(String),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("expected a {expected_w}x{expected_h} map, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
}

/// Produces a prompt-conditioned probability map for a rendered frame.
/// Implementations accept concurrent calls.
pub trait SegProvider: Send + Sync {
    fn provide(&self, frame: &Frame, prompt: &str) -> Result<ProbabilityMap, ProviderError>;
}

/// Provider selection as written on the command line:
/// `oracle`, `corrupt`, or `remote:HOST:PORT`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderSpec {
    Oracle,
    Corrupt(CorruptionProfile),
    Remote(String),
}

impl ProviderSpec {
    pub fn build(&self) -> Box<dyn SegProvider> {
        match self {
            ProviderSpec::Oracle => Box::new(OracleProvider),
            ProviderSpec::Corrupt(p) => Box::new(CorruptProvider::new(p.clone())),
            ProviderSpec::Remote(addr) => Box::new(RemoteProvider::new(addr.clone())),
        }
    }
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "oracle" => Ok(ProviderSpec::Oracle),
            "corrupt" => Ok(ProviderSpec::Corrupt(CorruptionProfile::standard())),
            other => match other.strip_prefix("remote:") {
                Some(addr) if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) => {
                    Ok(ProviderSpec::Remote(addr.to_string()))
                }
                _ => Err(format!("unknown provider `{other}` (expected oracle, corrupt or remote:HOST:PORT)")),
            },
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Oracle => f.write_str("oracle"),
            ProviderSpec::Corrupt(_) => f.write_str("corrupt"),
            ProviderSpec::Remote(a) => write!(f, "remote:{a}"),
        }
    }
}
