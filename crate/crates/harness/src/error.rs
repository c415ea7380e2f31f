use std::io;

use servobench_core::ControlError;
use servobench_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("invalid constraint kinds: {0}")]
    InvalidKinds(String),
    #[error("settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
