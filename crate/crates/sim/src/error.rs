use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("joint {joint} at {value} rad is outside [{low}, {high}]")]
    JointLimitViolation { joint: usize, value: f64, low: f64, high: f64 },
    #[error("expected {expected} joint values, got {got}")]
    JointCountMismatch { expected: usize, got: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}
