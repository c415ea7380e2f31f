//! Servo sessions over the simulator, batch task runs, and the HTTP service
//! the operator console talks to.

pub mod batch;
pub mod error;
pub mod service;
pub mod session;
pub mod settings;

pub use error::HarnessError;
pub use session::{run_session, run_with_attempts, AttemptReport, Outcome, SessionConfig, SessionObserver, SessionReport};
