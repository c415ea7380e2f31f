use servobench_core::ProbabilityMap;

use super::{ProviderError, SegProvider};
use crate::world::Frame;

/// Ground truth straight from the renderer's label buffer.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleProvider;

impl SegProvider for OracleProvider {
    fn provide(&self, frame: &Frame, prompt: &str) -> Result<ProbabilityMap, ProviderError> {
        Ok(frame.oracle_mask(prompt))
    }
}
