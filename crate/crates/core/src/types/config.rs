use crate::attention::AttentionConfig;
use crate::error::{Error, Result};

/// Truncation threshold for the T-CTC prefix score.
pub const DEFAULT_THETA: f64 = 1e-8;
/// Number of shorter lengths compared by end detection.
pub const DEFAULT_END_M: usize = 3;
/// Score gap below which a longer complete hypothesis counts as hopeless.
pub const DEFAULT_END_D: f64 = -10.0;

/// Joint decoding parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    /// CTC weight `mu` in the combined score.
    pub mu: f64,
    /// Language model weight `beta`.
    pub beta: f64,
    pub beam_size: usize,
    pub theta: f64,
    pub end_m: usize,
    pub end_d: f64,
    pub attention: AttentionConfig,
    /// Maximum number of output steps, `<eos>` included.
    pub max_output_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            mu: 0.5,
            beta: 0.0,
            beam_size: 20,
            theta: DEFAULT_THETA,
            end_m: DEFAULT_END_M,
            end_d: DEFAULT_END_D,
            attention: AttentionConfig::default(),
            max_output_len: 200,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidConfig(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.beam_size == 0 {
            return Err(Error::InvalidConfig("beam size must be positive".into()));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::InvalidConfig(format!("theta must be >= 0, got {}", self.theta)));
        }
        if self.max_output_len == 0 {
            return Err(Error::InvalidConfig("max output length must be positive".into()));
        }
        self.attention.validate()
    }
}
