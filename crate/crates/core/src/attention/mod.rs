//! Energy function, the four monotonic attention mechanisms and the offline
//! location-aware baseline.
//!
//! Decode mode selects end-points left to right over a growing
//! [`RepresentationStream`](crate::types::RepresentationStream); training
//! mode computes expectations over complete inputs.

mod chunk;
mod decode;
mod dump;
pub(crate) mod energy;
mod expectation;
mod location;

use std::fmt;
use std::str::FromStr;

pub use chunk::{
    chunk_softmax, chunk_start, expected_chunk_weights, mocha_chunk_weights, order_window_start, smocha_chunk_weights,
};
pub use decode::{
    hma_decode_step, mocha_decode_step, mta_decode_step, smocha_decode_step, AttentionScan, DECODE_THRESHOLD,
};
pub use dump::{write_weight_csv, WeightRow};
pub use energy::{chunk_energy, energy, sigmoid, EnergyParams, StepEnergy};
pub use expectation::{
    hma_expectation, hma_expectation_recursive, mocha_expectation, mta_train_weights, one_hot_init, smocha_expectation,
    smocha_expectation_recursive, stop_distribution, weighted_context,
};
pub use location::{convolve, loaa_attend, LocationParams};

use crate::error::{Error, Result};

/// Which attention mechanism drives the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    /// Offline location-aware global attention.
    Loaa,
    /// Hard monotonic attention.
    Hma,
    /// Monotonic chunk-wise attention.
    Mocha,
    /// Stable MoChA with higher-order decoding chunks.
    SMocha,
    /// Monotonic truncated attention.
    Mta,
}

impl Mechanism {
    pub const STREAMING: [Mechanism; 4] = [Mechanism::Hma, Mechanism::Mocha, Mechanism::SMocha, Mechanism::Mta];

    pub fn is_streaming(self) -> bool {
        self != Mechanism::Loaa
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Loaa => "loaa",
            Mechanism::Hma => "hma",
            Mechanism::Mocha => "mocha",
            Mechanism::SMocha => "smocha",
            Mechanism::Mta => "mta",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loaa" => Ok(Mechanism::Loaa),
            "hma" => Ok(Mechanism::Hma),
            "mocha" => Ok(Mechanism::Mocha),
            "smocha" => Ok(Mechanism::SMocha),
            "mta" => Ok(Mechanism::Mta),
            other => Err(Error::InvalidConfig(format!("unknown attention mechanism {other:?}"))),
        }
    }
}

/// Number of consecutive decoding chunks used by sMoChA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChunkOrder {
    Finite(usize),
    /// Extend back to frame 1.
    Infinite,
}

impl fmt::Display for ChunkOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChunkOrder::Finite(n) => write!(f, "{n}"),
            ChunkOrder::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ChunkOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(ChunkOrder::Infinite),
            n => n
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .map(ChunkOrder::Finite)
                .ok_or_else(|| Error::InvalidConfig(format!("chunk order must be >= 1 or inf, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionConfig {
    pub mechanism: Mechanism,
    /// Chunk width `w` (MoChA, sMoChA).
    pub chunk_width: usize,
    /// Chunk order `n`; read only by sMoChA.
    pub chunk_order: ChunkOrder,
    /// Offset used when initializing random energy parameters.
    pub r_init: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            mechanism: Mechanism::Mta,
            chunk_width: 4,
            chunk_order: ChunkOrder::Finite(1),
            r_init: -4.0,
        }
    }
}

impl AttentionConfig {
    pub fn with_mechanism(mechanism: Mechanism) -> Self {
        Self {
            mechanism,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_width == 0 {
            return Err(Error::InvalidConfig("chunk width must be >= 1".into()));
        }
        if self.chunk_order == ChunkOrder::Finite(0) {
            return Err(Error::InvalidConfig("chunk order must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything an attention step needs from the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// Selection energy (HMA, MoChA, sMoChA, MTA).
    pub monotonic: EnergyParams,
    /// Chunk energy `u` (MoChA, sMoChA).
    pub chunk: EnergyParams,
    /// Location-aware baseline.
    pub location: LocationParams,
}

/// Outcome of one decode-mode attention step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStepResult {
    /// Selected end-point `t_i` (1-based); `None` when the input ran out
    /// without a trigger, and always for location-aware attention.
    pub endpoint: Option<usize>,
    /// First frame covered by `weights` (1-based).
    pub span_start: usize,
    pub weights: Vec<f64>,
    /// Label-wise representation vector `r_i`.
    pub context: Vec<f64>,
    /// First frame covered by `probs` (1-based).
    pub probs_start: usize,
    /// Selection probabilities `p_{i,j}` inspected this step.
    pub probs: Vec<f64>,
}

impl AttentionStepResult {
    /// `(frame, weight)` pairs, 1-based.
    pub fn frame_weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(|(k, &w)| (self.span_start + k, w))
    }
}
