//! Streaming hybrid CTC/attention decoding.
//!
//! The crate covers the monotonic attention family used for streaming
//! decoding, exact and truncated CTC prefix scoring, the dynamic-waiting
//! joint beam search, a latency-controlled toy encoder for simulation, and
//! error-rate and RTF metrics.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod ctc;
pub mod dwjd;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod sim;
pub mod types;

pub use attention::{AttentionConfig, AttentionParams, ChunkOrder, Mechanism};
pub use ctc::{brute_force_prefix_oracle, ctc_prefix_score, tctc_prefix_score, CtcForwardTable, TctcOutcome};
pub use dwjd::{dwjd_decode, finalize_hypotheses, DecodeOutput, DecoderModel, LmScorer};
pub use error::{Error, Result};
pub use sim::{StreamingConfig, ToyConfig, ToyModel};
pub use types::{
    DecodeConfig, FrameRead, Hypothesis, LabelId, LabelSequence, PosteriorLattice, RepresentationStream, Vocab,
};
