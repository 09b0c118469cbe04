//! Vocabulary, label sequences, streams and hypotheses shared by every module.

mod config;
mod hypothesis;
mod lattice;
mod sequence;
mod stream;
mod vocab;

pub use config::{DecodeConfig, DEFAULT_END_D, DEFAULT_END_M, DEFAULT_THETA};
pub use hypothesis::{rank_order, Endpoints, Hypothesis};
pub use lattice::{validate_lattice, validate_row, PosteriorLattice};
pub use sequence::LabelSequence;
pub use stream::{FrameRead, RepresentationStream};
pub use vocab::{LabelId, Vocab, BLANK_TOKEN, EOS_TOKEN, SOS_TOKEN};
