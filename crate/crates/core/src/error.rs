use thiserror::Error;

/// Errors raised by the decoding engine and its file formats.
///
/// Frame numbers in messages are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Carries the 0-based frame index; displayed 1-based.
    #[error("frame {} is not a probability distribution", .0 + 1)]
    NonStochasticFrame(usize),
    #[error("frame {frame} has {got} columns, expected {expected}")]
    WidthMismatch { frame: usize, expected: usize, got: usize },
    #[error("stream is closed, no further frames can be appended")]
    StreamClosed,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("representation stream is empty")]
    EmptyStream,
    #[error("posterior lattice is empty")]
    EmptyLattice,
    #[error("input contains no frames")]
    EmptyInput,
    #[error("energy weight vector v has zero norm")]
    ZeroVectorV,
    #[error("label {0} is not valid here")]
    UnknownLabel(usize),
    #[error("instance too large for exhaustive enumeration ({frames} frames, {symbols} symbols)")]
    TooLarge { frames: usize, symbols: usize },
    #[error("frame {0} has not been produced yet")]
    FrameUnavailable(usize),
    #[error("no hypothesis reached <eos> within {0} output steps")]
    NoFinishedHypothesis(usize),
    #[error("reference sequence is empty, error rate is undefined")]
    EmptyReference,
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
