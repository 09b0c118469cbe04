//! Dynamic-waiting joint CTC/attention beam search.

mod lm;
mod score;
mod session;

use std::sync::mpsc;

pub use lm::{BigramLm, LmScorer, UniformLm};
pub use score::{accumulate_att_score, combine_score, end_detect, finalize_hypotheses};
pub use session::{DecodeSession, SessionStats, SessionStatus};

use crate::attention::AttentionParams;
use crate::error::{Error, Result};
use crate::types::{DecodeConfig, Hypothesis, LabelId, PosteriorLattice, RepresentationStream, Vocab};

/// Attention decoder: `(r_i, q_{i-1}, y_{i-1}) -> (q_i, log p(.|...))`.
pub trait DecoderModel {
    /// `q_0`.
    fn initial_state(&self) -> Vec<f64>;

    fn attention_params(&self) -> &AttentionParams;

    /// Returns the next state and a log-distribution over the whole
    /// vocabulary. Labels that must never be emitted (`<blank>`, `<sos>`)
    /// carry `-inf`.
    fn decoder_step(&self, context: &[f64], prev_state: &[f64], prev_label: LabelId) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// A finished search together with everything it consumed.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    /// Complete hypotheses ranked by T-CTC combined score.
    pub hypotheses: Vec<Hypothesis>,
    pub stream: RepresentationStream,
    pub lattice: PosteriorLattice,
    pub stats: SessionStats,
    /// Frames available when the first expansion completed.
    pub first_expansion: Option<usize>,
}

/// Runs the search over a stream and lattice that may already be closed.
///
/// Fails with `FrameUnavailable` when the search needs a frame that an
/// open input does not hold yet.
pub fn dwjd_decode<M: DecoderModel + ?Sized, L: LmScorer + ?Sized>(
    stream: &RepresentationStream,
    lat: &PosteriorLattice,
    model: &M,
    lm: &L,
    vocab: &Vocab,
    cfg: &DecodeConfig,
) -> Result<Vec<Hypothesis>> {
    if stream.t_enc() != lat.len() {
        return Err(Error::DimMismatch {
            expected: stream.t_enc(),
            got: lat.len(),
        });
    }
    let mut session = DecodeSession::new(model, lm, vocab, cfg.clone(), stream.dim())?;
    for (h, p) in stream.frames().iter().zip(lat.frames()) {
        session.push_frame(h.clone(), p.clone())?;
    }
    if stream.is_closed() && lat.is_closed() {
        session.close();
    }
    match session.poll()? {
        SessionStatus::Finished => session.into_hypotheses(),
        SessionStatus::NeedInput => Err(Error::FrameUnavailable(stream.t_enc() + 1)),
    }
}

/// Message from a producer thread to a decode session.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameMessage {
    Frame { h: Vec<f64>, posterior: Vec<f64> },
    End,
}

/// Decodes while `producer` feeds frames from its own thread.
///
/// The session runs on the calling thread and blocks on the channel only
/// when it cannot make progress. A producer that hangs up without sending
/// [`FrameMessage::End`] ends the input as well.
pub fn decode_threaded<M, L, P>(
    model: &M,
    lm: &L,
    vocab: &Vocab,
    cfg: &DecodeConfig,
    rep_dim: usize,
    producer: P,
) -> Result<DecodeOutput>
where
    M: DecoderModel + ?Sized,
    L: LmScorer + ?Sized,
    P: FnOnce(mpsc::Sender<FrameMessage>) + Send,
{
    let mut session = DecodeSession::new(model, lm, vocab, cfg.clone(), rep_dim)?;
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        scope.spawn(move || producer(tx));
        loop {
            if session.poll()? == SessionStatus::Finished {
                return Ok(());
            }
            if session.stream().is_closed() {
                return Err(Error::Invariant("session waits on a closed stream".into()));
            }
            // block for one message, then take whatever else is queued
            let mut next = rx.recv();
            loop {
                match next {
                    Ok(FrameMessage::Frame { h, posterior }) => session.push_frame(h, posterior)?,
                    Ok(FrameMessage::End) | Err(_) => {
                        session.close();
                        break;
                    }
                }
                next = match rx.try_recv() {
                    Ok(msg) => Ok(msg),
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => Err(mpsc::RecvError),
                };
            }
        }
    })?;
    session.into_output()
}
