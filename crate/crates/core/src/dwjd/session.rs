use std::sync::Arc;
use std::task::Poll;

use super::score::{accumulate_att_score, combine_score, end_detect};
use super::{DecoderModel, LmScorer};
use crate::attention::{AttentionScan, AttentionStepResult, Mechanism};
use crate::ctc::{CtcForwardTable, TctcOutcome, TctcScan};
use crate::error::{Error, Result};
use crate::types::{
    rank_order, validate_row, DecodeConfig, Endpoints, Hypothesis, LabelId, LabelSequence, PosteriorLattice,
    RepresentationStream, Vocab,
};

/// What a session needs to make progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    /// Blocked on a frame the producer has not appended, or on knowing
    /// whether more frames will come.
    NeedInput,
    Finished,
}

/// Work counters, handy for cost comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    /// Completed length-synchronous rounds.
    pub rounds: usize,
    /// Hypotheses expanded.
    pub expansions: usize,
    /// Selection-energy evaluations.
    pub attention_evaluations: usize,
    /// Sum of T-CTC end-points over scored extensions.
    pub ctc_frames: usize,
}

struct PendingScore {
    label: LabelId,
    scan: TctcScan,
    outcome: Option<TctcOutcome>,
}

enum Stage {
    Attend(AttentionScan),
    Score {
        att: AttentionStepResult,
        state: Arc<Vec<f64>>,
        log_probs: Vec<f64>,
        scores: Vec<PendingScore>,
    },
    Done(Vec<Hypothesis>),
}

struct Expansion {
    parent: usize,
    stage: Stage,
}

enum Phase {
    Expanding(Vec<Expansion>),
    Deciding,
    Done,
}

/// One online decode: owns the growing stream and lattice, the beam and
/// every suspended per-hypothesis computation.
///
/// The producer appends frames with [`push_frame`](Self::push_frame) and
/// signals the end with [`close`](Self::close); [`poll`](Self::poll) runs
/// until the search needs a frame that is not there yet or terminates.
/// Results never depend on how frames were batched.
pub struct DecodeSession<'a, M: DecoderModel + ?Sized, L: LmScorer + ?Sized> {
    model: &'a M,
    lm: &'a L,
    vocab: &'a Vocab,
    cfg: DecodeConfig,
    stream: RepresentationStream,
    lattice: PosteriorLattice,
    active: Vec<Hypothesis>,
    finished: Vec<Hypothesis>,
    phase: Phase,
    step: usize,
    first_expansion: Option<usize>,
    stats: SessionStats,
}

impl<'a, M: DecoderModel + ?Sized, L: LmScorer + ?Sized> DecodeSession<'a, M, L> {
    pub fn new(model: &'a M, lm: &'a L, vocab: &'a Vocab, cfg: DecodeConfig, rep_dim: usize) -> Result<Self> {
        cfg.validate()?;
        let root = Hypothesis {
            seq: LabelSequence::root(vocab),
            s_att: 0.0,
            s_tctc: 0.0,
            s_ctc: None,
            s_lm: 0.0,
            s_combined: 0.0,
            t_att: 1,
            t_ctc: 1,
            ctc_table: Arc::new(CtcForwardTable::root(vocab)),
            decoder_state: Arc::new(model.initial_state()),
            prev_weights: None,
            history: Vec::new(),
            complete: false,
        };
        let mut session = Self {
            model,
            lm,
            vocab,
            cfg,
            stream: RepresentationStream::new(rep_dim),
            lattice: PosteriorLattice::new(vocab.len()),
            active: vec![root],
            finished: Vec::new(),
            phase: Phase::Deciding,
            step: 0,
            first_expansion: None,
            stats: SessionStats::default(),
        };
        session.start_round();
        Ok(session)
    }

    /// Appends encoder output `h_j` and its CTC posterior row.
    pub fn push_frame(&mut self, h: Vec<f64>, posterior: Vec<f64>) -> Result<()> {
        if self.stream.is_closed() {
            return Err(Error::StreamClosed);
        }
        if h.len() != self.stream.dim() {
            return Err(Error::DimMismatch {
                expected: self.stream.dim(),
                got: h.len(),
            });
        }
        validate_row(&posterior, self.lattice.vocab_size(), self.lattice.len())?;
        self.stream.append_frame(h)?;
        self.lattice.push(posterior)
    }

    /// End of input: `T_max` becomes the number of frames pushed so far.
    pub fn close(&mut self) {
        self.stream.close();
        self.lattice.close();
    }

    pub fn stream(&self) -> &RepresentationStream {
        &self.stream
    }

    pub fn lattice(&self) -> &PosteriorLattice {
        &self.lattice
    }

    pub fn active(&self) -> &[Hypothesis] {
        &self.active
    }

    pub fn finished(&self) -> &[Hypothesis] {
        &self.finished
    }

    /// Output steps completed.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Frames that were available when the first hypothesis expansion
    /// completed.
    pub fn first_expansion(&self) -> Option<usize> {
        self.first_expansion
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, Phase::Done)
    }

    pub fn poll(&mut self) -> Result<SessionStatus> {
        loop {
            match std::mem::replace(&mut self.phase, Phase::Done) {
                Phase::Done => return Ok(SessionStatus::Finished),
                Phase::Deciding => match self.decide() {
                    Some(true) => {
                        self.phase = Phase::Done;
                    }
                    Some(false) => self.start_round(),
                    None => {
                        self.phase = Phase::Deciding;
                        return Ok(SessionStatus::NeedInput);
                    }
                },
                Phase::Expanding(mut round) => {
                    let mut all_done = true;
                    for e in &mut round {
                        all_done &= self.progress(e)?;
                    }
                    if all_done {
                        self.complete_round(round);
                        self.phase = Phase::Deciding;
                    } else {
                        self.phase = Phase::Expanding(round);
                        if self.stream.is_closed() {
                            return Err(Error::Invariant("search stalled on a closed stream".into()));
                        }
                        return Ok(SessionStatus::NeedInput);
                    }
                }
            }
        }
    }

    /// Ranked complete hypotheses, scored with T-CTC.
    pub fn into_hypotheses(self) -> Result<Vec<Hypothesis>> {
        if !self.is_finished() {
            return Err(Error::FrameUnavailable(self.stream.t_enc() + 1));
        }
        if self.finished.is_empty() {
            return Err(Error::NoFinishedHypothesis(self.step));
        }
        let mut out = self.finished;
        out.sort_by(rank_order);
        Ok(out)
    }

    /// Like [`into_hypotheses`](Self::into_hypotheses) but keeps the
    /// consumed inputs and counters.
    pub fn into_output(self) -> Result<super::DecodeOutput> {
        let stream = self.stream.clone();
        let lattice = self.lattice.clone();
        let stats = self.stats;
        let first_expansion = self.first_expansion;
        Ok(super::DecodeOutput {
            hypotheses: self.into_hypotheses()?,
            stream,
            lattice,
            stats,
            first_expansion,
        })
    }

    fn start_round(&mut self) {
        let cfg = &self.cfg.attention;
        let round = self
            .active
            .iter()
            .enumerate()
            .map(|(i, h)| Expansion {
                parent: i,
                stage: Stage::Attend(AttentionScan::new(
                    cfg,
                    h.decoder_state.as_ref().clone(),
                    h.t_att,
                    h.prev_weights.as_ref().map(|w| w.as_ref().clone()),
                )),
            })
            .collect();
        self.phase = Phase::Expanding(round);
    }

    /// Advances one expansion as far as the available frames allow; true
    /// once all its children are scored.
    fn progress(&mut self, e: &mut Expansion) -> Result<bool> {
        loop {
            match &mut e.stage {
                Stage::Done(_) => return Ok(true),
                Stage::Attend(scan) => {
                    let before = scan.evaluations();
                    let polled = scan.poll(&self.stream, self.model.attention_params())?;
                    self.stats.attention_evaluations += scan.evaluations() - before;
                    let Poll::Ready(att) = polled else {
                        return Ok(false);
                    };
                    let parent = &self.active[e.parent];
                    let (state, log_probs) =
                        self.model
                            .decoder_step(&att.context, &parent.decoder_state, parent.seq.last())?;
                    if log_probs.len() != self.vocab.len() {
                        return Err(Error::DimMismatch {
                            expected: self.vocab.len(),
                            got: log_probs.len(),
                        });
                    }
                    let mut scores = Vec::new();
                    for label in self.vocab.output_labels() {
                        if log_probs[label] == f64::NEG_INFINITY {
                            continue;
                        }
                        scores.push(PendingScore {
                            label,
                            scan: TctcScan::new(Arc::clone(&parent.ctc_table), label, self.vocab, self.cfg.theta)?,
                            outcome: None,
                        });
                    }
                    e.stage = Stage::Score {
                        att,
                        state: Arc::new(state),
                        log_probs,
                        scores,
                    };
                }
                Stage::Score { scores, .. } => {
                    let mut ready = true;
                    for s in scores.iter_mut().filter(|s| s.outcome.is_none()) {
                        match s.scan.poll(&self.lattice)? {
                            Poll::Ready(o) => {
                                self.stats.ctc_frames += o.endpoint;
                                s.outcome = Some(o);
                            }
                            Poll::Pending => ready = false,
                        }
                    }
                    if !ready {
                        return Ok(false);
                    }
                    let Stage::Score {
                        att,
                        state,
                        log_probs,
                        scores,
                    } = std::mem::replace(&mut e.stage, Stage::Done(Vec::new()))
                    else {
                        unreachable!()
                    };
                    let children = self.children(e.parent, att, state, &log_probs, scores)?;
                    self.stats.expansions += 1;
                    if self.first_expansion.is_none() {
                        self.first_expansion = Some(self.stream.t_enc());
                    }
                    e.stage = Stage::Done(children);
                }
            }
        }
    }

    fn children(
        &self,
        parent_idx: usize,
        att: AttentionStepResult,
        state: Arc<Vec<f64>>,
        log_probs: &[f64],
        scores: Vec<PendingScore>,
    ) -> Result<Vec<Hypothesis>> {
        let parent = &self.active[parent_idx];
        let t_att = att.endpoint.unwrap_or(parent.t_att);
        let prev_weights = (self.cfg.attention.mechanism == Mechanism::Loaa).then(|| Arc::new(att.weights.clone()));
        let mut out = Vec::with_capacity(scores.len());
        for s in scores {
            let o = s.outcome.expect("scored");
            let s_att = accumulate_att_score(parent.s_att, log_probs[s.label]);
            let s_lm = parent.s_lm + self.lm.score_next(&parent.seq, s.label);
            let s_combined = combine_score(o.score, s_att, s_lm, self.cfg.mu, self.cfg.beta);
            if s_combined.is_nan() || s_combined == f64::NEG_INFINITY {
                continue;
            }
            let mut history = parent.history.clone();
            history.push(Endpoints {
                t_att,
                t_ctc: o.endpoint,
            });
            out.push(Hypothesis {
                seq: parent.seq.extended(self.vocab, s.label)?,
                s_att,
                s_tctc: o.score,
                s_ctc: None,
                s_lm,
                s_combined,
                t_att,
                t_ctc: o.endpoint,
                ctc_table: o.table,
                decoder_state: Arc::clone(&state),
                prev_weights: prev_weights.clone(),
                history,
                complete: s.label == self.vocab.eos_id(),
            });
        }
        Ok(out)
    }

    fn complete_round(&mut self, round: Vec<Expansion>) {
        let mut candidates: Vec<Hypothesis> = round
            .into_iter()
            .flat_map(|e| match e.stage {
                Stage::Done(children) => children,
                _ => unreachable!("round completes only when every expansion is done"),
            })
            .collect();
        candidates.sort_by(rank_order);
        candidates.truncate(self.cfg.beam_size);
        let (done, open): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|h| h.complete);
        self.finished.extend(done);
        self.active = open;
        self.step += 1;
        self.stats.rounds += 1;
    }

    /// `Some(stop)` once the termination test can be decided with the
    /// frames seen so far.
    fn decide(&self) -> Option<bool> {
        if self.active.is_empty() || self.step >= self.cfg.max_output_len {
            return Some(true);
        }
        if !end_detect(&self.finished, self.step + 1, self.cfg.end_m, self.cfg.end_d) {
            return Some(false);
        }
        // keep expanding until every open chain's CTC end-point has reached
        // the last encoder output
        match self.stream.t_max() {
            Some(t_max) => Some(self.active.iter().all(|h| h.t_ctc >= t_max)),
            None if self.active.iter().all(|h| h.t_ctc >= self.stream.t_enc()) => None,
            None => Some(false),
        }
    }
}
