use std::sync::Arc;
use std::task::Poll;

use super::{advance, extend_chain, phi, Gamma};
use crate::error::{Error, Result};
use crate::types::{FrameRead, LabelId, LabelSequence, PosteriorLattice, Vocab};

/// Truncated forward table of one prefix.
///
/// `rows[j]` holds the prefix's own `(gamma^n, gamma^b)` for frames
/// `0..=last_frame` (frame 0 is the empty input). `frontier` holds every
/// level of the chain `(<sos>), (<sos>, y_2), ..., prefix` at `last_frame`,
/// so a child can extend the chain past it without revisiting older frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcForwardTable {
    prefix: LabelSequence,
    rows: Vec<Gamma>,
    frontier: Vec<Gamma>,
    psi: f64,
    endpoint: usize,
}

impl CtcForwardTable {
    /// Table of the bare `(<sos>)` prefix with end-point 1.
    pub fn root(vocab: &Vocab) -> Self {
        Self {
            prefix: LabelSequence::root(vocab),
            rows: vec![(0.0, 1.0)],
            frontier: vec![(0.0, 1.0)],
            psi: 1.0,
            endpoint: 1,
        }
    }

    pub fn prefix(&self) -> &LabelSequence {
        &self.prefix
    }

    /// Own forward probabilities for frames `0..=last_frame`.
    pub fn rows(&self) -> &[Gamma] {
        &self.rows
    }

    pub fn last_frame(&self) -> usize {
        self.rows.len() - 1
    }

    /// Truncated prefix probability `Psi`.
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// End-point `t_n`.
    pub fn endpoint(&self) -> usize {
        self.endpoint
    }

    /// `log Psi`.
    pub fn score(&self) -> f64 {
        self.psi.ln()
    }
}

/// Result of scoring one extension.
#[derive(Debug, Clone)]
pub struct TctcOutcome {
    pub score: f64,
    pub endpoint: usize,
    /// Table for the extended prefix; for `<eos>` this is the parent's.
    pub table: Arc<CtcForwardTable>,
}

/// Resumable T-CTC scan for `parent` extended by one label.
///
/// The scan runs from frame 1 and stops at the first frame `j` past the
/// parent end-point whose new prefix mass `Phi * p(y|h_j)` falls below
/// `theta`, or at the last frame. When the lattice has not delivered a
/// frame yet, [`poll`](Self::poll) returns `Pending` and picks up from that
/// frame on the next call.
#[derive(Debug, Clone)]
pub struct TctcScan {
    parent: Arc<CtcForwardTable>,
    prefix: LabelSequence,
    label: LabelId,
    eos: bool,
    repeat: bool,
    blank: LabelId,
    theta: f64,
    next: usize,
    rows: Vec<Gamma>,
    psi: f64,
    // parent chain stepped past parent.last_frame
    chain: Vec<Gamma>,
    chain_frame: usize,
}

impl TctcScan {
    pub fn new(parent: Arc<CtcForwardTable>, label: LabelId, vocab: &Vocab, theta: f64) -> Result<Self> {
        let prefix = parent.prefix.extended(vocab, label)?;
        let repeat = parent.prefix.last() == label;
        let chain = parent.frontier.clone();
        let chain_frame = parent.last_frame();
        Ok(Self {
            prefix,
            eos: label == vocab.eos_id(),
            label,
            repeat,
            blank: vocab.blank_id(),
            theta,
            next: 1,
            rows: vec![(0.0, 0.0)],
            psi: 0.0,
            chain,
            chain_frame,
            parent,
        })
    }

    /// Previous end-point `t_{n-1}`.
    pub fn prev_endpoint(&self) -> usize {
        self.parent.endpoint
    }

    /// Frame the scan will read next.
    pub fn next_frame(&self) -> usize {
        self.next
    }

    pub fn poll(&mut self, lat: &PosteriorLattice) -> Result<Poll<TctcOutcome>> {
        if self.label >= lat.vocab_size() {
            return Err(Error::UnknownLabel(self.label));
        }
        if self.eos {
            return self.poll_eos(lat);
        }
        let t_prev = self.parent.endpoint;
        loop {
            let j = self.next;
            let frame = match lat.get(j) {
                FrameRead::Pending => return Ok(Poll::Pending),
                FrameRead::Exhausted => {
                    if j == 1 {
                        return Err(Error::EmptyLattice);
                    }
                    return self.finish(j - 1, lat).map(Poll::Ready);
                }
                FrameRead::Ready(f) => f,
            };
            let p_label = frame[self.label];
            let p_blank = frame[self.blank];
            let parent_prev = self.parent_at(j - 1, lat);
            let ph = phi(parent_prev, self.repeat);
            let own = advance(self.rows[j - 1], ph, p_label, p_blank);
            self.rows.push(own);
            let gain = ph * p_label;
            self.psi += gain;
            self.next += 1;
            if j > t_prev && gain < self.theta {
                return self.finish(j, lat).map(Poll::Ready);
            }
        }
    }

    fn poll_eos(&mut self, lat: &PosteriorLattice) -> Result<Poll<TctcOutcome>> {
        let t_prev = self.parent.endpoint;
        for f in self.chain_frame + 1..=t_prev {
            match lat.get(f) {
                FrameRead::Ready(_) => {}
                FrameRead::Pending => return Ok(Poll::Pending),
                FrameRead::Exhausted => return Err(Error::EmptyLattice),
            }
        }
        let g = self.parent_at(t_prev, lat);
        Ok(Poll::Ready(TctcOutcome {
            score: (g.0 + g.1).ln(),
            endpoint: t_prev,
            table: Arc::clone(&self.parent),
        }))
    }

    /// Parent forward probabilities at frame `f`; frames past the parent's
    /// stored rows must already be in `lat`.
    fn parent_at(&mut self, f: usize, lat: &PosteriorLattice) -> Gamma {
        if f <= self.parent.last_frame() {
            return self.parent.rows[f];
        }
        let labels = self.parent.prefix.labels();
        while self.chain_frame < f {
            self.chain_frame += 1;
            let FrameRead::Ready(frame) = lat.get(self.chain_frame) else {
                unreachable!("chain frames precede the scan frame");
            };
            extend_chain(labels, &mut self.chain, frame, self.blank);
        }
        *self.chain.last().expect("chain holds <sos>")
    }

    fn finish(&mut self, endpoint: usize, lat: &PosteriorLattice) -> Result<TctcOutcome> {
        // bring the parent chain level with the new end-point for the frontier
        self.parent_at(endpoint, lat);
        let mut frontier = if endpoint <= self.parent.last_frame() {
            debug_assert_eq!(endpoint, self.parent.last_frame());
            self.parent.frontier.clone()
        } else {
            self.chain.clone()
        };
        frontier.push(self.rows[endpoint]);
        let table = CtcForwardTable {
            prefix: self.prefix.clone(),
            rows: std::mem::take(&mut self.rows),
            frontier,
            psi: self.psi,
            endpoint,
        };
        Ok(TctcOutcome {
            score: table.score(),
            endpoint,
            table: Arc::new(table),
        })
    }
}

/// One-shot T-CTC score of `parent` extended by `label`.
///
/// Fails with `FrameUnavailable` when the scan needs a frame the lattice
/// has not delivered; use [`TctcScan`] to wait for it instead.
pub fn tctc_prefix_score(
    parent: &Arc<CtcForwardTable>,
    label: LabelId,
    lat: &PosteriorLattice,
    vocab: &Vocab,
    theta: f64,
) -> Result<TctcOutcome> {
    let mut scan = TctcScan::new(Arc::clone(parent), label, vocab, theta)?;
    match scan.poll(lat)? {
        Poll::Ready(out) => Ok(out),
        Poll::Pending => Err(Error::FrameUnavailable(scan.next_frame().max(lat.len() + 1))),
    }
}
