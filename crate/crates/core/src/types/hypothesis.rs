use std::cmp::Ordering;
use std::sync::Arc;

use super::sequence::LabelSequence;
use crate::ctc::CtcForwardTable;

/// End-points recorded when a label was appended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoints {
    /// Attention end-point; unchanged from the parent when the scan ran out of frames.
    pub t_att: usize,
    pub t_ctc: usize,
}

/// A partial or complete hypothesis in the joint beam search.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub seq: LabelSequence,
    /// Accumulated decoder log-probability.
    pub s_att: f64,
    /// Truncated CTC prefix log-score.
    pub s_tctc: f64,
    /// Full CTC prefix log-score, filled in by final rescoring.
    pub s_ctc: Option<f64>,
    pub s_lm: f64,
    pub s_combined: f64,
    /// Attention end-point (1-based frame; 1 before any frame is attended).
    pub t_att: usize,
    /// CTC end-point (1-based frame).
    pub t_ctc: usize,
    pub ctc_table: Arc<CtcForwardTable>,
    /// Decoder state `q_i` after the last label.
    pub decoder_state: Arc<Vec<f64>>,
    /// Previous attention weights, kept only by location-aware attention.
    pub prev_weights: Option<Arc<Vec<f64>>>,
    /// End-points per appended label, in order.
    pub history: Vec<Endpoints>,
    pub complete: bool,
}

impl Hypothesis {
    /// CTC component used in the combined score: full score once rescored.
    pub fn ctc_score(&self) -> f64 {
        self.s_ctc.unwrap_or(self.s_tctc)
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }
}

/// Ranking order: higher combined score first; ties go to the shorter
/// sequence, then to the lexicographically smaller label identifiers.
pub fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.s_combined
        .total_cmp(&a.s_combined)
        .then_with(|| a.seq.len().cmp(&b.seq.len()))
        .then_with(|| a.seq.labels().cmp(b.seq.labels()))
}
