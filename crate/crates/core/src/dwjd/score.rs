use std::collections::BTreeMap;

use crate::ctc::ctc_prefix_score;
use crate::error::Result;
use crate::types::{rank_order, DecodeConfig, Hypothesis, PosteriorLattice, Vocab};

/// `mu * s_tctc + (1 - mu) * s_att + beta * s_lm`.
#[inline]
pub fn combine_score(s_tctc: f64, s_att: f64, s_lm: f64, mu: f64, beta: f64) -> f64 {
    let lm = if beta == 0.0 { 0.0 } else { beta * s_lm };
    mu * s_tctc + (1.0 - mu) * s_att + lm
}

/// Decoder score of the extended prefix.
#[inline]
pub fn accumulate_att_score(parent_s_att: f64, log_p: f64) -> f64 {
    parent_s_att + log_p
}

/// End detection over complete hypotheses of length `n` (counted with
/// `<sos>` and `<eos>`): true when, for every `m` in `1..=M`, the best score
/// at length `n` trails the best at length `n - m` by more than `|D_end|`.
/// A missing length makes the test fail.
pub fn end_detect(finished: &[Hypothesis], n: usize, m: usize, d_end: f64) -> bool {
    if m == 0 || n <= m {
        return false;
    }
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for h in finished {
        let e = best.entry(h.seq.len()).or_insert(f64::NEG_INFINITY);
        *e = e.max(h.s_combined);
    }
    let Some(&at_n) = best.get(&n) else {
        return false;
    };
    (1..=m).all(|k| best.get(&(n - k)).is_some_and(|&shorter| at_n - shorter < d_end))
}

/// Replaces each T-CTC score with the full-utterance CTC prefix score,
/// recombines and re-ranks.
pub fn finalize_hypotheses(
    mut finished: Vec<Hypothesis>,
    lat: &PosteriorLattice,
    vocab: &Vocab,
    cfg: &DecodeConfig,
) -> Result<Vec<Hypothesis>> {
    for h in &mut finished {
        let s_ctc = ctc_prefix_score(&h.seq, lat, vocab)?;
        h.s_ctc = Some(s_ctc);
        h.s_combined = combine_score(s_ctc, h.s_att, h.s_lm, cfg.mu, cfg.beta);
    }
    finished.sort_by(rank_order);
    Ok(finished)
}
