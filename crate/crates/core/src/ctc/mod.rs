//! CTC prefix scores: the full-utterance score, the truncated (T-CTC)
//! score with its resumable forward tables, and an exhaustive oracle.
//!
//! Probabilities inside the forward tables are linear; scores are natural
//! logs, with `-inf` for impossible prefixes.

mod full;
mod oracle;
mod table;

pub use full::ctc_prefix_score;
pub use oracle::{brute_force_prefix_oracle, MAX_ORACLE_FRAMES, MAX_ORACLE_SYMBOLS};
pub use table::{tctc_prefix_score, CtcForwardTable, TctcOutcome, TctcScan};

/// Forward probabilities `(gamma^n, gamma^b)` of one prefix at one frame.
pub type Gamma = (f64, f64);

/// Mass that may precede the first emission of the next label.
#[inline]
pub(crate) fn phi(parent: Gamma, repeat: bool) -> f64 {
    if repeat {
        parent.1
    } else {
        parent.1 + parent.0
    }
}

#[inline]
pub(crate) fn advance(prev: Gamma, phi: f64, p_label: f64, p_blank: f64) -> Gamma {
    ((prev.0 + phi) * p_label, (prev.1 + prev.0) * p_blank)
}

/// Steps every level of a prefix chain `(<sos>, y_2, ..., y_n)` one frame.
pub(crate) fn extend_chain(labels: &[usize], state: &mut [Gamma], frame: &[f64], blank: usize) {
    let p_blank = frame[blank];
    let mut parent_prev = state[0];
    state[0] = (0.0, state[0].1 * p_blank);
    for i in 1..state.len() {
        let own_prev = state[i];
        let ph = phi(parent_prev, labels[i - 1] == labels[i]);
        state[i] = advance(own_prev, ph, frame[labels[i]], p_blank);
        parent_prev = own_prev;
    }
}

/// Chain state before any frame: only `<sos>` holds mass, as a blank.
pub(crate) fn initial_chain(levels: usize) -> Vec<Gamma> {
    let mut state = vec![(0.0, 0.0); levels];
    state[0] = (0.0, 1.0);
    state
}
