use super::{extend_chain, initial_chain, phi};
use crate::error::{Error, Result};
use crate::types::{LabelSequence, PosteriorLattice, Vocab};

/// Full-utterance CTC prefix score `log sum_j Phi_j p(y_n|h_j)` over every
/// frame of `lat`.
///
/// A prefix ending in `<eos>` scores the complete sequence,
/// `log(gamma^n_T + gamma^b_T)` of the prefix without `<eos>`. The bare
/// `(<sos>)` prefix scores 0.
pub fn ctc_prefix_score(prefix: &LabelSequence, lat: &PosteriorLattice, vocab: &Vocab) -> Result<f64> {
    if lat.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let labels = prefix.labels();
    if let Some(&bad) = labels.iter().find(|&&l| l >= lat.vocab_size()) {
        return Err(Error::UnknownLabel(bad));
    }
    let blank = vocab.blank_id();
    if blank >= lat.vocab_size() {
        return Err(Error::UnknownLabel(blank));
    }
    let eos = prefix.is_complete(vocab);
    let chain = if eos { &labels[..labels.len() - 1] } else { labels };
    if chain.len() == 1 && !eos {
        return Ok(0.0);
    }
    let mut state = initial_chain(chain.len());
    if eos {
        for frame in lat.frames() {
            extend_chain(chain, &mut state, frame, blank);
        }
        let last = state[state.len() - 1];
        return Ok((last.0 + last.1).ln());
    }
    let n = chain.len() - 1;
    let label = chain[n];
    let repeat = chain[n - 1] == label;
    let mut psi = 0.0;
    for frame in lat.frames() {
        psi += phi(state[n - 1], repeat) * frame[label];
        extend_chain(chain, &mut state, frame, blank);
    }
    Ok(psi.ln())
}
