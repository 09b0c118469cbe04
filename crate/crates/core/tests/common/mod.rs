#![allow(dead_code)]

use rand::Rng;
use streamdec_core::attention::{AttentionConfig, Mechanism};
use streamdec_core::sim::{chunked_encode, synth_utterance, ChunkedOutput, FrameLayout, StreamingConfig, Utterance};
use streamdec_core::{DecodeConfig, Hypothesis, LabelSequence, PosteriorLattice, ToyModel, Vocab};

pub const CONTENT: [&str; 5] = ["a", "b", "c", "d", "e"];

pub fn vocab(k: usize) -> Vocab {
    Vocab::with_content(&CONTENT[..k]).unwrap()
}

/// Rows uniform on the simplex of blank and content labels; `<sos>` and
/// `<eos>` keep zero mass.
pub fn random_lattice<R: Rng>(rng: &mut R, vocab: &Vocab, t: usize) -> PosteriorLattice {
    let rows = (0..t)
        .map(|_| {
            let mut row = vec![0.0; vocab.len()];
            let mut total = 0.0;
            for (id, slot) in row.iter_mut().enumerate() {
                if id == vocab.sos_id() || id == vocab.eos_id() {
                    continue;
                }
                // exponential draws normalize to a uniform simplex point
                let x = -(1.0 - rng.random::<f64>()).ln();
                *slot = x;
                total += x;
            }
            row.iter_mut().for_each(|x| *x /= total);
            row
        })
        .collect();
    PosteriorLattice::from_frames(vocab.len(), rows).unwrap()
}

/// `len` content labels after `<sos>`, with `<eos>` appended when `complete`.
pub fn random_prefix<R: Rng>(rng: &mut R, vocab: &Vocab, len: usize, complete: bool) -> LabelSequence {
    let content = vocab.content_labels();
    let mut labels: Vec<usize> = (0..len).map(|_| content[rng.random_range(0..content.len())]).collect();
    if complete {
        labels.push(vocab.eos_id());
    }
    LabelSequence::from_labels(vocab, &labels).unwrap()
}

pub fn decode_cfg(mechanism: Mechanism, beam: usize) -> DecodeConfig {
    DecodeConfig {
        beam_size: beam,
        attention: AttentionConfig::with_mechanism(mechanism),
        ..Default::default()
    }
}

pub fn toy_utterance<R: Rng>(model: &ToyModel, rng: &mut R, n_labels: usize) -> (Utterance, ChunkedOutput) {
    let utt = synth_utterance(model, rng, n_labels, &FrameLayout::default()).unwrap();
    let enc = chunked_encode(&utt.raw, &StreamingConfig::default(), model).unwrap();
    (utt, enc)
}

/// Everything that makes up a ranked result, floats as bit patterns.
pub fn fingerprint(hyps: &[Hypothesis]) -> Vec<(Vec<usize>, [u64; 4], Option<u64>, usize, usize, Vec<(usize, usize)>)> {
    hyps.iter()
        .map(|h| {
            (
                h.seq.labels().to_vec(),
                [
                    h.s_att.to_bits(),
                    h.s_tctc.to_bits(),
                    h.s_lm.to_bits(),
                    h.s_combined.to_bits(),
                ],
                h.s_ctc.map(f64::to_bits),
                h.t_att,
                h.t_ctc,
                h.history.iter().map(|e| (e.t_att, e.t_ctc)).collect(),
            )
        })
        .collect()
}
