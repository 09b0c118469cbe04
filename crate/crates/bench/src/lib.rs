//! Shared fixtures for the decoding benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use streamdec_core::sim::{chunked_encode, synth_utterance, FrameLayout, Utterance};
use streamdec_core::{PosteriorLattice, RepresentationStream, StreamingConfig, ToyConfig, ToyModel};

/// A toy model with one synthesized and encoded utterance.
pub struct Fixture {
    pub model: ToyModel,
    pub utterance: Utterance,
    pub stream: RepresentationStream,
    pub lattice: PosteriorLattice,
}

impl Fixture {
    pub fn new(n_labels: usize, seed: u64) -> Self {
        let model = ToyModel::new(ToyConfig::default(), seed).expect("default toy config is valid");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let utterance = synth_utterance(&model, &mut rng, n_labels, &FrameLayout::default()).expect("synth");
        let enc = chunked_encode(&utterance.raw, &StreamingConfig::default(), &model).expect("encode");
        Self {
            model,
            utterance,
            stream: enc.stream,
            lattice: enc.lattice,
        }
    }

    pub fn frames(&self) -> usize {
        self.stream.t_enc()
    }
}
