use nalgebra::{DMatrix, DVector, DVectorView};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::energy::{gaussian_iter, gaussian_matrix};
use crate::attention::{AttentionParams, EnergyParams, LocationParams};
use crate::dwjd::DecoderModel;
use crate::error::{Error, Result};
use crate::types::{LabelId, Vocab};

/// Shape and sharpness of a [`ToyModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    /// Number of content labels `K`.
    pub content_labels: usize,
    /// Input dimensions beyond the `K + 1` label directions.
    pub noise_dims: usize,
    /// Decoder-state dimensions beyond the `K` label-memory dimensions.
    pub extra_state_dims: usize,
    /// Encoder recurrent state size (each direction).
    pub encoder_state: usize,
    /// CTC softmax temperature; small values give peaky posteriors.
    pub temperature: f64,
    /// Average-pool every `decimation` encoder outputs (1 = off).
    pub decimation: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            content_labels: 8,
            noise_dims: 4,
            extra_state_dims: 4,
            encoder_state: 6,
            temperature: 0.25,
            decimation: 1,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.content_labels == 0 {
            return Err(Error::InvalidConfig(
                "toy model needs at least one content label".into(),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.decimation == 0 {
            return Err(Error::InvalidConfig("decimation must be >= 1".into()));
        }
        Ok(())
    }

    /// Raw-frame and representation dimensionality.
    pub fn dim(&self) -> usize {
        self.content_labels + 1 + self.noise_dims
    }

    pub fn state_dim(&self) -> usize {
        self.content_labels + self.extra_state_dims
    }
}

// encoder residual scale; keeps label directions dominant
const ENC_MIX: f64 = 0.05;
// CTC head gain before the temperature
const CTC_GAIN: f64 = 3.0;
// attention sharpness: tanh(S * (<e_k, h> - q_k) - C)
const ATT_SLOPE: f64 = 6.0;
const ATT_SHIFT: f64 = 3.0;
const ATT_MARGIN: f64 = 8.0;
const CHUNK_GAIN: f64 = 3.0;
// decoder output gains
const DEC_GAIN: f64 = 8.0;
const EOS_LOGIT: f64 = 4.0;
const DEC_NOISE: f64 = 0.1;

/// Deterministic stand-in for a trained encoder, CTC head and attention
/// decoder, generated from a seed.
///
/// Every content label and blank owns an orthonormal direction of the
/// input space. The encoder is a latency-controlled pair of tanh
/// recurrences added to the identity; the CTC head is a temperature
/// softmax of label matches. The decoder remembers which labels it has
/// attended to, and the monotonic energy fires on frames that match a
/// label not yet in memory, so the model transcribes utterances whose
/// labels are pairwise distinct.
#[derive(Debug, Clone)]
pub struct ToyModel {
    seed: u64,
    config: ToyConfig,
    vocab: Vocab,
    /// Row `k` is the direction of content label `k`; the last row is blank.
    directions: DMatrix<f64>,
    fwd_a: DMatrix<f64>,
    fwd_b: DMatrix<f64>,
    bwd_a: DMatrix<f64>,
    bwd_b: DMatrix<f64>,
    fwd_out: DMatrix<f64>,
    bwd_out: DMatrix<f64>,
    dec_a: DMatrix<f64>,
    dec_b: DMatrix<f64>,
    dec_c: DMatrix<f64>,
    dec_out: DMatrix<f64>,
    attention: AttentionParams,
}

fn label_names(k: usize) -> Vec<String> {
    if k <= 26 {
        (0..k).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
    } else {
        (0..k).map(|i| format!("w{i}")).collect()
    }
}

/// Orthonormal rows via Gram-Schmidt on Gaussian draws.
fn orthonormal_rows<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, dim);
    let mut i = 0;
    while i < rows {
        let mut v = DVector::from_iterator(dim, gaussian_iter(rng, 1.0).take(dim));
        for k in 0..i {
            let u = out.row(k).transpose();
            let proj = u.dot(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm < 1e-6 {
            continue;
        }
        out.set_row(i, &(v / norm).transpose());
        i += 1;
    }
    out
}

impl ToyModel {
    /// Content labels named `a`, `b`, ... (or `w0`, `w1`, ... past 26).
    pub fn new(config: ToyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let vocab = Vocab::with_content(&label_names(config.content_labels))?;
        Self::with_vocab(config, vocab, seed)
    }

    /// Uses the given vocabulary; `config.content_labels` is replaced by its
    /// number of content labels.
    pub fn with_vocab(mut config: ToyConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        config.content_labels = vocab.content_labels().len();
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = config.content_labels;
        let d = config.dim();
        let s = config.encoder_state;
        let q = config.state_dim();
        let e = config.extra_state_dims;
        let v = vocab.len();
        let directions = orthonormal_rows(&mut rng, k + 1, d);

        let fwd_a = gaussian_matrix(&mut rng, s, s, 0.5 / (s as f64).sqrt());
        let fwd_b = gaussian_matrix(&mut rng, s, d, 1.0 / (d as f64).sqrt());
        let bwd_a = gaussian_matrix(&mut rng, s, s, 0.5 / (s as f64).sqrt());
        let bwd_b = gaussian_matrix(&mut rng, s, d, 1.0 / (d as f64).sqrt());
        let fwd_out = gaussian_matrix(&mut rng, d, s, ENC_MIX / (s as f64).sqrt());
        let bwd_out = gaussian_matrix(&mut rng, d, s, ENC_MIX / (s as f64).sqrt());

        let dec_a = gaussian_matrix(&mut rng, e, e, 0.3 / (e.max(1) as f64).sqrt());
        let dec_b = gaussian_matrix(&mut rng, e, d, 1.0 / (d as f64).sqrt());
        let dec_c = gaussian_matrix(&mut rng, e, v, 0.5);
        let dec_out = gaussian_matrix(&mut rng, v, e, DEC_NOISE);

        let label_rows = directions.rows(0, k).into_owned();
        let mut memory = DMatrix::zeros(k, q);
        for slot in 0..k {
            memory[(slot, slot)] = -ATT_SLOPE;
        }
        let kf = k as f64;
        // sum over labels of the tanh terms is about 2 - K on a frame of a
        // fresh label and -K elsewhere; put the decision boundary at 1 - K
        let monotonic = EnergyParams {
            w1: memory.clone(),
            w2: &label_rows * ATT_SLOPE,
            b: DVector::from_element(k, -ATT_SHIFT),
            v: DVector::from_element(k, 1.0),
            g: ATT_MARGIN * kf.sqrt(),
            r: ATT_MARGIN * (kf - 1.0),
        };
        let chunk = EnergyParams {
            w1: DMatrix::zeros(k, q),
            w2: &label_rows * ATT_SLOPE,
            b: DVector::from_element(k, -ATT_SHIFT),
            v: DVector::from_element(k, CHUNK_GAIN),
            g: 1.0,
            r: 0.0,
        };
        let kernels: Vec<Vec<f64>> = (0..2).map(|_| gaussian_iter(&mut rng, 0.5).take(3).collect()).collect();
        let location = LocationParams {
            energy: EnergyParams {
                w1: memory,
                w2: &label_rows * ATT_SLOPE,
                b: DVector::from_element(k, -ATT_SHIFT),
                v: DVector::from_element(k, CHUNK_GAIN),
                g: 1.0,
                r: 0.0,
            },
            w3: gaussian_matrix(&mut rng, k, kernels.len(), 0.5),
            kernels,
        };
        Ok(Self {
            seed,
            config,
            vocab,
            directions,
            fwd_a,
            fwd_b,
            bwd_a,
            bwd_b,
            fwd_out,
            bwd_out,
            dec_a,
            dec_b,
            dec_c,
            dec_out,
            attention: AttentionParams {
                monotonic,
                chunk,
                location,
            },
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    /// Unit direction of a content label or `<blank>` in the input space.
    pub fn direction(&self, label: LabelId) -> Option<Vec<f64>> {
        let row = if label == self.vocab.blank_id() {
            self.config.content_labels
        } else {
            self.vocab.content_labels().iter().position(|&l| l == label)?
        };
        Some(self.directions.row(row).iter().copied().collect())
    }

    /// One step of the forward recurrence.
    pub(crate) fn forward_state(&self, state: &[f64], x: &[f64]) -> Vec<f64> {
        let pre = &self.fwd_a * DVectorView::from_slice(state, state.len())
            + &self.fwd_b * DVectorView::from_slice(x, x.len());
        pre.iter().map(|v| v.tanh()).collect()
    }

    /// One step of the chunk-local backward recurrence.
    pub(crate) fn backward_state(&self, state: &[f64], x: &[f64]) -> Vec<f64> {
        let pre = &self.bwd_a * DVectorView::from_slice(state, state.len())
            + &self.bwd_b * DVectorView::from_slice(x, x.len());
        pre.iter().map(|v| v.tanh()).collect()
    }

    /// `h = x + F s_fwd + B s_bwd`.
    pub(crate) fn combine(&self, x: &[f64], fwd: &[f64], bwd: &[f64]) -> Vec<f64> {
        let mix = &self.fwd_out * DVectorView::from_slice(fwd, fwd.len())
            + &self.bwd_out * DVectorView::from_slice(bwd, bwd.len());
        x.iter().zip(mix.iter()).map(|(a, b)| a + b).collect()
    }

    pub fn encoder_state_dim(&self) -> usize {
        self.config.encoder_state
    }

    /// CTC posterior row for one representation vector; `<sos>` and
    /// `<eos>` get zero mass.
    pub fn ctc_posterior(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: h.len(),
            });
        }
        let scores = &self.directions * DVectorView::from_slice(h, h.len());
        let k = self.config.content_labels;
        let mut logits = vec![f64::NEG_INFINITY; self.vocab.len()];
        for (slot, label) in self.vocab.content_labels().into_iter().enumerate() {
            logits[label] = CTC_GAIN * scores[slot] / self.config.temperature;
        }
        logits[self.vocab.blank_id()] = CTC_GAIN * scores[k] / self.config.temperature;
        Ok(softmax(&logits))
    }

    /// Raw frames for a label sequence: each label gets one frame along its
    /// direction followed by blank frames, plus Gaussian noise.
    pub fn synth_frames<R: Rng + ?Sized>(
        &self,
        labels: &[LabelId],
        rng: &mut R,
        layout: &FrameLayout,
    ) -> Result<Vec<Vec<f64>>> {
        let blank = self.direction(self.vocab.blank_id()).expect("blank direction");
        let d = self.dim();
        let mut frames = Vec::new();
        let mut push = |dir: &[f64], rng: &mut R| {
            let f: Vec<f64> = dir
                .iter()
                .zip(gaussian_iter(rng, layout.noise).take(d))
                .map(|(a, n)| a + n)
                .collect();
            frames.push(f);
        };
        for _ in 0..rng.random_range(layout.lead.0..=layout.lead.1) {
            push(&blank, rng);
        }
        for &l in labels {
            let dir = self.direction(l).ok_or(Error::UnknownLabel(l))?;
            push(&dir, rng);
            for _ in 0..rng.random_range(layout.gap.0..=layout.gap.1) {
                push(&blank, rng);
            }
        }
        Ok(frames)
    }

    /// `len` distinct content labels in random order.
    pub fn random_reference<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<LabelId> {
        let mut pool = self.vocab.content_labels();
        pool.shuffle(rng);
        pool.truncate(len.min(pool.len()));
        pool
    }
}

/// Frame counts used by [`ToyModel::synth_frames`], inclusive ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    pub lead: (usize, usize),
    pub gap: (usize, usize),
    pub noise: f64,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self {
            lead: (2, 5),
            gap: (3, 8),
            noise: 0.1,
        }
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

impl DecoderModel for ToyModel {
    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.config.state_dim()]
    }

    fn attention_params(&self) -> &AttentionParams {
        &self.attention
    }

    fn decoder_step(&self, context: &[f64], prev_state: &[f64], prev_label: LabelId) -> Result<(Vec<f64>, Vec<f64>)> {
        toy_decoder_step(context, prev_state, prev_label, self)
    }
}

/// The first `K` state units latch the largest match of the context with
/// each label direction seen so far; the remaining units follow
/// `tanh(A q + B r_i + C e(y_{i-1}))`. Label logits match the context
/// against each label direction, `<eos>` has a constant logit.
pub fn toy_decoder_step(
    context: &[f64],
    prev_state: &[f64],
    prev_label: LabelId,
    model: &ToyModel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.dim();
    let qd = model.config.state_dim();
    if context.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: context.len(),
        });
    }
    if prev_state.len() != qd {
        return Err(Error::DimMismatch {
            expected: qd,
            got: prev_state.len(),
        });
    }
    if prev_label >= model.vocab.len() {
        return Err(Error::UnknownLabel(prev_label));
    }
    let r = DVectorView::from_slice(context, d);
    let k = model.config.content_labels;
    let matches = &model.directions * r;
    let mut state: Vec<f64> = (0..k).map(|a| prev_state[a].max(matches[a].clamp(0.0, 1.0))).collect();
    let pre = &model.dec_a * DVectorView::from_slice(&prev_state[k..], qd - k)
        + &model.dec_b * r
        + model.dec_c.column(prev_label);
    state.extend(pre.iter().map(|x| x.tanh()));

    let extra = DVectorView::from_slice(&state[k..], qd - k);
    let bias = &model.dec_out * extra;
    let vocab = &model.vocab;
    let mut logits = vec![f64::NEG_INFINITY; vocab.len()];
    for (slot, label) in vocab.content_labels().into_iter().enumerate() {
        logits[label] = DEC_GAIN * matches[slot] + bias[label];
    }
    logits[vocab.eos_id()] = EOS_LOGIT + bias[vocab.eos_id()];
    Ok((state, log_softmax(&logits)))
}
