//! Streaming delivery simulation and the toy acoustic model.

mod encoder;
mod toy;

use std::ops::Range;
use std::time::Instant;

use rand::Rng;

pub use encoder::{chunked_encode, ChunkedOutput, EncodedFrame, HopTrace, LcEncoder};
pub use toy::{toy_decoder_step, FrameLayout, ToyConfig, ToyModel};

use crate::dwjd::{DecodeOutput, DecodeSession, LmScorer, SessionStatus};
use crate::error::{Error, Result};
use crate::metrics::RtfReport;
use crate::types::{DecodeConfig, LabelId, PosteriorLattice, RepresentationStream};

/// Audio frame shift used to turn frame counts into durations.
pub const FRAME_SHIFT_MS: f64 = 10.0;

/// Chunking and arrival parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingConfig {
    /// Frames per hop, `N_c`.
    pub n_c: usize,
    /// Future frames per hop, `N_r`.
    pub n_r: usize,
    /// Time between consecutive raw frames; 0 delivers everything at once.
    pub frame_period_ms: f64,
    /// Raw frames delivered together.
    pub batch_frames: usize,
}

impl Default for StreamingConfig {
    fn default() -> Self {
        Self {
            n_c: 16,
            n_r: 16,
            frame_period_ms: 10.0,
            batch_frames: 10,
        }
    }
}

impl StreamingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 {
            return Err(Error::InvalidConfig("n_c must be >= 1".into()));
        }
        if self.batch_frames == 0 {
            return Err(Error::InvalidConfig("batch_frames must be >= 1".into()));
        }
        if !(self.frame_period_ms >= 0.0 && self.frame_period_ms.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "frame period must be finite and >= 0, got {}",
                self.frame_period_ms
            )));
        }
        Ok(())
    }
}

/// Raw frames `start..end` (0-based, half-open) delivered at `time_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalBatch {
    pub time_ms: f64,
    pub start: usize,
    pub end: usize,
}

/// Batch `k` (1-based) arrives at `k * batch_frames * frame_period_ms`; a
/// short final batch keeps the full-batch timestamp. A zero period yields a
/// single batch at time 0.
pub fn simulate_arrival(n_frames: usize, cfg: &StreamingConfig) -> Vec<ArrivalBatch> {
    if n_frames == 0 {
        return Vec::new();
    }
    if cfg.frame_period_ms == 0.0 {
        return vec![ArrivalBatch {
            time_ms: 0.0,
            start: 0,
            end: n_frames,
        }];
    }
    let batch = cfg.batch_frames.max(1);
    (0..n_frames.div_ceil(batch))
        .map(|k| ArrivalBatch {
            time_ms: (k + 1) as f64 * batch as f64 * cfg.frame_period_ms,
            start: k * batch,
            end: ((k + 1) * batch).min(n_frames),
        })
        .collect()
}

/// How raw frames reach the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalMode {
    /// Per the arrival schedule, decoding as hops become ready.
    Streaming,
    /// The whole utterance at once, after its full duration.
    Offline,
}

/// Result of [`measure_rtf`].
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub output: DecodeOutput,
    pub report: RtfReport,
    /// Hop log of the encoder; empty for pre-encoded input.
    pub hops: Vec<HopTrace>,
}

/// Encodes and decodes one utterance against a virtual clock.
///
/// The clock jumps to each batch's arrival time unless still busy, then
/// advances by the measured compute for that batch. The first emission is
/// stamped at the end of the batch during which the first expansion
/// finished.
pub fn measure_rtf<L: LmScorer + ?Sized>(
    model: &ToyModel,
    lm: &L,
    raw: &[Vec<f64>],
    stream_cfg: &StreamingConfig,
    decode_cfg: &DecodeConfig,
    mode: ArrivalMode,
) -> Result<PipelineRun> {
    let mut encoder = LcEncoder::new(model, stream_cfg)?;
    let mut run = timed_decode(
        model,
        lm,
        raw.len(),
        stream_cfg,
        decode_cfg,
        mode,
        |range| match range {
            Some(r) => {
                let mut out = Vec::new();
                for x in &raw[r] {
                    out.extend(encoder.push_raw(x.clone())?);
                }
                Ok(out)
            }
            None => encoder.finish(),
        },
    )?;
    run.hops = encoder.hops().to_vec();
    Ok(run)
}

/// Like [`measure_rtf`] for inputs that are already encoded: encoder
/// output `j` arrives with raw frame `j`.
pub fn measure_rtf_encoded<L: LmScorer + ?Sized>(
    model: &ToyModel,
    lm: &L,
    stream: &RepresentationStream,
    lattice: &PosteriorLattice,
    stream_cfg: &StreamingConfig,
    decode_cfg: &DecodeConfig,
    mode: ArrivalMode,
) -> Result<PipelineRun> {
    if stream.t_enc() != lattice.len() {
        return Err(Error::DimMismatch {
            expected: stream.t_enc(),
            got: lattice.len(),
        });
    }
    stream_cfg.validate()?;
    timed_decode(model, lm, stream.t_enc(), stream_cfg, decode_cfg, mode, |range| {
        Ok(range
            .map(|r| {
                stream.frames()[r.clone()]
                    .iter()
                    .zip(&lattice.frames()[r])
                    .map(|(h, p)| EncodedFrame {
                        h: h.clone(),
                        posterior: p.clone(),
                    })
                    .collect()
            })
            .unwrap_or_default())
    })
}

/// `feed(Some(range))` delivers a batch of raw frames, `feed(None)` ends
/// the input; each returns the encoder outputs that became ready.
fn timed_decode<L, F>(
    model: &ToyModel,
    lm: &L,
    n_frames: usize,
    stream_cfg: &StreamingConfig,
    decode_cfg: &DecodeConfig,
    mode: ArrivalMode,
    mut feed: F,
) -> Result<PipelineRun>
where
    L: LmScorer + ?Sized,
    F: FnMut(Option<Range<usize>>) -> Result<Vec<EncodedFrame>>,
{
    if n_frames == 0 {
        return Err(Error::EmptyInput);
    }
    let audio_ms = n_frames as f64 * FRAME_SHIFT_MS;
    let batches = match mode {
        ArrivalMode::Streaming => simulate_arrival(n_frames, stream_cfg),
        ArrivalMode::Offline => vec![ArrivalBatch {
            time_ms: audio_ms,
            start: 0,
            end: n_frames,
        }],
    };
    let final_arrival = batches.last().map_or(0.0, |b| b.time_ms);
    let mut session = DecodeSession::new(model, lm, model.vocab(), decode_cfg.clone(), model.dim())?;
    let mut clock = 0.0f64;
    let mut compute = 0.0f64;
    let mut first_emission = None;
    let last = batches.len() - 1;
    for (k, batch) in batches.iter().enumerate() {
        clock = clock.max(batch.time_ms);
        let started = Instant::now();
        for f in feed(Some(batch.start..batch.end))? {
            session.push_frame(f.h, f.posterior)?;
        }
        if k == last {
            for f in feed(None)? {
                session.push_frame(f.h, f.posterior)?;
            }
            session.close();
        }
        let status = session.poll()?;
        let spent = started.elapsed().as_secs_f64();
        compute += spent;
        clock += spent * 1e3;
        if first_emission.is_none() && session.first_expansion().is_some() {
            first_emission = Some(clock);
        }
        if k == last && status != SessionStatus::Finished {
            return Err(Error::Invariant("decode did not finish on closed input".into()));
        }
    }
    let output = session.into_output()?;
    let report = RtfReport::new(compute, audio_ms / 1e3, first_emission, final_arrival)?;
    Ok(PipelineRun {
        output,
        report,
        hops: Vec::new(),
    })
}

/// A synthetic utterance and its transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub reference: Vec<LabelId>,
    pub raw: Vec<Vec<f64>>,
}

/// Draws `n_labels` distinct labels and renders them as raw frames.
pub fn synth_utterance<R: Rng + ?Sized>(
    model: &ToyModel,
    rng: &mut R,
    n_labels: usize,
    layout: &FrameLayout,
) -> Result<Utterance> {
    let reference = model.random_reference(rng, n_labels);
    let raw = model.synth_frames(&reference, rng, layout)?;
    Ok(Utterance { reference, raw })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::attention::{AttentionConfig, Mechanism};
    use crate::dwjd::UniformLm;

    #[test]
    fn arrival_batches_of_ten() {
        let b = simulate_arrival(30, &StreamingConfig::default());
        let times: Vec<f64> = b.iter().map(|b| b.time_ms).collect();
        assert_eq!(times, vec![100.0, 200.0, 300.0]);
        assert!(b.iter().all(|b| b.end - b.start == 10));
    }

    #[test]
    fn arrival_degenerate() {
        let zero = StreamingConfig {
            frame_period_ms: 0.0,
            ..Default::default()
        };
        assert_eq!(
            simulate_arrival(30, &zero),
            vec![ArrivalBatch {
                time_ms: 0.0,
                start: 0,
                end: 30
            }]
        );
        assert_eq!(
            simulate_arrival(5, &StreamingConfig::default()),
            vec![ArrivalBatch {
                time_ms: 100.0,
                start: 0,
                end: 5
            }]
        );
    }

    fn decode_cfg(mechanism: Mechanism) -> DecodeConfig {
        DecodeConfig {
            beam_size: 4,
            attention: AttentionConfig::with_mechanism(mechanism),
            ..Default::default()
        }
    }

    #[test]
    fn toy_pipeline_transcribes() {
        let model = ToyModel::new(ToyConfig::default(), 21).unwrap();
        let lm = UniformLm::new(model.vocab());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mech in [Mechanism::Hma, Mechanism::Mocha, Mechanism::SMocha, Mechanism::Mta] {
            let utt = synth_utterance(&model, &mut rng, 5, &FrameLayout::default()).unwrap();
            let run = measure_rtf(
                &model,
                &lm,
                &utt.raw,
                &StreamingConfig::default(),
                &decode_cfg(mech),
                ArrivalMode::Streaming,
            )
            .unwrap();
            let best = &run.output.hypotheses[0];
            assert_eq!(best.seq.content(model.vocab()), &utt.reference[..], "{mech:?}");
        }
    }

    #[test]
    fn streaming_emits_before_the_end() {
        let model = ToyModel::new(ToyConfig::default(), 5).unwrap();
        let lm = UniformLm::new(model.vocab());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let utt = synth_utterance(&model, &mut rng, 8, &FrameLayout::default()).unwrap();
        let cfg = decode_cfg(Mechanism::Mta);
        let s = StreamingConfig::default();
        let stream = measure_rtf(&model, &lm, &utt.raw, &s, &cfg, ArrivalMode::Streaming).unwrap();
        let offline = measure_rtf(&model, &lm, &utt.raw, &s, &cfg, ArrivalMode::Offline).unwrap();
        let audio_ms = utt.raw.len() as f64 * FRAME_SHIFT_MS;
        assert!(stream.report.first_emission_offset_ms.unwrap() < audio_ms);
        assert!(offline.report.first_emission_offset_ms.unwrap() >= audio_ms);
        assert!(stream.report.expanded_before_final_arrival);
        let labels = |r: &PipelineRun| r.output.hypotheses.iter().map(|h| h.seq.clone()).collect::<Vec<_>>();
        assert_eq!(labels(&stream), labels(&offline));
        let enc = chunked_encode(&utt.raw, &s, &model).unwrap();
        let pre =
            measure_rtf_encoded(&model, &lm, &enc.stream, &enc.lattice, &s, &cfg, ArrivalMode::Streaming).unwrap();
        assert_eq!(labels(&pre), labels(&stream));
        assert!(pre.hops.is_empty());
    }
}
