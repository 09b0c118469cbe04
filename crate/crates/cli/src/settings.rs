use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use streamdec_core::{AttentionConfig, ChunkOrder, DecodeConfig, Mechanism, StreamingConfig, ToyConfig};

use crate::manifest::RunManifest;

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// CTC weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Language model weight.
    #[arg(long)]
    pub beta: Option<f64>,
    /// T-CTC truncation threshold.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub chunk_width: Option<usize>,
    /// sMoChA chunk order, a positive integer or `inf`.
    #[arg(long)]
    pub chunk_order: Option<String>,
    /// Encoder hop size in frames.
    #[arg(long)]
    pub nc: Option<usize>,
    /// Encoder lookahead in frames.
    #[arg(long)]
    pub nr: Option<usize>,
    /// End detection: number of shorter lengths compared.
    #[arg(long = "end-M")]
    pub end_m: Option<usize>,
    /// End detection: score gap threshold (negative).
    #[arg(long = "end-D", allow_negative_numbers = true)]
    pub end_d: Option<f64>,
    /// loaa, hma, mocha, smocha or mta.
    #[arg(long)]
    pub attention: Option<String>,
    /// Time between raw frames; 0 delivers the whole utterance at once.
    #[arg(long)]
    pub arrival_period_ms: Option<f64>,
    /// Raw frames per arrival batch.
    #[arg(long)]
    pub batch_frames: Option<usize>,
    #[arg(long)]
    pub max_output_len: Option<usize>,
    /// Bigram LM training text.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    #[arg(long, env = "STREAMDEC_SEED")]
    pub seed: Option<u64>,
}

/// Effective parameters of a run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub toy: ToyConfig,
    pub decode: DecodeConfig,
    pub streaming: StreamingConfig,
    pub lm: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(m: &RunManifest, base: &Path, o: &Overrides) -> Result<Self> {
        let d = DecodeConfig::default();
        let attention_name = o.attention.as_deref().or(m.decode.attention.as_deref());
        let mechanism = match attention_name {
            Some(s) => s.parse::<Mechanism>()?,
            None => AttentionConfig::default().mechanism,
        };
        let chunk_order = match o.chunk_order.as_deref().or(m.decode.chunk_order.as_deref()) {
            Some(s) => s.parse::<ChunkOrder>()?,
            None => AttentionConfig::default().chunk_order,
        };
        let attention = AttentionConfig {
            mechanism,
            chunk_width: o
                .chunk_width
                .or(m.decode.chunk_width)
                .unwrap_or(AttentionConfig::default().chunk_width),
            chunk_order,
            ..AttentionConfig::default()
        };
        let decode = DecodeConfig {
            mu: o.mu.or(m.decode.mu).unwrap_or(d.mu),
            beta: o.beta.or(m.decode.beta).unwrap_or(d.beta),
            beam_size: o.beam.or(m.decode.beam).unwrap_or(d.beam_size),
            theta: o.theta.or(m.decode.theta).unwrap_or(d.theta),
            end_m: o.end_m.or(m.decode.end_m).unwrap_or(d.end_m),
            end_d: o.end_d.or(m.decode.end_d).unwrap_or(d.end_d),
            attention,
            max_output_len: o.max_output_len.or(m.decode.max_output_len).unwrap_or(d.max_output_len),
        };
        decode.validate()?;

        let s = StreamingConfig::default();
        let streaming = StreamingConfig {
            n_c: o.nc.or(m.streaming.nc).unwrap_or(s.n_c),
            n_r: o.nr.or(m.streaming.nr).unwrap_or(s.n_r),
            frame_period_ms: o
                .arrival_period_ms
                .or(m.streaming.arrival_period_ms)
                .unwrap_or(s.frame_period_ms),
            batch_frames: o.batch_frames.or(m.streaming.batch_frames).unwrap_or(s.batch_frames),
        };
        streaming.validate()?;

        let toy = m.toy.to_config();
        toy.validate().context("[toy]")?;
        Ok(Self {
            seed: o.seed.unwrap_or(m.seed),
            toy,
            decode,
            streaming,
            lm: o.lm.clone().or_else(|| m.lm.as_ref().map(|p| base.join(p))),
            vocab: m.vocab.as_ref().map(|p| base.join(p)),
        })
    }

    /// `key=value` lines restating every parameter; arrival timing is
    /// left out when `with_arrival` is false.
    pub fn echo(&self, with_arrival: bool) -> Vec<String> {
        let d = &self.decode;
        let s = &self.streaming;
        let t = &self.toy;
        let mut lines = vec![
            format!("seed={}", self.seed),
            format!("attention={}", d.attention.mechanism),
            format!("mu={}", d.mu),
            format!("beta={}", d.beta),
            format!("beam={}", d.beam_size),
            format!("theta={:e}", d.theta),
            format!("end_M={}", d.end_m),
            format!("end_D={}", d.end_d),
            format!("chunk_width={}", d.attention.chunk_width),
            format!("chunk_order={}", d.attention.chunk_order),
            format!("max_output_len={}", d.max_output_len),
            format!("nc={}", s.n_c),
            format!("nr={}", s.n_r),
        ];
        if with_arrival {
            lines.push(format!("arrival_period_ms={}", s.frame_period_ms));
            lines.push(format!("batch_frames={}", s.batch_frames));
        }
        lines.extend([
            format!("toy_content_labels={}", t.content_labels),
            format!("toy_noise_dims={}", t.noise_dims),
            format!("toy_extra_state_dims={}", t.extra_state_dims),
            format!("toy_encoder_state={}", t.encoder_state),
            format!("toy_temperature={}", t.temperature),
            format!("toy_decimation={}", t.decimation),
            format!(
                "vocab={}",
                self.vocab
                    .as_ref()
                    .map_or("builtin".into(), |p| p.display().to_string())
            ),
            format!(
                "lm={}",
                self.lm.as_ref().map_or("none".into(), |p| p.display().to_string())
            ),
        ]);
        lines
    }
}
