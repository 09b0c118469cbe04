use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use streamdec_core::formats::{read_lattice, read_stream, read_vocab};
use streamdec_core::{LabelId, PosteriorLattice, RepresentationStream, ToyConfig, Vocab};

/// On-disk run description. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    /// Training text for the bigram LM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub toy: ToySection,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub streaming: StreamingSection,
    #[serde(default, rename = "utterance")]
    pub utterances: Vec<UtteranceEntry>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_labels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra_state_dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_state: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decimation: Option<usize>,
}

impl ToySection {
    pub fn to_config(&self) -> ToyConfig {
        let d = ToyConfig::default();
        ToyConfig {
            content_labels: self.content_labels.unwrap_or(d.content_labels),
            noise_dims: self.noise_dims.unwrap_or(d.noise_dims),
            extra_state_dims: self.extra_state_dims.unwrap_or(d.extra_state_dims),
            encoder_state: self.encoder_state.unwrap_or(d.encoder_state),
            temperature: self.temperature.unwrap_or(d.temperature),
            decimation: self.decimation.unwrap_or(d.decimation),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    pub mu: Option<f64>,
    pub beta: Option<f64>,
    pub beam: Option<usize>,
    pub theta: Option<f64>,
    pub end_m: Option<usize>,
    pub end_d: Option<f64>,
    pub attention: Option<String>,
    pub chunk_width: Option<usize>,
    pub chunk_order: Option<String>,
    pub max_output_len: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamingSection {
    pub nc: Option<usize>,
    pub nr: Option<usize>,
    pub arrival_period_ms: Option<f64>,
    pub batch_frames: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceEntry {
    pub id: String,
    /// Raw feature frames, encoded on the fly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<PathBuf>,
    /// Whitespace-separated label names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// Input of one utterance after loading.
#[derive(Debug, Clone)]
pub enum UtteranceInput {
    Raw(Vec<Vec<f64>>),
    Encoded {
        stream: RepresentationStream,
        lattice: PosteriorLattice,
    },
}

#[derive(Debug, Clone)]
pub struct LoadedUtterance {
    pub id: String,
    pub input: UtteranceInput,
    pub reference: Option<Vec<LabelId>>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        let manifest: RunManifest =
            toml::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    pub fn vocab(&self, base: &Path) -> Result<Option<Vocab>> {
        let Some(p) = &self.vocab else {
            return Ok(None);
        };
        let path = base.join(p);
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read vocab {}", path.display()))?;
        Ok(Some(
            read_vocab(&text).with_context(|| format!("vocab {}", path.display()))?,
        ))
    }
}

impl UtteranceEntry {
    pub fn load(&self, base: &Path, vocab: &Vocab) -> Result<LoadedUtterance> {
        let read = |p: &PathBuf| -> Result<String> {
            let path = base.join(p);
            fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))
        };
        let input = match (&self.raw, &self.stream, &self.lattice) {
            (Some(raw), None, None) => {
                let frames = read_stream(&read(raw)?).with_context(|| format!("raw frames {}", raw.display()))?;
                UtteranceInput::Raw(frames.frames().to_vec())
            }
            (None, Some(s), Some(l)) => {
                let stream = read_stream(&read(s)?).with_context(|| format!("stream {}", s.display()))?;
                let lattice = read_lattice(&read(l)?).with_context(|| format!("lattice {}", l.display()))?;
                UtteranceInput::Encoded { stream, lattice }
            }
            (None, Some(_), None) | (None, None, Some(_)) => bail!("stream and lattice must be given together"),
            (None, None, None) => bail!("no input: give either raw or stream+lattice"),
            _ => bail!("give either raw or stream+lattice, not both"),
        };
        let reference = self
            .reference
            .as_deref()
            .map(|r| vocab.encode(r))
            .transpose()
            .context("reference")?;
        Ok(LoadedUtterance {
            id: self.id.clone(),
            input,
            reference,
        })
    }
}
