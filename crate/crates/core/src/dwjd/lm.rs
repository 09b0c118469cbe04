use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::types::{LabelId, LabelSequence, Vocab};

/// Label-level language model consulted once per expansion.
pub trait LmScorer {
    /// `log p(label | prefix)`.
    fn score_next(&self, prefix: &LabelSequence, label: LabelId) -> f64;
}

/// Uniform distribution over the output labels (content labels and `<eos>`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformLm {
    log_p: f64,
}

impl UniformLm {
    pub fn new(vocab: &Vocab) -> Self {
        Self {
            log_p: -(vocab.output_labels().len() as f64).ln(),
        }
    }
}

impl LmScorer for UniformLm {
    fn score_next(&self, _prefix: &LabelSequence, _label: LabelId) -> f64 {
        self.log_p
    }
}

/// Bigram model with absolute discounting, backing off to an add-one
/// unigram over the output labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramLm {
    discount: f64,
    unigram: HashMap<LabelId, f64>,
    bigram: HashMap<(LabelId, LabelId), f64>,
    // history count and number of distinct successors
    history: HashMap<LabelId, (f64, f64)>,
}

impl BigramLm {
    pub const DEFAULT_DISCOUNT: f64 = 0.5;

    /// Trains on whitespace-tokenized lines; each line becomes
    /// `<sos> w_1 ... w_n <eos>`. Blank lines and `#` lines are skipped.
    pub fn train(text: &str, vocab: &Vocab, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidConfig(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        let outputs = vocab.output_labels();
        let mut uni_counts: HashMap<LabelId, f64> = HashMap::new();
        let mut bigram: HashMap<(LabelId, LabelId), f64> = HashMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut ids = vocab.encode(line).map_err(|e| Error::Parse {
                line: line_no + 1,
                msg: e.to_string(),
            })?;
            if let Some(&bad) = ids.iter().find(|&&id| vocab.is_reserved(id)) {
                return Err(Error::Parse {
                    line: line_no + 1,
                    msg: format!("reserved label {:?} in LM text", vocab.name(bad).unwrap_or("?")),
                });
            }
            ids.push(vocab.eos_id());
            let mut prev = vocab.sos_id();
            for &w in &ids {
                *uni_counts.entry(w).or_default() += 1.0;
                *bigram.entry((prev, w)).or_default() += 1.0;
                prev = w;
            }
        }
        let total: f64 = uni_counts.values().sum();
        let k = outputs.len() as f64;
        let unigram = outputs
            .iter()
            .map(|&w| (w, (uni_counts.get(&w).copied().unwrap_or(0.0) + 1.0) / (total + k)))
            .collect();
        let mut history: HashMap<LabelId, (f64, f64)> = HashMap::new();
        for (&(v, _), &c) in &bigram {
            let e = history.entry(v).or_default();
            e.0 += c;
            e.1 += 1.0;
        }
        Ok(Self {
            discount,
            unigram,
            bigram,
            history,
        })
    }

    pub fn prob(&self, prev: LabelId, label: LabelId) -> f64 {
        let uni = self.unigram.get(&label).copied().unwrap_or(0.0);
        match self.history.get(&prev) {
            None => uni,
            Some(&(count, distinct)) => {
                let c = self.bigram.get(&(prev, label)).copied().unwrap_or(0.0);
                let backoff = self.discount * distinct / count;
                (c - self.discount).max(0.0) / count + backoff * uni
            }
        }
    }
}

impl LmScorer for BigramLm {
    fn score_next(&self, prefix: &LabelSequence, label: LabelId) -> f64 {
        self.prob(prefix.last(), label).ln()
    }
}
