use std::fmt;

use super::vocab::{LabelId, Vocab};
use crate::error::{Error, Result};

/// A label prefix `(<sos>, y_2, ..., y_n)`.
///
/// Always starts with `<sos>`, never contains `<blank>`, and `<eos>` may only
/// be the final element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSequence(Vec<LabelId>);

impl LabelSequence {
    /// The one-element sequence `(<sos>)`.
    pub fn root(vocab: &Vocab) -> Self {
        Self(vec![vocab.sos_id()])
    }

    /// `<sos>` followed by `labels`, validated against `vocab`.
    pub fn from_labels(vocab: &Vocab, labels: &[LabelId]) -> Result<Self> {
        let mut seq = Self::root(vocab);
        for &l in labels {
            seq = seq.extended(vocab, l)?;
        }
        Ok(seq)
    }

    /// Copy of `self` with `label` appended.
    pub fn extended(&self, vocab: &Vocab, label: LabelId) -> Result<Self> {
        if label >= vocab.len() || label == vocab.blank_id() || label == vocab.sos_id() {
            return Err(Error::UnknownLabel(label));
        }
        if self.is_complete(vocab) {
            return Err(Error::UnknownLabel(label));
        }
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(label);
        Ok(Self(v))
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.0
    }

    /// Labels after `<sos>`.
    pub fn body(&self) -> &[LabelId] {
        &self.0[1..]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> LabelId {
        *self.0.last().expect("sequence always holds <sos>")
    }

    pub fn is_complete(&self, vocab: &Vocab) -> bool {
        self.0.len() > 1 && self.last() == vocab.eos_id()
    }

    /// Body with a trailing `<eos>` removed.
    pub fn content(&self, vocab: &Vocab) -> &[LabelId] {
        let body = self.body();
        match body.last() {
            Some(&l) if l == vocab.eos_id() => &body[..body.len() - 1],
            _ => body,
        }
    }
}

impl fmt::Display for LabelSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}
