use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense label identifier, `0..V`.
pub type LabelId = usize;

pub const BLANK_TOKEN: &str = "<blank>";
pub const SOS_TOKEN: &str = "<sos>";
pub const EOS_TOKEN: &str = "<eos>";

/// Output label inventory including the reserved `<blank>`, `<sos>` and
/// `<eos>` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, LabelId>,
    blank_id: LabelId,
    sos_id: LabelId,
    eos_id: LabelId,
}

impl Vocab {
    /// Builds a vocabulary from label names; the position is the identifier.
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        let mut names = Vec::with_capacity(labels.len());
        for (id, raw) in labels.iter().enumerate() {
            let name = raw.as_ref().trim();
            if name.is_empty() {
                return Err(Error::InvalidVocab(format!("empty label at line {id}")));
            }
            if name.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocab(format!("label {name:?} contains whitespace")));
            }
            if index.insert(name.to_string(), id).is_some() {
                return Err(Error::InvalidVocab(format!("duplicate label {name:?}")));
            }
            names.push(name.to_string());
        }
        let find = |tok: &str| {
            index
                .get(tok)
                .copied()
                .ok_or_else(|| Error::InvalidVocab(format!("missing reserved label {tok}")))
        };
        let blank_id = find(BLANK_TOKEN)?;
        let sos_id = find(SOS_TOKEN)?;
        let eos_id = find(EOS_TOKEN)?;
        Ok(Self {
            labels: names,
            index,
            blank_id,
            sos_id,
            eos_id,
        })
    }

    /// `<blank>`, `<sos>`, `<eos>` followed by the given content labels.
    pub fn with_content<S: AsRef<str>>(content: &[S]) -> Result<Self> {
        let mut all: Vec<String> = vec![BLANK_TOKEN.into(), SOS_TOKEN.into(), EOS_TOKEN.into()];
        all.extend(content.iter().map(|s| s.as_ref().to_string()));
        Self::new(&all)
    }

    /// Parses the one-label-per-line vocabulary file format.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        // tolerate a single trailing blank line produced by editors
        let lines = match lines.last() {
            Some(l) if l.trim().is_empty() => &lines[..lines.len() - 1],
            _ => &lines[..],
        };
        Self::new(lines)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = self.labels.join("\n");
        out.push('\n');
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn blank_id(&self) -> LabelId {
        self.blank_id
    }

    pub fn sos_id(&self) -> LabelId {
        self.sos_id
    }

    pub fn eos_id(&self) -> LabelId {
        self.eos_id
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn is_reserved(&self, id: LabelId) -> bool {
        id == self.blank_id || id == self.sos_id || id == self.eos_id
    }

    /// Labels other than the three reserved symbols, in identifier order.
    pub fn content_labels(&self) -> Vec<LabelId> {
        (0..self.len()).filter(|&id| !self.is_reserved(id)).collect()
    }

    /// Labels the attention decoder may emit: content labels plus `<eos>`.
    pub fn output_labels(&self) -> Vec<LabelId> {
        (0..self.len())
            .filter(|&id| id != self.blank_id && id != self.sos_id)
            .collect()
    }

    /// Maps whitespace-separated label names to identifiers.
    pub fn encode(&self, text: &str) -> Result<Vec<LabelId>> {
        text.split_whitespace()
            .map(|tok| {
                self.id(tok)
                    .ok_or_else(|| Error::InvalidVocab(format!("unknown label {tok:?}")))
            })
            .collect()
    }

    /// Space-joined names, skipping `<sos>` and `<eos>`.
    pub fn decode(&self, ids: &[LabelId]) -> String {
        ids.iter()
            .filter(|&&id| id != self.sos_id && id != self.eos_id)
            .map(|&id| self.name(id).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_lines_anywhere() {
        let v = Vocab::parse("a\n<eos>\nb\n<blank>\n<sos>\n").unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.blank_id(), 3);
        assert_eq!(v.sos_id(), 4);
        assert_eq!(v.eos_id(), 1);
        assert_eq!(v.content_labels(), vec![0, 2]);
        assert_eq!(v.output_labels(), vec![0, 1, 2]);
    }

    #[test]
    fn missing_reserved_is_rejected() {
        assert!(matches!(Vocab::parse("a\n<blank>\n<sos>"), Err(Error::InvalidVocab(_))));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(Vocab::parse("<blank>\n<sos>\n<eos>\na\na").is_err());
    }

    #[test]
    fn encode_decode() {
        let v = Vocab::with_content(&["a", "b"]).unwrap();
        let ids = v.encode("b a b").unwrap();
        assert_eq!(ids, vec![4, 3, 4]);
        assert_eq!(v.decode(&ids), "b a b");
        assert!(v.encode("c").is_err());
        let round = Vocab::parse(&v.to_file_string()).unwrap();
        assert_eq!(round, v);
    }
}
