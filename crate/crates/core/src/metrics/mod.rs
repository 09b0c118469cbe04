//! Error rates and real-time factors.

use std::io::Write;

use crate::error::{Error, Result};
use crate::types::{LabelSequence, Vocab};

/// Levenshtein alignment counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub distance: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

/// Unit-cost edit distance from `reference` to `hypothesis`.
///
/// Ties between alignments of equal cost prefer substitutions, then
/// deletions, then insertions.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let n = hypothesis.len();
    let mut prev: Vec<EditCounts> = (0..=n)
        .map(|j| EditCounts {
            distance: j,
            insertions: j,
            ..Default::default()
        })
        .collect();
    let mut cur = prev.clone();
    for (i, r) in reference.iter().enumerate() {
        cur[0] = EditCounts {
            distance: i + 1,
            deletions: i + 1,
            ..Default::default()
        };
        for (j, h) in hypothesis.iter().enumerate() {
            let diag = prev[j];
            let sub = if r == h {
                diag
            } else {
                EditCounts {
                    distance: diag.distance + 1,
                    substitutions: diag.substitutions + 1,
                    ..diag
                }
            };
            let up = prev[j + 1];
            let del = EditCounts {
                distance: up.distance + 1,
                deletions: up.deletions + 1,
                ..up
            };
            let left = cur[j];
            let ins = EditCounts {
                distance: left.distance + 1,
                insertions: left.insertions + 1,
                ..left
            };
            let mut best = sub;
            if del.distance < best.distance {
                best = del;
            }
            if ins.distance < best.distance {
                best = ins;
            }
            cur[j + 1] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}

/// Edit distance between the content labels of two sequences.
pub fn sequence_edit_distance(reference: &LabelSequence, hypothesis: &LabelSequence, vocab: &Vocab) -> EditCounts {
    edit_distance(reference.content(vocab), hypothesis.content(vocab))
}

/// `distance / |reference|`.
pub fn error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(edit_distance(reference, hypothesis).distance as f64 / reference.len() as f64)
}

/// Timing of one decode run against a simulated arrival schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtfReport {
    pub processing_seconds: f64,
    pub audio_seconds: f64,
    pub rtf: f64,
    /// Virtual time, from the start of the utterance, at which the first
    /// beam expansion finished. `None` if the search never expanded.
    pub first_emission_offset_ms: Option<f64>,
    /// Whether that expansion finished before the last frame arrived.
    pub expanded_before_final_arrival: bool,
}

impl RtfReport {
    pub fn new(
        processing_seconds: f64,
        audio_seconds: f64,
        first_emission_offset_ms: Option<f64>,
        final_arrival_ms: f64,
    ) -> Result<Self> {
        if !(audio_seconds > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "audio duration must be > 0, got {audio_seconds}"
            )));
        }
        if !(processing_seconds >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "processing time must be >= 0, got {processing_seconds}"
            )));
        }
        Ok(Self {
            processing_seconds,
            audio_seconds,
            rtf: processing_seconds / audio_seconds,
            first_emission_offset_ms,
            expanded_before_final_arrival: first_emission_offset_ms.is_some_and(|t| t < final_arrival_ms),
        })
    }
}

/// One line of the RTF report.
#[derive(Debug, Clone, PartialEq)]
pub struct RtfRow {
    pub utt_id: String,
    pub report: RtfReport,
    pub error_rate: Option<f64>,
    pub beam_size: usize,
}

pub const RTF_CSV_HEADER: &str = "utt_id,rtf,first_emission_offset_ms,error_rate,beam_size";

/// Writes `# `-prefixed header lines, the column line and one row per
/// utterance. Missing values are left empty.
pub fn write_rtf_csv<W: Write>(out: &mut W, header: &[String], rows: &[RtfRow]) -> std::io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{RTF_CSV_HEADER}")?;
    for row in rows {
        let offset = row
            .report
            .first_emission_offset_ms
            .map(|t| format!("{t:.3}"))
            .unwrap_or_default();
        let er = row.error_rate.map(|e| format!("{e:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:.6},{},{},{}",
            row.utt_id, row.report.rtf, offset, er, row.beam_size
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn kitten_sitting() {
        let c = edit_distance(&chars("kitten"), &chars("sitting"));
        assert_eq!(c.distance, 3);
        assert_eq!((c.substitutions, c.insertions, c.deletions), (2, 1, 0));
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(edit_distance(&chars("abc"), &chars("abc")).distance, 0);
        let c = edit_distance(&chars("abcd"), &[]);
        assert_eq!((c.distance, c.deletions), (4, 4));
        let c = edit_distance(&[], &chars("ab"));
        assert_eq!((c.distance, c.insertions), (2, 2));
    }

    #[test]
    fn rate() {
        assert_eq!(error_rate(&chars("abcd"), &chars("abxd")).unwrap(), 0.25);
        assert!(matches!(
            error_rate::<char>(&[], &chars("a")),
            Err(Error::EmptyReference)
        ));
    }

    #[test]
    fn strips_reserved_labels() {
        let v = Vocab::with_content(&["a", "b"]).unwrap();
        let r = LabelSequence::from_labels(&v, &[3, 4, v.eos_id()]).unwrap();
        let h = LabelSequence::from_labels(&v, &[3, 4]).unwrap();
        assert_eq!(sequence_edit_distance(&r, &h, &v).distance, 0);
    }

    #[test]
    fn rtf_ratio() {
        let r = RtfReport::new(1.0, 2.0, Some(150.0), 2000.0).unwrap();
        assert_eq!(r.rtf, 0.5);
        assert!(r.expanded_before_final_arrival);
        assert!(RtfReport::new(1.0, 0.0, None, 0.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![RtfRow {
            utt_id: "u1".into(),
            report: RtfReport::new(0.5, 2.0, None, 2000.0).unwrap(),
            error_rate: Some(0.0),
            beam_size: 20,
        }];
        let mut buf = Vec::new();
        write_rtf_csv(&mut buf, &["beam=20".into()], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# beam=20\nutt_id,rtf,first_emission_offset_ms,error_rate,beam_size\nu1,0.250000,,0.000000,20\n"
        );
    }
}
