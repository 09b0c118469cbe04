//! Plain-text file formats for streams, lattices and ranked hypotheses.
//!
//! Readers skip blank lines and lines starting with `#`. Writers print reals
//! with the shortest representation that parses back to the same value.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::{validate_row, Hypothesis, LabelSequence, PosteriorLattice, RepresentationStream, Vocab};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses `key1=<n> key2=<n>`.
fn parse_header(line_no: usize, line: &str, keys: [&str; 2]) -> Result<[usize; 2]> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(parse_err(
            line_no,
            format!("expected header `{}=<n> {}=<n>`", keys[0], keys[1]),
        ));
    }
    let mut out = [0; 2];
    for (slot, (field, key)) in out.iter_mut().zip(fields.iter().zip(keys)) {
        let value = field
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| parse_err(line_no, format!("expected `{key}=<n>`, got {field:?}")))?;
        *slot = value
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad count {value:?} for {key}")))?;
    }
    Ok(out)
}

fn parse_row(line_no: usize, line: &str, width: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("bad number {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if row.len() != width {
        return Err(parse_err(
            line_no,
            format!("expected {width} values, got {}", row.len()),
        ));
    }
    Ok(row)
}

/// Header keys plus `T` rows of `width` reals.
fn parse_matrix(text: &str, keys: [&str; 2]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let [width, frames] = parse_header(line_no, header, keys)?;
    let mut rows = Vec::with_capacity(frames);
    let mut last = line_no;
    for (line_no, line) in lines {
        if rows.len() == frames {
            return Err(parse_err(line_no, format!("more than the declared {frames} frames")));
        }
        rows.push(parse_row(line_no, line, width)?);
        last = line_no;
    }
    if rows.len() != frames {
        return Err(parse_err(
            last,
            format!("declared {frames} frames, found {}", rows.len()),
        ));
    }
    Ok((width, rows))
}

fn write_matrix(keys: [&str; 2], width: usize, rows: &[Vec<f64>]) -> String {
    let mut out = format!("{}={} {}={}\n", keys[0], width, keys[1], rows.len());
    for row in rows {
        let mut first = true;
        for x in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{x:?}");
        }
        out.push('\n');
    }
    out
}

/// Reads a closed representation stream (also used for raw frames).
pub fn read_stream(text: &str) -> Result<RepresentationStream> {
    let (dim, rows) = parse_matrix(text, ["dim", "frames"])?;
    if dim == 0 {
        return Err(parse_err(1, "dim must be >= 1"));
    }
    RepresentationStream::from_frames(dim, rows)
}

pub fn write_stream(dim: usize, frames: &[Vec<f64>]) -> String {
    write_matrix(["dim", "frames"], dim, frames)
}

/// Reads a closed lattice and checks every row.
pub fn read_lattice(text: &str) -> Result<PosteriorLattice> {
    let (v, rows) = parse_matrix(text, ["vocab", "frames"])?;
    for (i, row) in rows.iter().enumerate() {
        validate_row(row, v, i)?;
    }
    PosteriorLattice::from_frames(v, rows)
}

pub fn write_lattice(lat: &PosteriorLattice) -> String {
    write_matrix(["vocab", "frames"], lat.vocab_size(), lat.frames())
}

pub fn read_vocab(text: &str) -> Result<Vocab> {
    Vocab::parse(text)
}

/// One ranked line: `rank combined s_att s_ctc s_lm labels`, tab-separated.
/// `s_ctc` falls back to the T-CTC score for unfinalized hypotheses.
pub fn write_hypotheses(hyps: &[Hypothesis], vocab: &Vocab) -> String {
    let mut out = String::new();
    for (rank, h) in hyps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
            rank + 1,
            h.s_combined,
            h.s_att,
            h.s_ctc.unwrap_or(h.s_tctc),
            h.s_lm,
            vocab.decode(h.seq.labels())
        );
    }
    out
}

/// Parsed hypothesis line.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisRecord {
    pub rank: usize,
    pub combined: f64,
    pub s_att: f64,
    pub s_ctc: f64,
    pub s_lm: f64,
    pub labels: LabelSequence,
}

pub fn read_hypotheses(text: &str, vocab: &Vocab) -> Result<Vec<HypothesisRecord>> {
    content_lines(text)
        .map(|(line_no, line)| {
            let fields: Vec<&str> = line.splitn(6, '\t').collect();
            if fields.len() < 5 {
                return Err(parse_err(line_no, "expected 6 tab-separated fields"));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad number {:?}", fields[i])))
            };
            let rank = fields[0]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad rank {:?}", fields[0])))?;
            let mut ids = vocab
                .encode(fields.get(5).copied().unwrap_or(""))
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            ids.push(vocab.eos_id());
            Ok(HypothesisRecord {
                rank,
                combined: num(1)?,
                s_att: num(2)?,
                s_ctc: num(3)?,
                s_lm: num(4)?,
                labels: LabelSequence::from_labels(vocab, &ids).map_err(|e| parse_err(line_no, e.to_string()))?,
            })
        })
        .collect()
}
