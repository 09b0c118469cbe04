use crate::error::{Error, Result};
use crate::types::{LabelSequence, PosteriorLattice, Vocab};

pub const MAX_ORACLE_FRAMES: usize = 8;
pub const MAX_ORACLE_SYMBOLS: usize = 4;

/// Prefix probability by enumerating every alignment string.
///
/// Alignments run over blank and every non-reserved column; `<sos>` and
/// `<eos>` columns are skipped, so lattices handed to the oracle should
/// keep them at zero. A prefix ending in `<eos>` keeps only alignments that
/// collapse to exactly its content.
pub fn brute_force_prefix_oracle(prefix: &LabelSequence, lat: &PosteriorLattice, vocab: &Vocab) -> Result<f64> {
    let t = lat.len();
    if t == 0 {
        return Err(Error::EmptyLattice);
    }
    let symbols: Vec<usize> = (0..lat.vocab_size())
        .filter(|&c| c != vocab.sos_id() && c != vocab.eos_id())
        .collect();
    if t > MAX_ORACLE_FRAMES || symbols.len() > MAX_ORACLE_SYMBOLS {
        return Err(Error::TooLarge {
            frames: t,
            symbols: symbols.len(),
        });
    }
    let target = prefix.content(vocab);
    let exact = prefix.is_complete(vocab);
    let blank = vocab.blank_id();
    let k = symbols.len();
    let mut digits = vec![0usize; t];
    let mut total = 0.0;
    let mut collapsed = Vec::with_capacity(t);
    loop {
        collapsed.clear();
        let mut prob = 1.0;
        let mut prev = None;
        for (j, &d) in digits.iter().enumerate() {
            let s = symbols[d];
            prob *= lat.frames()[j][s];
            if s != blank && prev != Some(s) {
                collapsed.push(s);
            }
            prev = Some(s);
        }
        let hit = if exact {
            collapsed == target
        } else {
            collapsed.starts_with(target)
        };
        if hit {
            total += prob;
        }
        // next string in base-k counting order
        let mut pos = 0;
        loop {
            if pos == t {
                return Ok(total.ln());
            }
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::new(&["<blank>", "a", "b", "<sos>", "<eos>"]).unwrap()
    }

    fn lat(rows: &[[f64; 3]]) -> PosteriorLattice {
        PosteriorLattice::from_frames(5, rows.iter().map(|r| vec![r[0], r[1], r[2], 0.0, 0.0]).collect()).unwrap()
    }

    #[test]
    fn single_frame() {
        let v = vocab();
        let s = brute_force_prefix_oracle(
            &LabelSequence::from_labels(&v, &[1]).unwrap(),
            &lat(&[[0.2, 0.7, 0.1]]),
            &v,
        )
        .unwrap();
        assert!((s - 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn nine_strings() {
        // a-initial collapses among the 9 strings: aa a<b> ab <b>a
        let v = vocab();
        let s = brute_force_prefix_oracle(
            &LabelSequence::from_labels(&v, &[1]).unwrap(),
            &lat(&[[1.0 / 3.0; 3]; 2]),
            &v,
        )
        .unwrap();
        assert!((s - (4.0f64 / 9.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn impossible_prefix() {
        let v = vocab();
        let s = brute_force_prefix_oracle(
            &LabelSequence::from_labels(&v, &[2]).unwrap(),
            &lat(&[[0.5, 0.5, 0.0]; 3]),
            &v,
        )
        .unwrap();
        assert_eq!(s, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_large() {
        let v = vocab();
        let big = lat(&[[1.0 / 3.0; 3]; 9]);
        assert!(matches!(
            brute_force_prefix_oracle(&LabelSequence::root(&v), &big, &v),
            Err(Error::TooLarge { frames: 9, .. })
        ));
    }
}
