use super::stream::FrameRead;
use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Per-frame CTC label distributions `p(.|h_j)`, one column per vocabulary
/// entry (blank included). Grows in lockstep with the representation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorLattice {
    vocab_size: usize,
    frames: Vec<Vec<f64>>,
    closed: bool,
}

impl PosteriorLattice {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            frames: Vec::new(),
            closed: false,
        }
    }

    /// A closed lattice holding `frames`; widths are checked, normalization is not.
    pub fn from_frames(vocab_size: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        let mut lat = Self::new(vocab_size);
        for f in frames {
            lat.push(f)?;
        }
        lat.close();
        Ok(lat)
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if self.closed {
            return Err(Error::StreamClosed);
        }
        if row.len() != self.vocab_size {
            return Err(Error::WidthMismatch {
                frame: self.frames.len() + 1,
                expected: self.vocab_size,
                got: row.len(),
            });
        }
        self.frames.push(row);
        Ok(())
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn t_max(&self) -> Option<usize> {
        self.closed.then_some(self.frames.len())
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Row for frame `j` (1-based).
    pub fn get(&self, j: usize) -> FrameRead<'_> {
        debug_assert!(j >= 1);
        match self.frames.get(j - 1) {
            Some(f) => FrameRead::Ready(f),
            None if self.closed => FrameRead::Exhausted,
            None => FrameRead::Pending,
        }
    }

    /// `p(label | h_j)`, 1-based frame. Panics if the frame is absent.
    #[inline]
    pub fn prob(&self, j: usize, label: usize) -> f64 {
        self.frames[j - 1][label]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }
}

/// Checks that every frame has `vocab_size` non-negative entries summing to 1.
pub fn validate_lattice(lat: &PosteriorLattice) -> Result<()> {
    for (i, row) in lat.frames.iter().enumerate() {
        validate_row(row, lat.vocab_size, i)?;
    }
    Ok(())
}

/// Validates one posterior row; `index` is the 0-based frame index used
/// in errors.
pub fn validate_row(row: &[f64], vocab_size: usize, index: usize) -> Result<()> {
    if row.len() != vocab_size {
        return Err(Error::WidthMismatch {
            frame: index + 1,
            expected: vocab_size,
            got: row.len(),
        });
    }
    let sum: f64 = row.iter().sum();
    let bad_entry = row.iter().any(|p| !(p.is_finite() && *p >= 0.0));
    if bad_entry || (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::NonStochasticFrame(index));
    }
    Ok(())
}
