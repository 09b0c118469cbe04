use crate::error::{Error, Result};

/// Result of asking a growing stream for a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameRead<'a> {
    Ready(&'a [f64]),
    /// Not produced yet; the producer has not closed the stream.
    Pending,
    /// Past the final frame of a closed stream.
    Exhausted,
}

/// Encoder outputs `h_1, h_2, ...` arriving incrementally.
///
/// `t_enc` is the number of frames available; `t_max` is set once the
/// producer signals end of input and no append is accepted afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationStream {
    dim: usize,
    frames: Vec<Vec<f64>>,
    closed: bool,
}

impl RepresentationStream {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            frames: Vec::new(),
            closed: false,
        }
    }

    /// A closed stream holding `frames`.
    pub fn from_frames(dim: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        let mut s = Self::new(dim);
        for f in frames {
            s.append_frame(f)?;
        }
        s.close();
        Ok(s)
    }

    pub fn append_frame(&mut self, h: Vec<f64>) -> Result<()> {
        if self.closed {
            return Err(Error::StreamClosed);
        }
        if h.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: h.len(),
            });
        }
        self.frames.push(h);
        Ok(())
    }

    /// Signals end of input; `t_max` becomes the current `t_enc`.
    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_enc(&self) -> usize {
        self.frames.len()
    }

    pub fn t_max(&self) -> Option<usize> {
        self.closed.then_some(self.frames.len())
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Frame `j` (1-based).
    pub fn get(&self, j: usize) -> FrameRead<'_> {
        debug_assert!(j >= 1);
        match self.frames.get(j - 1) {
            Some(f) => FrameRead::Ready(f),
            None if self.closed => FrameRead::Exhausted,
            None => FrameRead::Pending,
        }
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }
}
