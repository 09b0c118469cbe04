use super::toy::ToyModel;
use super::StreamingConfig;
use crate::error::{Error, Result};
use crate::types::{PosteriorLattice, RepresentationStream};

/// One encoder output with its CTC posterior row.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub h: Vec<f64>,
    pub posterior: Vec<f64>,
}

/// Bookkeeping for one hop, raw frame indices 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopTrace {
    /// Raw frames encoded by this hop.
    pub frames: (usize, usize),
    /// Future raw frames read beyond the hop, if any.
    pub lookahead: Option<(usize, usize)>,
    /// Raw frames received when the hop ran.
    pub raw_available: usize,
}

/// Latency-controlled encoder over the toy model.
///
/// Raw frames are consumed in hops of `N_c`. A hop runs once its frames and
/// `N_r` further frames are present, or when the input is finished. The
/// forward recurrence carries across hops. The backward recurrence for raw
/// frame `j` starts fresh and reads frames `j..=j + N_r`, so every output
/// depends only on the past and at most `N_r` future frames.
#[derive(Debug, Clone)]
pub struct LcEncoder<'m> {
    model: &'m ToyModel,
    n_c: usize,
    n_r: usize,
    raw: Vec<Vec<f64>>,
    encoded: usize,
    fwd: Vec<f64>,
    pool: Vec<Vec<f64>>,
    finished: bool,
    hops: Vec<HopTrace>,
}

impl<'m> LcEncoder<'m> {
    pub fn new(model: &'m ToyModel, cfg: &StreamingConfig) -> Result<Self> {
        cfg.validate()?;
        let d = model.config().decimation;
        if !cfg.n_c.is_multiple_of(d) {
            return Err(Error::InvalidConfig(format!(
                "chunk size {} is not a multiple of decimation {d}",
                cfg.n_c
            )));
        }
        Ok(Self {
            model,
            n_c: cfg.n_c,
            n_r: cfg.n_r,
            raw: Vec::new(),
            encoded: 0,
            fwd: vec![0.0; model.encoder_state_dim()],
            pool: Vec::new(),
            finished: false,
            hops: Vec::new(),
        })
    }

    pub fn raw_len(&self) -> usize {
        self.raw.len()
    }

    pub fn hops(&self) -> &[HopTrace] {
        &self.hops
    }

    /// Adds one raw frame and returns whatever hops became ready.
    pub fn push_raw(&mut self, x: Vec<f64>) -> Result<Vec<EncodedFrame>> {
        if self.finished {
            return Err(Error::StreamClosed);
        }
        if x.len() != self.model.dim() {
            return Err(Error::DimMismatch {
                expected: self.model.dim(),
                got: x.len(),
            });
        }
        self.raw.push(x);
        let mut out = Vec::new();
        while self.raw.len() >= self.encoded + self.n_c + self.n_r {
            self.run_hop(self.n_c, &mut out)?;
        }
        Ok(out)
    }

    /// Encodes the remaining frames with whatever lookahead exists.
    pub fn finish(&mut self) -> Result<Vec<EncodedFrame>> {
        if self.raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut out = Vec::new();
        if self.finished {
            return Ok(out);
        }
        self.finished = true;
        while self.encoded < self.raw.len() {
            let count = self.n_c.min(self.raw.len() - self.encoded);
            self.run_hop(count, &mut out)?;
        }
        if !self.pool.is_empty() {
            self.flush_pool(&mut out)?;
        }
        Ok(out)
    }

    fn run_hop(&mut self, count: usize, out: &mut Vec<EncodedFrame>) -> Result<()> {
        let start = self.encoded;
        let end = start + count;
        let last_raw = self.raw.len();
        for j in start..end {
            self.fwd = self.model.forward_state(&self.fwd, &self.raw[j]);
            let window_end = (j + self.n_r).min(last_raw - 1);
            let mut bwd = vec![0.0; self.model.encoder_state_dim()];
            for t in (j..=window_end).rev() {
                bwd = self.model.backward_state(&bwd, &self.raw[t]);
            }
            self.pool.push(self.model.combine(&self.raw[j], &self.fwd, &bwd));
            if self.pool.len() == self.model.config().decimation {
                self.flush_pool(out)?;
            }
        }
        let look_end = (end + self.n_r).min(last_raw);
        self.hops.push(HopTrace {
            frames: (start + 1, end),
            lookahead: (look_end > end).then_some((end + 1, look_end)),
            raw_available: last_raw,
        });
        self.encoded = end;
        Ok(())
    }

    fn flush_pool(&mut self, out: &mut Vec<EncodedFrame>) -> Result<()> {
        let n = self.pool.len() as f64;
        let mut h = vec![0.0; self.model.dim()];
        for frame in self.pool.drain(..) {
            for (acc, x) in h.iter_mut().zip(frame) {
                *acc += x;
            }
        }
        h.iter_mut().for_each(|x| *x /= n);
        let posterior = self.model.ctc_posterior(&h)?;
        out.push(EncodedFrame { h, posterior });
        Ok(())
    }
}

/// Representation stream, CTC lattice and hop log of a chunked pass.
#[derive(Debug, Clone)]
pub struct ChunkedOutput {
    pub stream: RepresentationStream,
    pub lattice: PosteriorLattice,
    pub hops: Vec<HopTrace>,
}

/// Runs the LC encoder over a complete utterance.
pub fn chunked_encode(raw: &[Vec<f64>], cfg: &StreamingConfig, model: &ToyModel) -> Result<ChunkedOutput> {
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut enc = LcEncoder::new(model, cfg)?;
    let mut frames = Vec::with_capacity(raw.len());
    for x in raw {
        frames.extend(enc.push_raw(x.clone())?);
    }
    frames.extend(enc.finish()?);
    let (hs, ps): (Vec<_>, Vec<_>) = frames.into_iter().map(|f| (f.h, f.posterior)).unzip();
    Ok(ChunkedOutput {
        stream: RepresentationStream::from_frames(model.dim(), hs)?,
        lattice: PosteriorLattice::from_frames(model.vocab().len(), ps)?,
        hops: enc.hops,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::attention::energy::gaussian_iter;
    use crate::sim::ToyConfig;

    fn raw(model: &ToyModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| gaussian_iter(&mut rng, 1.0).take(model.dim()).collect())
            .collect()
    }

    fn cfg(n_c: usize, n_r: usize) -> StreamingConfig {
        StreamingConfig {
            n_c,
            n_r,
            ..Default::default()
        }
    }

    #[test]
    fn hop_layout() {
        let m = ToyModel::new(ToyConfig::default(), 1).unwrap();
        let out = chunked_encode(&raw(&m, 5, 2), &cfg(2, 1), &m).unwrap();
        let frames: Vec<_> = out.hops.iter().map(|h| h.frames).collect();
        assert_eq!(frames, vec![(1, 2), (3, 4), (5, 5)]);
        let look: Vec<_> = out.hops.iter().map(|h| h.lookahead).collect();
        assert_eq!(look, vec![Some((3, 3)), Some((5, 5)), None]);
        assert_eq!(out.stream.t_enc(), 5);
        assert_eq!(out.lattice.len(), 5);
    }

    #[test]
    fn hops_wait_for_lookahead() {
        let m = ToyModel::new(ToyConfig::default(), 1).unwrap();
        let mut enc = LcEncoder::new(&m, &cfg(2, 1)).unwrap();
        let frames = raw(&m, 4, 3);
        assert!(enc.push_raw(frames[0].clone()).unwrap().is_empty());
        assert!(enc.push_raw(frames[1].clone()).unwrap().is_empty());
        assert_eq!(enc.push_raw(frames[2].clone()).unwrap().len(), 2);
        assert!(enc.push_raw(frames[3].clone()).unwrap().is_empty());
        assert_eq!(enc.finish().unwrap().len(), 2);
    }

    #[test]
    fn future_perturbation_is_invisible() {
        let m = ToyModel::new(ToyConfig::default(), 7).unwrap();
        let base = raw(&m, 20, 4);
        let (n_c, n_r) = (4, 2);
        let reference = chunked_encode(&base, &cfg(n_c, n_r), &m).unwrap();
        for j in 0..20 {
            let mut bumped = base.clone();
            for x in bumped.iter_mut().skip(j + n_r + 1) {
                x[0] += 1.0;
            }
            let out = chunked_encode(&bumped, &cfg(n_c, n_r), &m).unwrap();
            assert_eq!(out.stream.frames()[j], reference.stream.frames()[j]);
            assert_eq!(out.lattice.frames()[j], reference.lattice.frames()[j]);
        }
    }

    #[test]
    fn long_lookahead_matches_single_chunk() {
        let m = ToyModel::new(ToyConfig::default(), 8).unwrap();
        let frames = raw(&m, 13, 5);
        let chunked = chunked_encode(&frames, &cfg(3, 13), &m).unwrap();
        let single = chunked_encode(&frames, &cfg(13, 0), &m).unwrap();
        let whole = chunked_encode(&frames, &cfg(100, 100), &m).unwrap();
        assert_eq!(chunked.stream.frames(), whole.stream.frames());
        assert_eq!(single.hops.len(), 1);
    }

    #[test]
    fn decimation_pools() {
        let m = ToyModel::new(
            ToyConfig {
                decimation: 4,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let out = chunked_encode(&raw(&m, 18, 6), &cfg(8, 4), &m).unwrap();
        assert_eq!(out.stream.t_enc(), 5);
        assert!(LcEncoder::new(&m, &cfg(6, 0)).is_err());
    }

    #[test]
    fn empty_input() {
        let m = ToyModel::new(ToyConfig::default(), 3).unwrap();
        assert!(matches!(chunked_encode(&[], &cfg(2, 1), &m), Err(Error::EmptyInput)));
    }
}
