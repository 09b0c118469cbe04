use std::task::Poll;

use super::chunk::{chunk_start, mocha_chunk_weights, order_window_start, smocha_chunk_weights};
use super::energy::{sigmoid, StepEnergy};
use super::expectation::{stop_distribution, weighted_context};
use super::location::loaa_attend;
use super::{AttentionConfig, AttentionParams, AttentionStepResult, ChunkOrder, Mechanism};
use crate::error::Result;
use crate::types::{FrameRead, RepresentationStream};

/// A frame triggers selection when `p > DECODE_THRESHOLD` (strict).
pub const DECODE_THRESHOLD: f64 = 0.5;

/// Resumable decode-mode attention step for one hypothesis.
///
/// The scan keeps every selection probability it has evaluated, so when it
/// stops on a frame the producer has not delivered yet it resumes exactly
/// where it left off.
#[derive(Debug, Clone)]
pub struct AttentionScan {
    config: AttentionConfig,
    q: Vec<f64>,
    prev_endpoint: usize,
    prev_weights: Option<Vec<f64>>,
    probs_start: usize,
    probs: Vec<f64>,
    next: usize,
}

impl AttentionScan {
    /// Starts step `i` with decoder state `q_{i-1}` and end-point `t_{i-1}`
    /// (1 at the first step). `prev_weights` is read only by location-aware
    /// attention; `None` means uniform.
    pub fn new(config: &AttentionConfig, q: Vec<f64>, prev_endpoint: usize, prev_weights: Option<Vec<f64>>) -> Self {
        let prev_endpoint = prev_endpoint.max(1);
        // MTA and higher-order sMoChA need the stop distribution from frame 1
        let probs_start = match (config.mechanism, config.chunk_order) {
            (Mechanism::Mta, _) => 1,
            (Mechanism::SMocha, order) if order != ChunkOrder::Finite(1) => 1,
            _ => prev_endpoint,
        };
        Self {
            config: config.clone(),
            q,
            prev_endpoint,
            prev_weights,
            probs_start,
            probs: Vec::new(),
            next: probs_start,
        }
    }

    /// Number of energy evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.probs.len()
    }

    /// Frame the scan is waiting on, if it has not finished.
    pub fn next_frame(&self) -> usize {
        self.next
    }

    pub fn poll(
        &mut self,
        stream: &RepresentationStream,
        params: &AttentionParams,
    ) -> Result<Poll<AttentionStepResult>> {
        if self.config.mechanism == Mechanism::Loaa {
            let Some(t_max) = stream.t_max() else {
                return Ok(Poll::Pending);
            };
            let prev = match &self.prev_weights {
                Some(w) if w.len() == t_max => w.clone(),
                _ => vec![1.0 / t_max.max(1) as f64; t_max],
            };
            return loaa_attend(&self.q, &prev, stream.frames(), &params.location).map(Poll::Ready);
        }

        let step = StepEnergy::monotonic(&params.monotonic, &self.q)?;
        loop {
            let j = self.next;
            match stream.get(j) {
                FrameRead::Pending => return Ok(Poll::Pending),
                FrameRead::Exhausted => return Ok(Poll::Ready(self.exhausted(stream.dim()))),
                FrameRead::Ready(h) => {
                    let p = sigmoid(step.eval(h)?);
                    self.probs.push(p);
                    self.next += 1;
                    if j >= self.prev_endpoint && p > DECODE_THRESHOLD {
                        return self.select(j, stream, params).map(Poll::Ready);
                    }
                }
            }
        }
    }

    fn exhausted(&self, dim: usize) -> AttentionStepResult {
        AttentionStepResult {
            endpoint: None,
            span_start: self.prev_endpoint,
            weights: Vec::new(),
            context: vec![0.0; dim],
            probs_start: self.probs_start,
            probs: self.probs.clone(),
        }
    }

    fn select(&self, t: usize, stream: &RepresentationStream, params: &AttentionParams) -> Result<AttentionStepResult> {
        let h = stream.frames();
        let (span_start, weights) = match self.config.mechanism {
            Mechanism::Hma => (t, vec![1.0]),
            Mechanism::Mocha => {
                let u = self.chunk_energies(chunk_start(t, self.config.chunk_width), t, h, params)?;
                mocha_chunk_weights(&u, t, self.config.chunk_width)
            }
            Mechanism::SMocha => {
                let w = self.config.chunk_width;
                let order = self.config.chunk_order;
                let first = chunk_start(order_window_start(t, order), w);
                let u = self.chunk_energies(first, t, h, params)?;
                let ez = self.stop_expectations(t);
                smocha_chunk_weights(&u, &ez, t, w, order)
            }
            Mechanism::Mta => {
                debug_assert_eq!(self.probs_start, 1);
                (1, stop_distribution(&self.probs[..t]))
            }
            Mechanism::Loaa => unreachable!("location-aware attention has no end-point"),
        };
        let context = weighted_context(&weights, span_start, h);
        Ok(AttentionStepResult {
            endpoint: Some(t),
            span_start,
            weights,
            context,
            probs_start: self.probs_start,
            probs: self.probs.clone(),
        })
    }

    /// Chunk energies for frames `first..=t`, zero-filled below `first` so
    /// the slice is indexed by `frame - 1`.
    fn chunk_energies(&self, first: usize, t: usize, h: &[Vec<f64>], params: &AttentionParams) -> Result<Vec<f64>> {
        let step = StepEnergy::chunk(&params.chunk, &self.q)?;
        let mut u = vec![0.0; t];
        for k in first..=t {
            u[k - 1] = step.eval(&h[k - 1])?;
        }
        Ok(u)
    }

    /// `E[z_k]` for frames `1..=t`; only meaningful from `probs_start` on.
    fn stop_expectations(&self, t: usize) -> Vec<f64> {
        if self.probs_start == 1 {
            stop_distribution(&self.probs[..t])
        } else {
            // first-order window: only E[z_t] is read and it normalizes to 1
            let mut ez = vec![0.0; t];
            ez[t - 1] = 1.0;
            ez
        }
    }
}

fn run(
    mechanism: Mechanism,
    config: Option<(usize, ChunkOrder)>,
    prev_endpoint: usize,
    q: &[f64],
    stream: &RepresentationStream,
    params: &AttentionParams,
) -> Result<Poll<AttentionStepResult>> {
    let mut cfg = AttentionConfig::with_mechanism(mechanism);
    if let Some((w, n)) = config {
        cfg.chunk_width = w;
        cfg.chunk_order = n;
    }
    cfg.validate()?;
    AttentionScan::new(&cfg, q.to_vec(), prev_endpoint, None).poll(stream, params)
}

/// HMA decode step: the first frame at or after `prev_endpoint` whose
/// selection probability exceeds 0.5 becomes the end-point and the context.
pub fn hma_decode_step(
    prev_endpoint: usize,
    q: &[f64],
    stream: &RepresentationStream,
    params: &AttentionParams,
) -> Result<Poll<AttentionStepResult>> {
    run(Mechanism::Hma, None, prev_endpoint, q, stream, params)
}

/// MoChA decode step: HMA end-point, then softmax over the width-`w` chunk.
pub fn mocha_decode_step(
    prev_endpoint: usize,
    q: &[f64],
    stream: &RepresentationStream,
    params: &AttentionParams,
    w: usize,
) -> Result<Poll<AttentionStepResult>> {
    run(
        Mechanism::Mocha,
        Some((w, ChunkOrder::Finite(1))),
        prev_endpoint,
        q,
        stream,
        params,
    )
}

/// sMoChA decode step in higher-order decoding chunks mode.
pub fn smocha_decode_step(
    prev_endpoint: usize,
    q: &[f64],
    stream: &RepresentationStream,
    params: &AttentionParams,
    w: usize,
    n: ChunkOrder,
) -> Result<Poll<AttentionStepResult>> {
    run(Mechanism::SMocha, Some((w, n)), prev_endpoint, q, stream, params)
}

/// MTA decode step: attention over the whole truncated history `1..=t_i`.
pub fn mta_decode_step(
    prev_endpoint: usize,
    q: &[f64],
    stream: &RepresentationStream,
    params: &AttentionParams,
) -> Result<Poll<AttentionStepResult>> {
    run(Mechanism::Mta, None, prev_endpoint, q, stream, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{EnergyParams, LocationParams};
    use nalgebra::{DMatrix, DVector};

    /// Parameters whose selection energy is `logit(h[0])` and whose chunk
    /// energy is `h[1]`, so tests dictate `p_{i,j}` and `u_{i,j}` directly.
    fn scripted_params() -> AttentionParams {
        // energy = g * v^ tanh(W2 h) + r with W2 picking h[0] scaled small;
        // use atanh trick: tanh(atanh(x)) = x, with h[0] holding atanh(logit/g)
        let monotonic = EnergyParams {
            w1: DMatrix::zeros(1, 1),
            w2: DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            b: DVector::zeros(1),
            v: DVector::from_element(1, 1.0),
            g: 20.0,
            r: 0.0,
        };
        let chunk = EnergyParams {
            w1: DMatrix::zeros(1, 1),
            w2: DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
            b: DVector::zeros(1),
            v: DVector::from_element(1, 1.0),
            g: 1.0,
            r: 0.0,
        };
        let location = LocationParams {
            energy: chunk.clone(),
            w3: DMatrix::zeros(1, 0),
            kernels: vec![],
        };
        AttentionParams {
            monotonic,
            chunk,
            location,
        }
    }

    /// Frame whose selection probability is exactly representable as `p`
    /// up to rounding; the third component tags the frame index.
    fn frame(p: f64, u: f64, tag: f64) -> Vec<f64> {
        let logit = (p / (1.0 - p)).ln();
        vec![(logit / 20.0).atanh(), u.tanh().atanh(), tag]
    }

    fn stream(ps: &[f64], closed: bool) -> RepresentationStream {
        let mut s = RepresentationStream::new(3);
        for (j, &p) in ps.iter().enumerate() {
            s.append_frame(frame(p, 0.0, (j + 1) as f64)).unwrap();
        }
        if closed {
            s.close();
        }
        s
    }

    fn ready(p: Poll<AttentionStepResult>) -> AttentionStepResult {
        match p {
            Poll::Ready(r) => r,
            Poll::Pending => panic!("unexpected pending"),
        }
    }

    #[test]
    fn hma_first_crossing() {
        let s = stream(&[0.2, 0.7, 0.9], true);
        let r = ready(hma_decode_step(1, &[0.0], &s, &scripted_params()).unwrap());
        assert_eq!(r.endpoint, Some(2));
        assert_eq!(r.context, s.frames()[1]);
    }

    #[test]
    fn hma_immediate_trigger() {
        let s = stream(&[0.9, 0.1, 0.9, 0.2], true);
        let r = ready(hma_decode_step(3, &[0.0], &s, &scripted_params()).unwrap());
        assert_eq!(r.endpoint, Some(3));
        assert_eq!(r.probs_start, 3);
        assert_eq!(r.probs.len(), 1);
    }

    #[test]
    fn hma_exhaustion_gives_zero_context() {
        let s = stream(&[0.1, 0.2, 0.3, 0.4, 0.45], true);
        let r = ready(hma_decode_step(1, &[0.0], &s, &scripted_params()).unwrap());
        assert_eq!(r.endpoint, None);
        assert_eq!(r.context, vec![0.0; 3]);
    }

    #[test]
    fn exact_half_does_not_trigger() {
        let s = RepresentationStream::from_frames(3, vec![vec![0.0, 0.0, 1.0], frame(0.8, 0.0, 2.0)]).unwrap();
        let r = ready(hma_decode_step(1, &[0.0], &s, &scripted_params()).unwrap());
        assert_eq!(r.probs[0], 0.5);
        assert_eq!(r.endpoint, Some(2));
    }

    #[test]
    fn open_stream_defers_then_resumes() {
        let mut s = stream(&[0.1, 0.2], false);
        let params = scripted_params();
        let mut scan = AttentionScan::new(&AttentionConfig::with_mechanism(Mechanism::Hma), vec![0.0], 1, None);
        assert!(scan.poll(&s, &params).unwrap().is_pending());
        assert_eq!(scan.evaluations(), 2);
        s.append_frame(frame(0.8, 0.0, 3.0)).unwrap();
        let r = ready(scan.poll(&s, &params).unwrap());
        assert_eq!(r.endpoint, Some(3));
        // nothing re-evaluated on resume
        assert_eq!(scan.evaluations(), 3);
    }

    #[test]
    fn mocha_width_one_is_hma() {
        let s = stream(&[0.3, 0.1, 0.8, 0.6], true);
        let p = scripted_params();
        let hard = ready(hma_decode_step(2, &[0.0], &s, &p).unwrap());
        let soft = ready(mocha_decode_step(2, &[0.0], &s, &p, 1).unwrap());
        assert_eq!(soft.endpoint, hard.endpoint);
        assert_eq!(soft.context, hard.context);
    }

    #[test]
    fn mocha_clipped_chunk() {
        let s = stream(&[0.3, 0.8, 0.1], true);
        let r = ready(mocha_decode_step(1, &[0.0], &s, &scripted_params(), 3).unwrap());
        assert_eq!(r.endpoint, Some(2));
        assert_eq!(r.span_start, 1);
        assert_eq!(r.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn mta_single_frame() {
        let s = stream(&[0.9, 0.2], true);
        let r = ready(mta_decode_step(1, &[0.0], &s, &scripted_params()).unwrap());
        assert_eq!(r.endpoint, Some(1));
        assert!((r.weights[0] - 0.9).abs() < 1e-12);
        assert!((r.context[2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn mta_respects_previous_endpoint() {
        let s = stream(&[0.9, 0.8, 0.3], true);
        let r = ready(mta_decode_step(2, &[0.0], &s, &scripted_params()).unwrap());
        assert_eq!(r.endpoint, Some(2));
        assert_eq!(r.span_start, 1);
        assert!((r.weights[0] - 0.9).abs() < 1e-12);
        assert!((r.weights[1] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn smocha_infinite_order_spans_history() {
        let s = stream(&[0.3, 0.2, 0.4, 0.1, 0.7], true);
        let r = ready(smocha_decode_step(1, &[0.0], &s, &scripted_params(), 2, ChunkOrder::Infinite).unwrap());
        assert_eq!(r.endpoint, Some(5));
        assert_eq!(r.span_start, 1);
        assert_eq!(r.weights.len(), 5);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn smocha_first_order_equals_mocha() {
        let s = stream(&[0.3, 0.2, 0.4, 0.1, 0.7], true);
        let p = scripted_params();
        let a = ready(smocha_decode_step(1, &[0.0], &s, &p, 3, ChunkOrder::Finite(1)).unwrap());
        let b = ready(mocha_decode_step(1, &[0.0], &s, &p, 3).unwrap());
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.context, b.context);
    }
}
