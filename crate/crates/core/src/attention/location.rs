use nalgebra::{DMatrix, DVector, DVectorView};

use super::expectation::weighted_context;
use super::{AttentionStepResult, EnergyParams};
use crate::error::{Error, Result};

/// Location-aware attention parameters: the content energy terms plus a
/// bank of 1-D filters over the previous weights and their projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationParams {
    /// `W1`, `W2`, `b`, `v`; `g` and `r` are unused.
    pub energy: EnergyParams,
    /// Location-feature projection, `att_dim x kernels.len()`.
    pub w3: DMatrix<f64>,
    /// Convolution filters `Q`, one per location feature, odd widths.
    pub kernels: Vec<Vec<f64>>,
}

/// Same-length 1-D convolution with zero padding, kernel centered at
/// `kernel.len() / 2`.
pub fn convolve(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len() as isize;
    let c = (kernel.len() / 2) as isize;
    (0..n)
        .map(|j| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(m, &q)| {
                    let src = j - m as isize + c;
                    (0..n).contains(&src).then(|| q * signal[src as usize])
                })
                .sum()
        })
        .collect()
}

/// One offline location-aware attention step over the complete `h`.
pub fn loaa_attend(
    q: &[f64],
    prev_weights: &[f64],
    h: &[Vec<f64>],
    params: &LocationParams,
) -> Result<AttentionStepResult> {
    let t = h.len();
    if t == 0 {
        return Err(Error::EmptyStream);
    }
    if prev_weights.len() != t {
        return Err(Error::DimMismatch {
            expected: t,
            got: prev_weights.len(),
        });
    }
    let e = &params.energy;
    if q.len() != e.state_dim() {
        return Err(Error::DimMismatch {
            expected: e.state_dim(),
            got: q.len(),
        });
    }
    let features: Vec<Vec<f64>> = params.kernels.iter().map(|k| convolve(prev_weights, k)).collect();
    let state = &e.w1 * DVectorView::from_slice(q, q.len()) + &e.b;
    let mut energies = Vec::with_capacity(t);
    for (j, hj) in h.iter().enumerate() {
        if hj.len() != e.rep_dim() {
            return Err(Error::DimMismatch {
                expected: e.rep_dim(),
                got: hj.len(),
            });
        }
        let f = DVector::from_iterator(features.len(), features.iter().map(|f| f[j]));
        let mut act = &e.w2 * DVectorView::from_slice(hj, hj.len()) + &params.w3 * f;
        act += &state;
        act.apply(|x| *x = x.tanh());
        energies.push(e.v.dot(&act));
    }
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = energies.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let weights: Vec<f64> = exps.iter().map(|x| x / total).collect();
    let context = weighted_context(&weights, 1, h);
    Ok(AttentionStepResult {
        endpoint: None,
        span_start: 1,
        weights,
        context,
        probs_start: 1,
        probs: Vec::new(),
    })
}
