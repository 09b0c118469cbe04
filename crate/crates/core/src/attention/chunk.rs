//! Chunk-wise soft attention shared by MoChA and sMoChA.
//!
//! Frames are 1-based; every `u` / `ez` slice is indexed by `frame - 1`.

use super::ChunkOrder;

/// First frame of the width-`w` chunk ending at `k`, clipped at frame 1.
#[inline]
pub fn chunk_start(k: usize, w: usize) -> usize {
    (k + 1).saturating_sub(w).max(1)
}

/// Softmax of `u` over the chunk ending at frame `k`. Returns the first
/// frame of the (possibly clipped) chunk and its weights.
pub fn chunk_softmax(u: &[f64], k: usize, w: usize) -> (usize, Vec<f64>) {
    let start = chunk_start(k, w);
    let slice = &u[start - 1..k];
    let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = slice.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    (start, exps.into_iter().map(|e| e / total).collect())
}

/// MoChA decode-time chunk weights at end-point `endpoint`.
pub fn mocha_chunk_weights(u: &[f64], endpoint: usize, w: usize) -> (usize, Vec<f64>) {
    chunk_softmax(u, endpoint, w)
}

/// First frame of the sMoChA selection window `t - n + 1 .. t`.
pub fn order_window_start(endpoint: usize, order: ChunkOrder) -> usize {
    match order {
        ChunkOrder::Infinite => 1,
        ChunkOrder::Finite(n) => (endpoint + 1).saturating_sub(n).max(1),
    }
}

/// sMoChA higher-order decoding chunks: the selection expectations `ez`
/// are renormalized over the window of `n` end-points, then every window
/// end-point spreads its share over its own chunk.
///
/// Returns the first attended frame (`t - w - n + 2`, clipped) and weights
/// up to `endpoint`. When the window carries no mass the weight collapses
/// onto the end-point.
pub fn smocha_chunk_weights(u: &[f64], ez: &[f64], endpoint: usize, w: usize, order: ChunkOrder) -> (usize, Vec<f64>) {
    let window = order_window_start(endpoint, order);
    let span_start = chunk_start(window, w);
    let mut weights = vec![0.0; endpoint + 1 - span_start];
    let mass: f64 = ez[window - 1..endpoint].iter().sum();
    if !(mass > 0.0) {
        *weights.last_mut().expect("span holds the end-point") = 1.0;
        return (span_start, weights);
    }
    for k in window..=endpoint {
        let share = ez[k - 1] / mass;
        let (start, chunk) = chunk_softmax(u, k, w);
        for (offset, a) in chunk.iter().enumerate() {
            weights[start + offset - span_start] += share * a;
        }
    }
    (span_start, weights)
}

/// Expected MoChA chunk weights over all frames given selection
/// expectations `ez` for one output step.
pub fn expected_chunk_weights(ez: &[f64], u: &[f64], w: usize) -> Vec<f64> {
    let t = ez.len();
    let mut alpha = vec![0.0; t];
    for k in 1..=t {
        if ez[k - 1] == 0.0 {
            continue;
        }
        let (start, chunk) = chunk_softmax(u, k, w);
        for (offset, a) in chunk.iter().enumerate() {
            alpha[start + offset - 1] += ez[k - 1] * a;
        }
    }
    alpha
}
