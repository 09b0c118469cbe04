//! Training-mode expectations of the monotonic attention variants.
//!
//! Every `p` argument holds one row of selection probabilities per output
//! step, each of length `T`.

use super::chunk::expected_chunk_weights;

/// HMA expectations `E[z_{i,j}]`, evaluated from the closed sum
/// `p_{i,j} * sum_{k<=j} E[z_{i-1,k}] * prod_{l=k}^{j-1} (1 - p_{i,l})`.
///
/// `init` is the row `E[z_{0,.}]`, conventionally one-hot at frame 1.
pub fn hma_expectation(p: &[Vec<f64>], init: &[f64]) -> Vec<Vec<f64>> {
    let mut prev = init.to_vec();
    let mut rows = Vec::with_capacity(p.len());
    for row in p {
        debug_assert_eq!(row.len(), prev.len());
        let t = row.len();
        let mut ez = vec![0.0; t];
        for j in 0..t {
            let mut acc = 0.0;
            let mut survive = 1.0;
            for k in (0..=j).rev() {
                acc += prev[k] * survive;
                if k > 0 {
                    survive *= 1.0 - row[k - 1];
                }
            }
            ez[j] = row[j] * acc;
        }
        rows.push(ez.clone());
        prev = ez;
    }
    rows
}

/// HMA expectations via the recursion
/// `E[z_{i,j}] = p_{i,j}/p_{i,j-1} (1 - p_{i,j-1}) E[z_{i,j-1}] + p_{i,j} E[z_{i-1,j}]`.
///
/// Probabilities must lie in `(0, 1]`; sigmoid outputs always do.
pub fn hma_expectation_recursive(p: &[Vec<f64>], init: &[f64]) -> Vec<Vec<f64>> {
    let mut prev = init.to_vec();
    let mut rows = Vec::with_capacity(p.len());
    for row in p {
        let t = row.len();
        let mut ez = vec![0.0; t];
        for j in 0..t {
            let carried = if j == 0 {
                0.0
            } else {
                row[j] / row[j - 1] * (1.0 - row[j - 1]) * ez[j - 1]
            };
            ez[j] = carried + row[j] * prev[j];
        }
        rows.push(ez.clone());
        prev = ez;
    }
    rows
}

/// MoChA expected attention weights `E[alpha_{i,j}]`: HMA selection
/// expectations spread over the width-`w` chunk ending at each frame.
pub fn mocha_expectation(p: &[Vec<f64>], u: &[Vec<f64>], init: &[f64], w: usize) -> Vec<Vec<f64>> {
    hma_expectation(p, init)
        .iter()
        .zip(u)
        .map(|(ez, u_row)| expected_chunk_weights(ez, u_row, w))
        .collect()
}

/// sMoChA expectations `E[z_{i,j}] = p_{i,j} prod_{k<j} (1 - p_{i,k})`;
/// each output step inspects the input from frame 1.
pub fn smocha_expectation(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    p.iter().map(|row| stop_distribution(row)).collect()
}

/// sMoChA expectations via `E[z_{i,j}] = p_{i,j}/p_{i,j-1} (1 - p_{i,j-1}) E[z_{i,j-1}]`.
pub fn smocha_expectation_recursive(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    p.iter()
        .map(|row| {
            let mut ez = Vec::with_capacity(row.len());
            for j in 0..row.len() {
                let v = if j == 0 {
                    row[0]
                } else {
                    row[j] / row[j - 1] * (1.0 - row[j - 1]) * ez[j - 1]
                };
                ez.push(v);
            }
            ez
        })
        .collect()
}

/// First-stop distribution `p_j prod_{k<j} (1 - p_k)` of one row. This is
/// both the sMoChA selection expectation and the MTA attention weight.
pub fn stop_distribution(p: &[f64]) -> Vec<f64> {
    let mut survive = 1.0;
    p.iter()
        .map(|&pj| {
            let a = pj * survive;
            survive *= 1.0 - pj;
            a
        })
        .collect()
}

/// MTA training weights over all `T` frames and the contexts they induce.
pub fn mta_train_weights(p: &[Vec<f64>], h: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let weights: Vec<Vec<f64>> = p.iter().map(|row| stop_distribution(row)).collect();
    let contexts = weights.iter().map(|w| weighted_context(w, 1, h)).collect();
    (weights, contexts)
}

/// `sum_j weights[j] * h_{start + j}` (1-based `start`).
pub fn weighted_context(weights: &[f64], start: usize, h: &[Vec<f64>]) -> Vec<f64> {
    let dim = h.first().map_or(0, Vec::len);
    let mut ctx = vec![0.0; dim];
    for (offset, &a) in weights.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (c, x) in ctx.iter_mut().zip(&h[start - 1 + offset]) {
            *c += a * x;
        }
    }
    ctx
}

/// One-hot row at frame 1, the initial expectation for HMA and MoChA.
pub fn one_hot_init(t: usize) -> Vec<f64> {
    let mut init = vec![0.0; t];
    if t > 0 {
        init[0] = 1.0;
    }
    init
}
