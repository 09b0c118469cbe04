use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Parameters of the monotonic energy function
/// `g * (v / ||v||)^T tanh(W1 q + W2 h + b) + r`.
///
/// The chunk energy used inside MoChA chunks reads the same fields but
/// applies `v` unnormalized and ignores `g` and `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    /// Decoder-state projection, `att_dim x state_dim`.
    pub w1: DMatrix<f64>,
    /// Representation projection, `att_dim x rep_dim`.
    pub w2: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v: DVector<f64>,
    pub g: f64,
    pub r: f64,
}

impl EnergyParams {
    pub fn att_dim(&self) -> usize {
        self.b.len()
    }

    pub fn state_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn rep_dim(&self) -> usize {
        self.w2.ncols()
    }

    /// Gaussian weights scaled by fan-in, `v ~ N(0, 1)`, with the given scale and offset.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        att_dim: usize,
        state_dim: usize,
        rep_dim: usize,
        g: f64,
        r: f64,
    ) -> Self {
        let w1 = gaussian_matrix(rng, att_dim, state_dim, 1.0 / (state_dim.max(1) as f64).sqrt());
        let w2 = gaussian_matrix(rng, att_dim, rep_dim, 1.0 / (rep_dim.max(1) as f64).sqrt());
        let b = DVector::from_iterator(att_dim, gaussian_iter(rng, 0.1).take(att_dim));
        let v = DVector::from_iterator(att_dim, gaussian_iter(rng, 1.0).take(att_dim));
        Self { w1, w2, b, v, g, r }
    }

    fn check_dims(&self, q: &[f64], h: Option<&[f64]>) -> Result<()> {
        if q.len() != self.state_dim() {
            return Err(Error::DimMismatch {
                expected: self.state_dim(),
                got: q.len(),
            });
        }
        if let Some(h) = h {
            if h.len() != self.rep_dim() {
                return Err(Error::DimMismatch {
                    expected: self.rep_dim(),
                    got: h.len(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    DMatrix::from_iterator(rows, cols, gaussian_iter(rng, std).take(rows * cols))
}

pub(crate) fn gaussian_iter<R: Rng + ?Sized>(rng: &mut R, std: f64) -> impl Iterator<Item = f64> + '_ {
    let normal = Normal::new(0.0, std).expect("finite std");
    std::iter::repeat_with(move || normal.sample(rng))
}

/// Energy evaluator with the decoder-state term precomputed for one output step.
#[derive(Debug, Clone)]
pub struct StepEnergy<'p> {
    params: &'p EnergyParams,
    pre: DVector<f64>,
    weights: DVector<f64>,
    offset: f64,
}

impl<'p> StepEnergy<'p> {
    /// Normalized monotonic energy for state `q`.
    pub fn monotonic(params: &'p EnergyParams, q: &[f64]) -> Result<Self> {
        params.check_dims(q, None)?;
        let norm = params.v.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVectorV);
        }
        Ok(Self {
            params,
            pre: state_term(params, q),
            weights: &params.v * (params.g / norm),
            offset: params.r,
        })
    }

    /// Unnormalized chunk energy `v^T tanh(W1 q + W2 h + b)` for state `q`.
    pub fn chunk(params: &'p EnergyParams, q: &[f64]) -> Result<Self> {
        params.check_dims(q, None)?;
        Ok(Self {
            params,
            pre: state_term(params, q),
            weights: params.v.clone(),
            offset: 0.0,
        })
    }

    pub fn eval(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.params.rep_dim() {
            return Err(Error::DimMismatch {
                expected: self.params.rep_dim(),
                got: h.len(),
            });
        }
        let mut act = &self.params.w2 * DVectorView::from_slice(h, h.len());
        act += &self.pre;
        act.apply(|x| *x = x.tanh());
        Ok(self.weights.dot(&act) + self.offset)
    }
}

fn state_term(params: &EnergyParams, q: &[f64]) -> DVector<f64> {
    &params.w1 * DVectorView::from_slice(q, q.len()) + &params.b
}

/// Monotonic energy `e_{i,j}` of decoder state `q` against representation `h`.
pub fn energy(q: &[f64], h: &[f64], params: &EnergyParams) -> Result<f64> {
    params.check_dims(q, Some(h))?;
    StepEnergy::monotonic(params, q)?.eval(h)
}

/// Pre-softmax chunk activation `u_{i,k}`.
pub fn chunk_energy(q: &[f64], h: &[f64], params: &EnergyParams) -> Result<f64> {
    params.check_dims(q, Some(h))?;
    StepEnergy::chunk(params, q)?.eval(h)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
