use rand::Rng;

use super::dense::{axpy, dot, Matrix};
use super::Parameters;
use crate::{Error, Real, Result};

/// Residual embedding block `f(v) = lambda * v + R * relu(v)`.
///
/// `R = 0, lambda = 1` is the identity map. During training the ReLU branch
/// goes through dropout before `R` is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBlock {
    pub r: Matrix,
    pub lambda: Real,
}

/// Values saved by [`EmbeddingBlock::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    input: Vec<Real>,
    /// relu(v) after dropout
    hidden: Vec<Real>,
    /// per-entry multiplier applied to relu(v): 0 or 1/(1-rate), all ones in eval
    mask: Option<Vec<Real>>,
}

impl EmbeddingBlock {
    pub fn identity(dim: usize) -> Self {
        Self { r: Matrix::zeros(dim, dim), lambda: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.r.rows()
    }

    /// Forward pass. `mask` is a dropout mask from [`dropout_mask`], or `None` in eval mode.
    pub fn forward(&self, v: &[Real], mask: Option<Vec<Real>>) -> Result<(Vec<Real>, BlockCache)> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "embedding block of dim {} got input of length {}",
                self.dim(),
                v.len()
            )));
        }
        let mut hidden: Vec<Real> = v.iter().map(|&x| x.max(0.0)).collect();
        if let Some(m) = &mask {
            for (h, &k) in hidden.iter_mut().zip(m) {
                *h *= k;
            }
        }
        let mut out = self.r.matvec(&hidden);
        axpy(self.lambda, v, &mut out);
        Ok((out, BlockCache { input: v.to_vec(), hidden, mask }))
    }

    /// Eval-mode forward without a cache.
    pub fn apply(&self, v: &[Real]) -> Vec<Real> {
        let hidden: Vec<Real> = v.iter().map(|&x| x.max(0.0)).collect();
        let mut out = self.r.matvec(&hidden);
        axpy(self.lambda, v, &mut out);
        out
    }

    /// Accumulates parameter gradients into `grad` and returns `d loss / d v`.
    pub fn backward(&self, cache: &BlockCache, dy: &[Real], grad: &mut EmbeddingBlock) -> Vec<Real> {
        grad.lambda += dot(dy, &cache.input);
        grad.r.add_outer(1.0, dy, &cache.hidden);
        let mut dh = self.r.matvec_t(dy);
        for (i, d) in dh.iter_mut().enumerate() {
            let gate = if cache.input[i] > 0.0 { 1.0 } else { 0.0 };
            let keep = cache.mask.as_ref().map_or(1.0, |m| m[i]);
            *d *= gate * keep;
        }
        axpy(self.lambda, dy, &mut dh);
        dh
    }
}

impl Parameters for EmbeddingBlock {
    fn tensors(&self) -> Vec<&[Real]> {
        vec![self.r.data(), std::slice::from_ref(&self.lambda)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [Real]> {
        vec![self.r.data_mut(), std::slice::from_mut(&mut self.lambda)]
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask<R: Rng>(len: usize, rate: Real, rng: &mut R) -> Vec<Real> {
    debug_assert!((0.0..1.0).contains(&rate));
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if (rng.gen::<f64>() as Real) < rate { 0.0 } else { keep })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Applies dropout to `v`. Eval mode and `rate == 0` are the identity.
pub fn dropout<R: Rng>(v: &[Real], rate: Real, mode: Mode, rng: &mut R) -> Vec<Real> {
    match mode {
        Mode::Eval => v.to_vec(),
        Mode::Train => {
            let mask = dropout_mask(v.len(), rate, rng);
            v.iter().zip(mask).map(|(x, m)| x * m).collect()
        }
    }
}
