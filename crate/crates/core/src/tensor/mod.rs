//! Dense math sized to the model: matrices, the residual embedding block,
//! BCE, dropout, Adam, spectral normalisation, gradient checking and the
//! checkpoint container. Gradients are hand-written reverse-mode rules per
//! operation.

mod block;
pub mod checkpoint;
mod dense;
pub mod gradcheck;
mod loss;
mod optim;
mod spectral;

pub use block::{dropout, dropout_mask, BlockCache, EmbeddingBlock, Mode};
pub use checkpoint::Checkpoint;
pub use dense::{axpy, dot, norm2, relu, sigmoid, softmax, Matrix};
pub use loss::{bce_loss, bce_with_logit, softplus};
pub use optim::AdamState;
pub use spectral::SpectralNorm;

use crate::Real;

/// A fixed, ordered list of trainable tensors.
///
/// Gradient containers use the same type as the parameters they belong to,
/// so optimisers can pair tensors by position.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[Real]>;
    fn tensors_mut(&mut self) -> Vec<&mut [Real]>;

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn squared_norm(&self) -> Real {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Copies all tensors into one flat vector.
    fn flatten(&self) -> Vec<Real> {
        self.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    fn assign_flat(&mut self, flat: &[Real]) {
        let mut pos = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[pos..pos + t.len()]);
            pos += t.len();
        }
        assert_eq!(pos, flat.len(), "flat parameter length");
    }
}
