use rand::Rng;

use super::dense::{norm2, Matrix};
use crate::Real;

/// Persistent power-iteration estimate of a matrix's largest singular value.
///
/// Each [`apply`](Self::apply) runs one iteration from the stored left vector
/// and rescales the matrix by `1 / max(1, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNorm {
    u: Vec<Real>,
}

impl SpectralNorm {
    pub fn new<R: Rng>(rows: usize, rng: &mut R) -> Self {
        let mut u: Vec<Real> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm2(&u);
        if n > 0.0 {
            u.iter_mut().for_each(|x| *x /= n);
        }
        Self { u }
    }

    /// One power-iteration step. Returns the current estimate of `sigma_max`.
    pub fn estimate(&mut self, w: &Matrix) -> Real {
        let mut v = w.matvec_t(&self.u);
        let nv = norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let mut u = w.matvec(&v);
        let sigma = norm2(&u);
        if sigma == 0.0 {
            return 0.0;
        }
        u.iter_mut().for_each(|x| *x /= sigma);
        self.u = u;
        sigma
    }

    /// Rescales `w` so that its estimated spectral norm is at most one.
    pub fn apply(&mut self, w: &mut Matrix) -> Real {
        let sigma = self.estimate(w);
        if sigma > 1.0 {
            w.scale(1.0 / sigma);
        }
        sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_matrices_are_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = Matrix::identity(4);
        w.scale(0.5);
        let before = w.clone();
        let mut sn = SpectralNorm::new(4, &mut rng);
        for _ in 0..5 {
            sn.apply(&mut w);
        }
        assert_eq!(w, before);
    }

    #[test]
    fn zero_matrix_is_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = Matrix::zeros(3, 3);
        let mut sn = SpectralNorm::new(3, &mut rng);
        assert_eq!(sn.apply(&mut w), 0.0);
        assert_eq!(w, Matrix::zeros(3, 3));
    }

    #[test]
    fn scaled_identity_converges_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w = Matrix::identity(4);
        w.scale(3.0);
        let mut sn = SpectralNorm::new(4, &mut rng);
        for _ in 0..50 {
            sn.apply(&mut w);
        }
        assert!(w.max_abs_diff(&Matrix::identity(4)) < 1e-3);
    }
}
