use super::Parameters;
use crate::Real;

/// Bias-corrected Adam with PyTorch default hyper-parameters.
///
/// One instance per parameter group; moments are allocated on the first step
/// and matched to the group by tensor position.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    step: u64,
    first: Vec<Vec<Real>>,
    second: Vec<Vec<Real>>,
}

impl AdamState {
    pub fn new(lr: Real) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every tensor of `params` using the matching tensor of `grads`.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        assert_eq!(params.len(), grads.len(), "parameter/gradient tensor count");
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        assert_eq!(self.first.len(), grads.len(), "parameter group changed shape");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let step_size = self.lr / bc1;
        let bc2_sqrt = bc2.sqrt();
        for (k, (p, g)) in params.iter_mut().zip(&grads).enumerate() {
            assert_eq!(p.len(), g.len(), "tensor {k} shape mismatch");
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let denom = v[i].sqrt() / bc2_sqrt + self.eps;
                p[i] -= step_size * m[i] / denom;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Scalar(Real);

    impl Parameters for Scalar {
        fn tensors(&self) -> Vec<&[Real]> {
            vec![std::slice::from_ref(&self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [Real]> {
            vec![std::slice::from_mut(&mut self.0)]
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Scalar(0.7);
        let mut adam = AdamState::new(0.1);
        for _ in 0..10 {
            adam.step(&mut p, &Scalar(0.0));
        }
        assert_eq!(p.0, 0.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = Scalar(0.0);
        let mut adam = AdamState::new(0.01);
        adam.step(&mut p, &Scalar(1.0));
        let expected = -0.01 * 1.0 / (1.0 + 1e-8);
        assert!((p.0 - expected).abs() < 1e-15, "{}", p.0);
    }

    #[test]
    fn minimises_quadratic() {
        // Scalar simulation of the same recurrences as the oracle.
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut p = Scalar(1.0);
        let mut adam = AdamState::new(0.1);
        for t in 1..=200 {
            let g = 2.0 * w;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 0.1 * mh / (vh.sqrt() + 1e-8);
            let grad = Scalar(2.0 * p.0);
            adam.step(&mut p, &grad);
        }
        assert!(w.abs() < 1e-2, "oracle {w}");
        assert!(p.0.abs() < 1e-2, "adam {}", p.0);
        assert!((p.0 as f64 - w).abs() < 1e-9);
    }
}
