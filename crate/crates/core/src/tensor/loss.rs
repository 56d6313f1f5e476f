use super::dense::sigmoid;
use crate::Real;

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: Real) -> Real {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross entropy on a logit with a +-1 target: `-ln sigmoid(y * s)`.
///
/// Returns the loss and its derivative with respect to `s`.
#[inline]
pub fn bce_with_logit(score: Real, positive: bool) -> (Real, Real) {
    let y = if positive { 1.0 } else { -1.0 };
    let loss = softplus(-y * score);
    let target = if positive { 1.0 } else { 0.0 };
    (loss, sigmoid(score) - target)
}

/// Mean BCE over a batch of (logit, target) pairs.
///
/// Returns the mean loss and the gradient of the mean with respect to each logit.
pub fn bce_loss(scores: &[Real], targets: &[bool]) -> (Real, Vec<Real>) {
    assert_eq!(scores.len(), targets.len());
    if scores.is_empty() {
        return (0.0, Vec::new());
    }
    let n = scores.len() as Real;
    let mut total = 0.0;
    let grads = scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let (l, g) = bce_with_logit(s, t);
            total += l;
            g / n
        })
        .collect();
    (total / n, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logit_costs_ln2() {
        let (l, _) = bce_with_logit(0.0, true);
        assert!((l - std::f64::consts::LN_2 as Real).abs() < 1e-12);
    }

    #[test]
    fn large_logits_are_stable() {
        let (l, g) = bce_with_logit(20.0, true);
        assert!(l <= 1e-8 && l >= 0.0);
        assert!(g.abs() < 1e-8);
        let (l, _) = bce_with_logit(1e4, false);
        assert!((l - 1e4).abs() < 1e-6);
        let (l, _) = bce_with_logit(-1e4, true);
        assert!(l.is_finite());
    }
}
