//! Central finite-difference gradient checking.

use crate::Real;

/// Numerical gradient of `f` at `x` by central differences with step `h`.
pub fn numerical_gradient(f: &mut dyn FnMut(&[Real]) -> Real, x: &[Real], h: Real) -> Vec<Real> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / (|a| + |n|)` over whole vectors; zero when both vanish.
pub fn relative_error(analytic: &[Real], numeric: &[Real]) -> Real {
    assert_eq!(analytic.len(), numeric.len());
    let diff: Real = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum::<Real>().sqrt();
    let scale: Real = analytic.iter().map(|a| a * a).sum::<Real>().sqrt()
        + numeric.iter().map(|n| n * n).sum::<Real>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Compares `analytic` against central differences of `f` at `x`.
pub fn check_gradient(
    f: &mut dyn FnMut(&[Real]) -> Real,
    x: &[Real],
    analytic: &[Real],
    h: Real,
) -> Real {
    let numeric = numerical_gradient(f, x, h);
    relative_error(analytic, &numeric)
}
