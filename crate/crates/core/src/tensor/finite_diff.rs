use super::Tensor;
use crate::{Error, Result};

/// Central-difference gradient of a scalar function:
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for every element `i`.
pub fn finite_diff_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor, eps: f64) -> Result<Tensor> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// Largest elementwise deviation, relative to the larger of the two
/// gradients' max-norms.
///
/// Normalising by the vector scale keeps near-zero components (where central
/// differences only have absolute accuracy) from dominating the comparison.
/// Two all-zero gradients compare as exactly equal.
pub fn grad_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    let scale = analytic.max_abs().max(numeric.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}
