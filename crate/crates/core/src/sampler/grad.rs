//! Central finite-difference gradients for targets without analytic ones.

use crate::error::SamplerError;

/// Central differences with per-coordinate step `1e-6 * max(1, |x_k|)`.
/// Errors when the log density is non-finite at a probe point; callers treat
/// that as a divergent proposal.
pub fn finite_diff_grad(
    log_density: impl Fn(&[f64]) -> f64,
    x: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1.0);
        probe[k] = x[k] + h;
        let up = log_density(&probe);
        probe[k] = x[k] - h;
        let down = log_density(&probe);
        probe[k] = x[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(SamplerError::NonFiniteProbe { coordinate: k });
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
