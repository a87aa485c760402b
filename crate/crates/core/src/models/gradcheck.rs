//! Central finite-difference gradient checks.
//!
//! The numeric side only ever evaluates the loss, so it is independent of
//! the backward pass it verifies.

use rand_chacha::ChaCha8Rng;

use super::Network;

/// Denominator floor for relative errors of near-zero gradient entries.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against `(f(θ + εeᵢ) − f(θ − εeᵢ)) / 2ε` for every
/// coordinate of `theta`.
pub fn check_flat<F: FnMut(&[f64]) -> f64>(
    theta: &[f64],
    analytic: &[f64],
    eps: f64,
    mut loss: F,
) -> GradCheck {
    assert_eq!(theta.len(), analytic.len(), "gradient length must match parameters");
    let mut probe = theta.to_vec();
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: theta.len(),
    };
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = loss(&probe);
        probe[i] = theta[i] - eps;
        let down = loss(&probe);
        probe[i] = theta[i];
        let err = relative_error(analytic[i], (up - down) / (2.0 * eps));
        if err > worst.max_rel_error {
            worst.max_rel_error = err;
            worst.worst_index = i;
        }
    }
    worst
}

/// Gradient check of a network with dropout disabled.
pub fn check_network<N: Network>(net: &N, xs: &[&[f64]], ys: &[usize], eps: f64) -> GradCheck {
    let (_, grad) = net.loss_and_gradients(xs, ys, None::<&mut ChaCha8Rng>);
    let mut probe = net.clone();
    check_flat(&net.flat_params(), &grad.flat_params(), eps, |theta| {
        probe.set_flat_params(theta);
        probe.loss(xs, ys)
    })
}
