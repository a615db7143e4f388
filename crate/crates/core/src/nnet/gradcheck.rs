//! Finite-difference verification of analytic gradients.

/// Central-difference step.
pub const STEP: f64 = 1e-5;

/// Checks one parameter block against its analytic gradient.
///
/// `eval(i, delta)` must return the scalar loss with parameter `i`
/// temporarily offset by `delta`, restoring the parameter before returning
/// (save the old value and write it back; do not subtract, which rounds).
/// Returns the maximum relative error
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn check_block(analytic: &[f64], mut eval: impl FnMut(usize, f64) -> f64) -> f64 {
    let mut max_err = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let lp = eval(i, STEP);
        let lm = eval(i, -STEP);
        let numeric = (lp - lm) / (2.0 * STEP);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if err > max_err {
            max_err = err;
        }
    }
    max_err
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_gradient_of_quadratic_passes() {
        // f(p) = sum(p²), df/dp_i = 2 p_i.
        let mut p = [1.5, -0.3, 2.0];
        let analytic: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let err = check_block(&analytic, |i, d| {
            let old = p[i];
            p[i] = old + d;
            let l = p.iter().map(|v| v * v).sum::<f64>();
            p[i] = old;
            l
        });
        assert!(err < 1e-8, "error {err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut p = [1.5, -0.3, 2.0];
        // Sign-flipped "backward pass".
        let corrupted: Vec<f64> = p.iter().map(|v| -2.0 * v).collect();
        let err = check_block(&corrupted, |i, d| {
            let old = p[i];
            p[i] = old + d;
            let l = p.iter().map(|v| v * v).sum::<f64>();
            p[i] = old;
            l
        });
        assert!(err > 0.1, "sentinel missed the corruption: error {err}");
    }
}
