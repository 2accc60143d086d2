use super::Parameters;

/// Central finite-difference step used throughout the verification suite.
pub const FD_STEP: f64 = 1e-5;

/// Relative-error tolerance for analytic vs numeric gradients.
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Smallest denominator in the relative error. Central differences of an
/// O(1) loss carry roundoff near `1e-16 / FD_STEP`, so an exactly-zero
/// gradient reads as about `1e-11`; this floor keeps that below tolerance.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Compares an analytic gradient against central finite differences of `loss`.
///
/// Every scalar of `params` is perturbed by `±step`. Returns the maximum over
/// parameters of `|analytic − numeric| / max(|analytic|, |numeric|, GRAD_FLOOR)`.
pub fn gradient_check<P, F>(params: &P, analytic: &P, mut loss: F, step: f64) -> f64
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
    let grads: Vec<Vec<f64>> = analytic.param_slices().iter().map(|s| s.to_vec()).collect();
    assert_eq!(
        shapes,
        grads.iter().map(Vec::len).collect::<Vec<_>>(),
        "analytic gradient shape differs from parameters"
    );

    let mut probe = params.clone();
    let mut worst = 0.0_f64;
    for (s, g) in grads.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let original = probe.param_slices()[s][i];
            probe.param_slices_mut()[s][i] = original + step;
            let plus = loss(&probe);
            probe.param_slices_mut()[s][i] = original - step;
            let minus = loss(&probe);
            probe.param_slices_mut()[s][i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let denom = a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}
