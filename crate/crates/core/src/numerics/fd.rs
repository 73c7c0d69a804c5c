/// Central-difference gradient compared against an analytic gradient.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
}

/// Relative error per coordinate is `|fd - an| / max(|an|, 1e-6 ||an||_inf, 1e-12)`, so
/// coordinates whose derivative is negligible next to the largest one are judged on the
/// gradient's overall scale.
pub fn finite_diff_check<F, G>(mut f: F, mut grad: G, x: &[f64], h: f64) -> FdReport
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut analytic = vec![0.0; n];
    grad(x, &mut analytic);
    let mut probe = x.to_vec();
    let mut numeric = vec![0.0; n];
    for k in 0..n {
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        numeric[k] = (up - down) / (2.0 * h);
    }
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel_errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, d)| (a - d).abs() / a.abs().max(1e-6 * scale).max(1e-12))
        .collect();
    let max_rel_error = rel_errors.iter().cloned().fold(0.0, f64::max);
    FdReport {
        analytic,
        numeric,
        rel_errors,
        max_rel_error,
    }
}
