//! Small statistics helpers used by convergence studies.

/// Least-squares slope of `log2(err)` against `log2(h)` plus the fit residual
/// (root-mean-square deviation from the fitted line).
///
/// Requires at least two (typically three or more) levels with positive
/// errors; non-positive errors are clamped to `1e-300` so that exact zeros do
/// not poison the fit.
pub fn fit_log2_slope(hs: &[f64], errs: &[f64]) -> (f64, f64) {
    assert_eq!(hs.len(), errs.len());
    assert!(hs.len() >= 2, "need at least two levels to fit a slope");
    let xs: Vec<f64> = hs.iter().map(|h| h.log2()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    (slope, (rss / n).sqrt())
}

/// Root mean square of a slice.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Arithmetic mean of a slice (0 for empty input).
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
