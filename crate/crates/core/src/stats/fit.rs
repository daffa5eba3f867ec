use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Weighted least-squares fit of `log y = a + s log x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval on the exponent.
    pub ci_halfwidth: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl PowerFit {
    pub fn contains(&self, target: f64, tol: f64) -> bool {
        (self.exponent - target).abs() <= tol
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }
}

/// Fit `y ≈ C x^s` from points `(x, y, se_y)`; points outside `window` or with
/// non-positive `y` are skipped. Weights are `(y/se_y)²`.
pub fn fit_power(points: &[(f64, f64, f64)], window: (f64, f64)) -> Result<PowerFit> {
    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(x, y, se)| *x >= window.0 && *x <= window.1 && *y > 0.0 && *se > 0.0)
        .map(|&(x, y, se)| (x.ln(), y.ln(), (y / se).powi(2)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} usable points in window {window:?}", pts.len())));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientSamples("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // Scale the variance by the reduced chi-square when it exceeds one.
    let dof = pts.len().saturating_sub(2);
    let chi2: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let scale = if dof > 0 { (chi2 / dof as f64).max(1.0) } else { 1.0 };
    let se = (scale / sxx).sqrt();
    Ok(PowerFit { exponent: slope, intercept, ci_halfwidth: Z95 * se, window, points: pts.len() })
}

/// Unweighted least-squares slope of `ys` against `xs` with its standard error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, icpt, se)
}

/// Wilson score interval for `k` successes in `n` trials (95%).
pub fn wilson(k: f64, n: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let p = k / n;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let pts: Vec<_> = (1..20).map(|i| {
            let x = i as f64;
            (x, 3.0 * x.powf(-2.5), 0.01 * 3.0 * x.powf(-2.5))
        }).collect();
        let f = fit_power(&pts, (1.0, 100.0)).unwrap();
        assert!((f.exponent + 2.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson(30.0, 1000.0);
        assert!(lo < 0.03 && hi > 0.03 && lo > 0.0);
    }
}
