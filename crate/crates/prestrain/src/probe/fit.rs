//! Least-squares fits on log–log data.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// log y − (intercept + slope · log x) per point.
    pub residuals: Vec<f64>,
}

/// Fits log|y| = c + p log x. Needs at least two points with distinct x.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<LogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = lx.iter().zip(&ly).map(|(a, b)| b - intercept - slope * a).collect();
    Some(LogFit { slope, intercept, residuals })
}

/// Log–log fit that drops the first point when, measured against the fit of
/// the remaining points, its residual exceeds three times their mean absolute
/// residual (with a floor of 10⁻³ in log units). Returns the fit and whether
/// the point was dropped.
pub fn loglog_fit_trimmed(x: &[f64], y: &[f64]) -> Option<(LogFit, bool)> {
    let fit = loglog_fit(x, y)?;
    if x.len() >= 4 {
        let rest = loglog_fit(&x[1..], &y[1..])?;
        let first = y[0].abs().max(f64::MIN_POSITIVE).ln() - rest.intercept - rest.slope * x[0].ln();
        let spread = rest.residuals.iter().map(|r| r.abs()).sum::<f64>() / rest.residuals.len() as f64;
        if first.abs() > 3.0 * spread.max(1e-3) {
            return Some((rest, true));
        }
    }
    Some((fit, false))
}

/// n geometric values from `hi` down to `lo`.
pub fn geometric_sweep(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    (0..n).map(|k| hi * (lo / hi).powf(k as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = geometric_sweep(0.1, 1e-3, 6);
        let y: Vec<f64> = x.iter().map(|h| 3.0 * h.powf(2.5)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn preasymptotic_point_dropped() {
        let x = geometric_sweep(0.1, 1e-3, 6);
        let mut y: Vec<f64> = x.iter().map(|h| h.powi(4)).collect();
        y[0] *= 50.0;
        let (f, dropped) = loglog_fit_trimmed(&x, &y).unwrap();
        assert!(dropped);
        assert!((f.slope - 4.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|h| h.powi(4) * (1.0 + 1e-5 * h)).collect();
        assert!(!loglog_fit_trimmed(&x, &y).unwrap().1);
    }
}
