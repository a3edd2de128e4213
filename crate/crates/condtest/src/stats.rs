//! Small statistics helpers for turning trial outcomes into decisions.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A point rate with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInterval {
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
///
/// ```
/// let w = condtest::stats::wilson(150, 200, condtest::stats::Z95);
/// assert!(w.lower < 0.75 && 0.75 < w.upper);
/// ```
pub fn wilson(successes: u64, trials: u64, z: f64) -> RateInterval {
    if trials == 0 {
        return RateInterval {
            rate: 0.0,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let t = trials as f64;
    let p = successes as f64 / t;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * t)) / (1.0 + z2 / t);
    let half = z / (1.0 + z2 / t) * (p * (1.0 - p) / t + z2 / (4.0 * t * t)).sqrt();
    RateInterval {
        rate: p,
        lower: (centre - half).clamp(0.0, p),
        upper: (centre + half).clamp(p, 1.0),
    }
}

/// The decision rule for "holds with probability at least `p`": the Wilson lower bound must
/// reach `p − slack`.
pub fn meets_rate(successes: u64, trials: u64, p: f64, slack: f64) -> bool {
    wilson(successes, trials, Z95).lower >= p - slack
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Best `c` for `y ≈ c·f(x)` in relative terms and the largest relative residual.
pub fn fit_scale(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> (f64, f64) {
    let ratios: Vec<f64> = points.iter().map(|&(x, y)| y / f(x)).collect();
    // Geometric mean minimises the worst log-ratio symmetrically.
    let c = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    let worst = ratios
        .iter()
        .map(|r| (r / c - 1.0).abs())
        .fold(0.0, f64::max);
    (c, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_reference_values() {
        // Reference values from statsmodels.proportion_confint(method="wilson").
        let w = wilson(150, 200, Z95);
        assert!((w.lower - 0.685_659).abs() < 1e-5, "{w:?}");
        assert!((w.upper - 0.804_918).abs() < 1e-5, "{w:?}");
        let all = wilson(200, 200, Z95);
        assert_eq!(all.upper, 1.0);
        assert!((all.lower - 0.981_155).abs() < 1e-5);
    }

    #[test]
    fn slopes_and_fits() {
        let cubic: Vec<(f64, f64)> = [10.0, 12.0, 14.0]
            .iter()
            .map(|&x| (x, 5.0 * x * x * x))
            .collect();
        assert!((log_log_slope(&cubic) - 3.0).abs() < 1e-12);
        let (c, worst) = fit_scale(&cubic, |x| x.powi(3));
        assert!((c - 5.0).abs() < 1e-9 && worst < 1e-12);
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
    }

    proptest! {
        #[test]
        fn interval_contains_rate(t in 1u64..5000, frac in 0.0f64..=1.0) {
            let s = (t as f64 * frac).round() as u64;
            let w = wilson(s, t, Z95);
            prop_assert!(0.0 <= w.lower && w.lower <= w.rate && w.rate <= w.upper && w.upper <= 1.0);
        }
    }
}
