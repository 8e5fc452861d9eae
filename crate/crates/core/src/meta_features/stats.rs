//! Per-variable statistical and temporal descriptors.

use crate::error::{Error, Result};

/// Denominators at or below this magnitude are skipped by [`rate_of_change`].
pub const ROC_EPSILON: f64 = 1e-8;

/// Distribution summary of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticalFeatures {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
}

/// `true` when every value is identical. Used as the single degeneracy test so
/// that constant series produce exact zeros rather than rounding residue.
pub(crate) fn is_constant(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[0] == w[1])
}

/// Mean that is exact for constant input.
pub(crate) fn mean(series: &[f64]) -> f64 {
    if is_constant(series) {
        return series[0];
    }
    series.iter().sum::<f64>() / series.len() as f64
}

fn ensure_len(series: &[f64], min: usize) -> Result<()> {
    if series.len() < min {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min,
        });
    }
    Ok(())
}

pub fn statistical_features(series: &[f64]) -> Result<StatisticalFeatures> {
    ensure_len(series, 2)?;
    let n = series.len() as f64;
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = mean(series);
    if min == max {
        return Ok(StatisticalFeatures {
            mean,
            std: 0.0,
            min,
            max,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in series {
        let c = x - mean;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();

    Ok(StatisticalFeatures {
        mean,
        std,
        min,
        max,
        skewness: m3 / (std * std * std),
        kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Biased sample autocorrelation at `lag`:
/// `Σ_{t<T-lag} (x[t]-x̄)(x[t+lag]-x̄) / Σ_t (x[t]-x̄)²`, or 0 for a constant series.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    if lag >= series.len() {
        return Err(Error::LagTooLarge {
            lag,
            len: series.len(),
        });
    }
    if is_constant(series) {
        return Ok(0.0);
    }
    let mean = mean(series);
    let denom: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    let num: f64 = series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    Ok(num / denom)
}

/// Mean and population std of the one-step relative changes
/// `(x[t+1]-x[t]) / x[t]`, skipping steps whose base is within [`ROC_EPSILON`] of zero.
pub fn rate_of_change(series: &[f64]) -> Result<(f64, f64)> {
    ensure_len(series, 2)?;
    let ratios: Vec<f64> = series
        .windows(2)
        .filter(|w| w[0].abs() > ROC_EPSILON)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    if ratios.is_empty() {
        return Ok((0.0, 0.0));
    }
    let m = mean(&ratios);
    let var = ratios.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / ratios.len() as f64;
    Ok((m, var.sqrt()))
}

/// Least-squares fit of `x[t+1] = c + φ·x[t] + ε`. Returns `(φ, population std of ε)`.
pub fn ar1_fit(series: &[f64]) -> Result<(f64, f64)> {
    ensure_len(series, 3)?;
    if is_constant(series) {
        return Ok((0.0, 0.0));
    }
    let x = &series[..series.len() - 1];
    let y = &series[1..];
    let y_mean = mean(y);

    let phi = if is_constant(x) {
        0.0
    } else {
        let x_mean = mean(x);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - x_mean) * (b - y_mean);
            sxx += (a - x_mean) * (a - x_mean);
        }
        sxy / sxx
    };
    let intercept = y_mean - phi * mean(x);

    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - intercept - phi * a)
        .collect();
    let r_mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let var = residuals
        .iter()
        .map(|r| (r - r_mean) * (r - r_mean))
        .sum::<f64>()
        / residuals.len() as f64;
    Ok((phi, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_of_small_series() {
        let s = statistical_features(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.skewness, 0.0, epsilon = 1e-15);

        let s = statistical_features(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_abs_diff_eq!(s.std, 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn alternating_series_has_kurtosis_minus_two() {
        let x: Vec<f64> = (0..96).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = statistical_features(&x).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_abs_diff_eq!(s.std, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.skewness, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.kurtosis, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate_but_finite() {
        let x = vec![0.1; 96];
        let s = statistical_features(&x).unwrap();
        assert_eq!(
            s,
            StatisticalFeatures {
                mean: 0.1,
                std: 0.0,
                min: 0.1,
                max: 0.1,
                skewness: 0.0,
                kurtosis: 0.0
            }
        );
        assert_eq!(autocorrelation(&x, 1).unwrap(), 0.0);
        assert_eq!(ar1_fit(&x).unwrap(), (0.0, 0.0));
        assert!(matches!(
            statistical_features(&[1.0]),
            Err(Error::SeriesTooShort { len: 1, min: 2 })
        ));
    }

    #[test]
    fn autocorrelation_examples() {
        assert_abs_diff_eq!(
            autocorrelation(&[1.0, -1.0, 1.0, -1.0], 1).unwrap(),
            -0.75,
            epsilon = 1e-15
        );
        assert_eq!(autocorrelation(&[1.0, 2.0, 3.0, 4.0, 5.0], 0).unwrap(), 1.0);
        assert!(matches!(
            autocorrelation(&[1.0, 2.0], 2),
            Err(Error::LagTooLarge { lag: 2, len: 2 })
        ));
    }

    #[test]
    fn rate_of_change_examples() {
        assert_eq!(rate_of_change(&[1.0, 2.0, 4.0, 8.0]).unwrap(), (1.0, 0.0));
        assert_eq!(rate_of_change(&[5.0, 5.0, 5.0]).unwrap(), (0.0, 0.0));
        // the step out of zero is skipped, leaving only 1 -> 2
        assert_eq!(rate_of_change(&[0.0, 1.0, 2.0]).unwrap(), (1.0, 0.0));
        assert_eq!(rate_of_change(&[0.0, 0.0]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn ar1_recovers_exact_recurrence() {
        let x: Vec<f64> = (0..32).map(|t| 0.5f64.powi(t)).collect();
        let (phi, resid) = ar1_fit(&x).unwrap();
        assert_abs_diff_eq!(phi, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(resid, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn ar1_with_constant_regressor_falls_back_to_mean() {
        let (phi, resid) = ar1_fit(&[1.0, 1.0, 1.0, 4.0]).unwrap();
        assert_eq!(phi, 0.0);
        // residuals of [1, 1, 4] about their mean 2
        assert_abs_diff_eq!(resid, 2f64.sqrt(), epsilon = 1e-12);
    }
}
