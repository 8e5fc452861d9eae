//! Augmented Dickey–Fuller unit-root test (constant, no trend).
//!
//! The regression is `Δx[t] = α + γ·x[t-1] + Σ_{i=1..p} β_i·Δx[t-i] + e[t]` and
//! the statistic is the t-ratio of `γ`. The augmentation order `p` is chosen by
//! AIC over `0..=p_max` on a common sample, `p_max = min(⌊12·(T/100)^¼⌋, T/2 - 2)`,
//! then the chosen order is refit on every usable observation. P-values come
//! from MacKinnon's (1994) response surface for one series with a constant.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use super::stats::is_constant;
use super::TimeSeriesWindow;
use crate::error::{Error, Result};

/// Level at which a variable is counted as stationary.
pub const SIGNIFICANCE: f64 = 0.05;

const MIN_ADF_LEN: usize = 8;

// MacKinnon (1994), constant-only, N = 1.
const TAU_MAX: f64 = 2.74;
const TAU_MIN: f64 = -18.83;
const TAU_STAR: f64 = -1.61;
const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

/// Level coefficients smaller than this count as zero in an exact fit.
const EXACT_FIT_COEF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfResult {
    /// t-ratio of the lagged level; NaN when the regression is rank deficient.
    pub statistic: f64,
    pub p_value: f64,
    pub used_lag: usize,
    pub nobs: usize,
}

impl AdfResult {
    pub fn is_stationary(&self) -> bool {
        self.p_value < SIGNIFICANCE
    }
}

/// Largest augmentation order considered for a series of `n` observations.
pub fn max_lag(n: usize) -> usize {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    schwert.min((n / 2).saturating_sub(2))
}

/// Approximate p-value of an ADF statistic (constant-only regression).
pub fn mackinnon_p_value(statistic: f64) -> f64 {
    if statistic.is_nan() || statistic > TAU_MAX {
        return 1.0;
    }
    if statistic < TAU_MIN {
        return 0.0;
    }
    let poly = |coef: &[f64]| coef.iter().rev().fold(0.0, |acc, c| acc * statistic + c);
    let z = if statistic <= TAU_STAR {
        poly(&SMALL_P)
    } else {
        poly(&LARGE_P)
    };
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

struct OlsFit {
    rss: f64,
    /// `Σy²`, the scale against which an exact fit is recognised.
    yy: f64,
    level_coef: f64,
    /// Diagonal entry of `(XᵀX)⁻¹` for the level column.
    level_cov: f64,
    nobs: usize,
    k: usize,
}

impl OlsFit {
    fn aic(&self) -> f64 {
        let n = self.nobs as f64;
        n * ((2.0 * std::f64::consts::PI).ln() + (self.rss / n).ln() + 1.0) + 2.0 * self.k as f64
    }

    fn t_ratio(&self) -> f64 {
        // an exact fit leaves only rounding residue, so report the sign of γ
        if self.rss <= 1e-20 * self.yy {
            return if self.level_coef < -EXACT_FIT_COEF {
                f64::NEG_INFINITY
            } else if self.level_coef > EXACT_FIT_COEF {
                f64::INFINITY
            } else {
                0.0
            };
        }
        let s2 = self.rss / (self.nobs - self.k) as f64;
        self.level_coef / (s2 * self.level_cov).sqrt()
    }
}

/// Regression of `Δx[i]` on `[1, x[i], Δx[i-1], …, Δx[i-lag]]` for `i ≥ first_row`.
fn fit(series: &[f64], diffs: &[f64], lag: usize, first_row: usize) -> Option<OlsFit> {
    let rows: Vec<usize> = (first_row..diffs.len()).collect();
    let k = lag + 2;
    let x = DMatrix::from_fn(rows.len(), k, |r, c| {
        let i = rows[r];
        match c {
            0 => 1.0,
            1 => series[i],
            _ => diffs[i - (c - 1)],
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| diffs[i]));

    let col_norms: Vec<f64> = (0..k).map(|c| x.column(c).norm()).collect();
    let qr = x.clone().qr();
    let r = qr.r();
    for c in 0..k {
        if r[(c, c)].abs() <= 1e-10 * col_norms[c].max(f64::MIN_POSITIVE) {
            return None;
        }
    }
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty)?;
    let rss = (&y - &x * &beta).norm_squared();
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k))?;
    let level_cov = r_inv.row(1).norm_squared();

    Some(OlsFit {
        rss,
        yy: y.norm_squared(),
        level_coef: beta[1],
        level_cov,
        nobs: rows.len(),
        k,
    })
}

/// Runs the test on one variable. A constant series is reported stationary
/// (`statistic = -∞`, `p = 0`).
pub fn adf_test(series: &[f64]) -> Result<AdfResult> {
    let n = series.len();
    if n < MIN_ADF_LEN {
        return Err(Error::SeriesTooShort {
            len: n,
            min: MIN_ADF_LEN,
        });
    }
    if is_constant(series) {
        return Ok(AdfResult {
            statistic: f64::NEG_INFINITY,
            p_value: 0.0,
            used_lag: 0,
            nobs: n - 1,
        });
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let p_max = max_lag(n);

    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=p_max {
        if let Some(f) = fit(series, &diffs, lag, p_max) {
            let aic = f.aic();
            if best.map_or(true, |(b, _)| aic < b) {
                best = Some((aic, lag));
            }
        }
    }
    let degenerate = |lag| AdfResult {
        statistic: f64::NAN,
        p_value: 1.0,
        used_lag: lag,
        nobs: n - 1 - lag,
    };
    let Some((_, lag)) = best else {
        return Ok(degenerate(p_max));
    };
    let Some(f) = fit(series, &diffs, lag, lag) else {
        return Ok(degenerate(lag));
    };
    let statistic = f.t_ratio();
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p_value(statistic),
        used_lag: lag,
        nobs: f.nobs,
    })
}

/// Fraction of the window's variables the ADF test marks stationary.
pub fn adf_stationarity_ratio(window: &TimeSeriesWindow) -> f64 {
    let d = window.d();
    let stationary = (0..d)
        .filter(|&j| {
            adf_test(&window.column(j))
                .expect("window invariants guarantee ADF length")
                .is_stationary()
        })
        .count();
    stationary as f64 / d as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lag_rule() {
        assert_eq!(max_lag(96), 11);
        assert_eq!(max_lag(40), 9);
        assert_eq!(max_lag(24), 8);
        assert_eq!(max_lag(8), 2);
        assert_eq!(max_lag(512), 18);
    }

    #[test]
    fn mackinnon_surface_matches_reference() {
        // statsmodels.tsa.adfvalues.mackinnonp(t, "c", N=1)
        let cases = [
            (-20.0, 0.0),
            (-5.0, 2.2193154713956276e-05),
            (-3.0, 0.034894400275345266),
            (-1.61, 0.47797565259418928),
            (-1.0, 0.75326430120056553),
            (0.0, 0.95853208606005602),
            (1.5, 0.99752427540539002),
            (3.0, 1.0),
        ];
        for (t, p) in cases {
            // erfc implementations agree to ~1e-12
            assert_abs_diff_eq!(mackinnon_p_value(t), p, epsilon = 1e-10);
        }
        assert_eq!(mackinnon_p_value(f64::NAN), 1.0);
    }

    #[test]
    fn constant_and_trend_conventions() {
        let r = adf_test(&[2.0; 20]).unwrap();
        assert!(r.is_stationary());
        // a pure linear trend is fit exactly with γ = 0
        let trend: Vec<f64> = (0..20).map(|t| t as f64).collect();
        let r = adf_test(&trend).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.is_stationary());
        assert!(adf_test(&[1.0; 7]).is_err());
    }

    #[test]
    fn exact_geometric_decay_is_stationary() {
        let x: Vec<f64> = (0..32).map(|t| 0.5f64.powi(t)).collect();
        assert!(adf_test(&x).unwrap().is_stationary());
    }

    #[test]
    fn random_walk_trend_is_not_stationary() {
        let x: Vec<f64> = (0..96).map(|t| (t as f64).powf(1.5) + (t as f64 * 1.3).sin()).collect();
        assert!(!adf_test(&x).unwrap().is_stationary());
    }
}
