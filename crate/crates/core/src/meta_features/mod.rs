//! The 24 task-agnostic meta-features describing an input window.
//!
//! Statistical, temporal and spectral features are computed per variable and
//! averaged over variables; the stationarity feature is the fraction of
//! variables passing an ADF test; multivariate features summarise all
//! unordered variable pairs.

mod adf;
mod spectral;
mod stats;

use std::fmt;
use std::ops::Index;

use ndarray::Array2;

pub use adf::{adf_stationarity_ratio, adf_test, mackinnon_p_value, max_lag, AdfResult};
pub use spectral::{
    frame_geometry, spectral_features, spectral_profile, SpectralFeatures, SpectralProfile,
};
pub use stats::{
    ar1_fit, autocorrelation, rate_of_change, statistical_features, StatisticalFeatures,
    ROC_EPSILON,
};

use crate::error::{Error, Result};
use spectral::Spectrum;

/// Number of meta-features.
pub const N_FEATURES: usize = 24;

/// Shortest window for which every feature is defined.
pub const MIN_WINDOW_LEN: usize = 8;

/// Canonical feature order. Every vector, file and CSV uses it.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean",
    "std",
    "min",
    "max",
    "skewness",
    "kurtosis",
    "autocorr_mean",
    "stationarity",
    "roc_mean",
    "roc_std",
    "autoreg_coef",
    "residual_std",
    "freq_mean",
    "freq_peak",
    "spectral_entropy",
    "spectral_skewness",
    "spectral_kurtosis",
    "spectral_variation",
    "cov_mean",
    "cov_max",
    "cov_min",
    "cov_std",
    "crosscorr_mean",
    "crosscorr_std",
];

/// Position of a feature name in [`FEATURE_NAMES`].
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// One input instance: `t_in` time steps (rows) of `d` variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesWindow {
    values: Array2<f64>,
}

impl TimeSeriesWindow {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (t_in, d) = values.dim();
        if d == 0 {
            return Err(Error::EmptyWindow);
        }
        if t_in < MIN_WINDOW_LEN {
            return Err(Error::WindowTooShort {
                len: t_in,
                min: MIN_WINDOW_LEN,
            });
        }
        if let Some(((step, var), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteInput { step, var });
        }
        Ok(Self { values })
    }

    /// Builds a single-variable window.
    pub fn univariate(series: &[f64]) -> Result<Self> {
        Self::new(Array2::from_shape_vec((series.len(), 1), series.to_vec()).expect("shape"))
    }

    pub fn t_in(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Contiguous copy of variable `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }
}

/// The 24 meta-features in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaFeatureVector([f64; N_FEATURES]);

impl MetaFeatureVector {
    pub fn from_array(values: [f64; N_FEATURES]) -> Self {
        Self(values)
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_FEATURES] = values.try_into().map_err(|_| {
            Error::ShapeMismatch(format!(
                "meta-feature vector needs {N_FEATURES} entries, got {}",
                values.len()
            ))
        })?;
        Ok(Self(arr))
    }

    pub fn as_array(&self) -> &[f64; N_FEATURES] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.0[i])
    }

    /// Rounds every entry to the nearest `f32`, the storage precision of shards.
    pub fn quantized(&self) -> Self {
        Self(self.0.map(|v| v as f32 as f64))
    }
}

impl Index<usize> for MetaFeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for MetaFeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, v)) in FEATURE_NAMES.iter().zip(&self.0).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v:.6}")?;
        }
        Ok(())
    }
}

/// Covariance and correlation summaries over variable pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultivariateFeatures {
    pub cov_mean: f64,
    pub cov_max: f64,
    pub cov_min: f64,
    pub cov_std: f64,
    pub crosscorr_mean: f64,
    pub crosscorr_std: f64,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Population covariances and Pearson correlations over all pairs `i < j`.
///
/// A zero-variance variable correlates 0 with everything. With a single
/// variable the covariance summaries collapse to its variance (`cov_std = 0`)
/// and the correlation summaries are `1` and `0`.
pub fn multivariate_features(window: &TimeSeriesWindow) -> MultivariateFeatures {
    let d = window.d();
    let t = window.t_in() as f64;
    let columns: Vec<Vec<f64>> = (0..d).map(|j| window.column(j)).collect();
    let centered: Vec<(Vec<f64>, bool)> = columns
        .iter()
        .map(|c| {
            let m = stats::mean(c);
            (c.iter().map(|x| x - m).collect(), stats::is_constant(c))
        })
        .collect();
    let variance = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>() / t;

    if d == 1 {
        let var = variance(&centered[0].0);
        return MultivariateFeatures {
            cov_mean: var,
            cov_max: var,
            cov_min: var,
            cov_std: 0.0,
            crosscorr_mean: 1.0,
            crosscorr_std: 0.0,
        };
    }

    let stds: Vec<f64> = centered.iter().map(|(c, _)| variance(c).sqrt()).collect();
    let mut covs = Vec::with_capacity(d * (d - 1) / 2);
    let mut corrs = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            let cov = centered[i]
                .0
                .iter()
                .zip(&centered[j].0)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / t;
            covs.push(cov);
            let degenerate = centered[i].1 || centered[j].1;
            corrs.push(if degenerate { 0.0 } else { cov / (stds[i] * stds[j]) });
        }
    }
    let (cov_mean, cov_std) = mean_and_std(&covs);
    let (crosscorr_mean, crosscorr_std) = mean_and_std(&corrs);
    MultivariateFeatures {
        cov_mean,
        cov_max: covs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        cov_min: covs.iter().copied().fold(f64::INFINITY, f64::min),
        cov_std,
        crosscorr_mean,
        crosscorr_std,
    }
}

/// Computes the full 24-entry descriptor of `window`.
pub fn extract_meta_features(window: &TimeSeriesWindow) -> MetaFeatureVector {
    let d = window.d();
    let mut spectrum = Spectrum::new();
    let mut per_var = [0.0; N_FEATURES];
    let mut stationary = 0usize;

    for j in 0..d {
        let x = window.column(j);
        let s = statistical_features(&x).expect("window length checked");
        let acf = autocorrelation(&x, 1).expect("window length checked");
        let (roc_mean, roc_std) = rate_of_change(&x).expect("window length checked");
        let (phi, resid) = ar1_fit(&x).expect("window length checked");
        let sp = spectrum.features(&x).expect("window length checked");
        if adf_test(&x).expect("window length checked").is_stationary() {
            stationary += 1;
        }
        let row = [
            s.mean,
            s.std,
            s.min,
            s.max,
            s.skewness,
            s.kurtosis,
            acf,
            0.0,
            roc_mean,
            roc_std,
            phi,
            resid,
            sp.freq_mean,
            sp.freq_peak,
            sp.spectral_entropy,
            sp.spectral_skewness,
            sp.spectral_kurtosis,
            sp.spectral_variation,
        ];
        for (acc, v) in per_var.iter_mut().zip(row) {
            *acc += v;
        }
    }

    let mut out = [0.0; N_FEATURES];
    for (o, acc) in out.iter_mut().zip(&per_var).take(18) {
        *o = acc / d as f64;
    }
    out[7] = stationary as f64 / d as f64;

    let m = multivariate_features(window);
    out[18..].copy_from_slice(&[
        m.cov_mean,
        m.cov_max,
        m.cov_min,
        m.cov_std,
        m.crosscorr_mean,
        m.crosscorr_std,
    ]);
    MetaFeatureVector(out)
}
