//! Frequency-domain descriptors built on a plain one-sided periodogram.
//!
//! The series is mean-removed, transformed without windowing, and scaled as
//! `|X(f)|² / T`. Bin `f` sits at `f / T` cycles per step, `f = 0..=T/2`.
//! Distribution-shaped features (entropy, skewness, kurtosis) and the peak
//! search ignore the DC bin.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::stats::{is_constant, mean};
use crate::error::{Error, Result};

/// Shortest series the spectral block accepts.
pub const MIN_SPECTRAL_LEN: usize = 8;

/// One-sided periodogram of a mean-removed series.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub psd: Vec<f64>,
    /// `|X(f)|`, same bins as `psd`.
    pub amplitudes: Vec<f64>,
    /// Cycles per step, in `[0, 0.5]`.
    pub bin_frequencies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub freq_mean: f64,
    pub freq_peak: f64,
    pub spectral_entropy: f64,
    pub spectral_skewness: f64,
    pub spectral_kurtosis: f64,
    pub spectral_variation: f64,
}

impl SpectralFeatures {
    const ZERO: Self = Self {
        freq_mean: 0.0,
        freq_peak: 0.0,
        spectral_entropy: 0.0,
        spectral_skewness: 0.0,
        spectral_kurtosis: 0.0,
        spectral_variation: 0.0,
    };
}

/// Reusable FFT plans; one per extraction call keeps repeated lengths cheap.
pub(crate) struct Spectrum {
    planner: FftPlanner<f64>,
}

impl Spectrum {
    pub(crate) fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    /// `|X(f)|` for `f = 0..=n/2`.
    pub(crate) fn one_sided_amplitudes(&mut self, frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        let fft = self.planner.plan_fft_forward(n);
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fft.process(&mut buf);
        buf.truncate(n / 2 + 1);
        buf.into_iter().map(|c| c.norm()).collect()
    }

    pub(crate) fn profile(&mut self, series: &[f64]) -> SpectralProfile {
        let n = series.len();
        let centered = centered(series);
        let amplitudes = self.one_sided_amplitudes(&centered);
        let psd = amplitudes.iter().map(|a| a * a / n as f64).collect();
        let bin_frequencies = (0..amplitudes.len()).map(|f| f as f64 / n as f64).collect();
        SpectralProfile {
            psd,
            amplitudes,
            bin_frequencies,
        }
    }

    pub(crate) fn features(&mut self, series: &[f64]) -> Result<SpectralFeatures> {
        if series.len() < MIN_SPECTRAL_LEN {
            return Err(Error::SeriesTooShort {
                len: series.len(),
                min: MIN_SPECTRAL_LEN,
            });
        }
        if is_constant(series) {
            return Ok(SpectralFeatures::ZERO);
        }
        let profile = self.profile(series);
        let psd = &profile.psd;
        let freq_mean = psd.iter().sum::<f64>() / psd.len() as f64;

        let peak = peak_bin(psd);

        let (spectral_skewness, spectral_kurtosis) = amplitude_shape(&profile.amplitudes[1..]);

        Ok(SpectralFeatures {
            freq_mean,
            freq_peak: profile.bin_frequencies[peak],
            spectral_entropy: entropy(&psd[1..]),
            spectral_skewness,
            spectral_kurtosis,
            spectral_variation: self.variation(&centered(series)),
        })
    }

    /// Mean spectral flux across half-overlapping rectangular frames of
    /// length `max(8, T/4)`. Frame spectra are `|X(f)| / frame_len`.
    fn variation(&mut self, centered: &[f64]) -> f64 {
        let (len, hop) = frame_geometry(centered.len());
        let frames: Vec<Vec<f64>> = (0..)
            .map(|i| i * hop)
            .take_while(|start| start + len <= centered.len())
            .map(|start| {
                self.one_sided_amplitudes(&centered[start..start + len])
                    .into_iter()
                    .map(|a| a / len as f64)
                    .collect()
            })
            .collect();
        if frames.len() < 2 {
            return 0.0;
        }
        let total: f64 = frames
            .windows(2)
            .map(|pair| {
                pair[1]
                    .iter()
                    .zip(&pair[0])
                    .map(|(b, a)| (b - a) * (b - a))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum();
        total / (frames.len() - 1) as f64
    }
}

/// Index of the strongest non-DC bin; the lowest frequency wins ties.
fn peak_bin(psd: &[f64]) -> usize {
    let mut peak = 1;
    for f in 2..psd.len() {
        if psd[f] > psd[peak] {
            peak = f;
        }
    }
    peak
}

/// Spectrogram frame length and hop for a series of `n` steps.
pub fn frame_geometry(n: usize) -> (usize, usize) {
    let len = (n / 4).max(8);
    (len, len / 2)
}

fn centered(series: &[f64]) -> Vec<f64> {
    let m = mean(series);
    series.iter().map(|x| x - m).collect()
}

/// Shannon entropy (nats) of `psd` normalised to a distribution; `0·ln 0 = 0`.
fn entropy(psd: &[f64]) -> f64 {
    let total: f64 = psd.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -psd.iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Skewness and (non-excess) kurtosis of the amplitude spectrum, using the
/// sum-normalised forms `Σc³ / (Σc²)^{3/2}` and `Σc⁴ / (Σc²)²`.
fn amplitude_shape(amplitudes: &[f64]) -> (f64, f64) {
    let n = amplitudes.len() as f64;
    let a_mean = amplitudes.iter().sum::<f64>() / n;
    let (mut s2, mut s3, mut s4, mut energy) = (0.0, 0.0, 0.0, 0.0);
    for &a in amplitudes {
        let c = a - a_mean;
        s2 += c * c;
        s3 += c * c * c;
        s4 += c * c * c * c;
        energy += a * a;
    }
    // flat spectra (e.g. an impulse) leave only rounding residue in s2
    if s2 <= 1e-24 * energy {
        return (0.0, 0.0);
    }
    (s3 / s2.powf(1.5), s4 / (s2 * s2))
}

/// One-sided periodogram of the mean-removed series.
pub fn spectral_profile(series: &[f64]) -> Result<SpectralProfile> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: 2,
        });
    }
    Ok(Spectrum::new().profile(series))
}

pub fn spectral_features(series: &[f64]) -> Result<SpectralFeatures> {
    Spectrum::new().features(series)
}
