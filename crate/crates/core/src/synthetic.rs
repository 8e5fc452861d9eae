//! Seeded synthetic tasks for desk-scale experiments.
//!
//! Every sample draws one [`Regime`] for all of its variables, runs a
//! classical zoo on the input window, and records the horizon as truth. The
//! regimes are chosen so different zoo members win on different samples.

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::baselines::{zoo_predictions, ZooMethod};
use crate::error::{Error, Result};
use crate::meta_dataset::{collect_meta_sample, MetaShard, Split};
use crate::meta_features::TimeSeriesWindow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// `level + amplitude·sin(2πt/period + phase) + noise`.
    Seasonal { period: usize, amplitude: f64, noise: f64 },
    /// `x[t] = level + phi·(x[t-1] - level) + noise`.
    MeanReverting { phi: f64, noise: f64 },
    /// `x[t] = x[t-1] + step·ε`.
    RandomWalk { step: f64 },
}

impl Regime {
    /// A `len × d` path; variables are independent draws of the same regime.
    pub fn generate(&self, len: usize, d: usize, rng: &mut impl Rng) -> Array2<f64> {
        let std_normal = Normal::new(0.0, 1.0).expect("valid");
        let mut out = Array2::zeros((len, d));
        for j in 0..d {
            let level: f64 = rng.random_range(-1.0..1.0);
            match *self {
                Regime::Seasonal {
                    period,
                    amplitude,
                    noise,
                } => {
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    for t in 0..len {
                        let angle = std::f64::consts::TAU * t as f64 / period as f64 + phase;
                        out[[t, j]] = level + amplitude * angle.sin() + noise * std_normal.sample(rng);
                    }
                }
                Regime::MeanReverting { phi, noise } => {
                    let stationary_std = noise / (1.0 - phi * phi).sqrt();
                    let mut x = stationary_std * std_normal.sample(rng);
                    for t in 0..len {
                        out[[t, j]] = level + x;
                        x = phi * x + noise * std_normal.sample(rng);
                    }
                }
                Regime::RandomWalk { step } => {
                    let mut x = level;
                    for t in 0..len {
                        out[[t, j]] = x;
                        x += step * std_normal.sample(rng);
                    }
                }
            }
        }
        out
    }
}

/// Shape and regime mixture of one synthetic task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: String,
    /// Regimes with relative frequencies.
    pub mix: Vec<(Regime, f64)>,
    pub t_in: usize,
    pub t_out: usize,
    pub d: usize,
}

/// A period-16 seasonal, an AR(1), and a random-walk regime.
pub fn standard_regimes() -> [Regime; 3] {
    [
        Regime::Seasonal {
            period: 16,
            amplitude: 1.0,
            noise: 0.05,
        },
        Regime::MeanReverting { phi: 0.5, noise: 0.3 },
        Regime::RandomWalk { step: 0.1 },
    ]
}

/// Seasonal naive at period 16, AR(1), and naive last value.
pub fn standard_zoo() -> [ZooMethod; 3] {
    [
        ZooMethod::SeasonalNaive { period: 16 },
        ZooMethod::ArP { order: 1 },
        ZooMethod::NaiveLast,
    ]
}

fn pick<'a>(mix: &'a [(Regime, f64)], rng: &mut impl Rng) -> &'a Regime {
    let total: f64 = mix.iter().map(|(_, w)| w).sum();
    let mut u = rng.random_range(0.0..total);
    for (r, w) in mix {
        if u < *w {
            return r;
        }
        u -= w;
    }
    &mix[mix.len() - 1].0
}

/// Raw windows and horizons: `(t_in × d, t_out × d)` pairs.
pub fn synthetic_series(spec: &TaskSpec, n_samples: usize, seed: u64) -> Result<Vec<(Array2<f64>, Array2<f64>)>> {
    if spec.mix.is_empty() || spec.mix.iter().any(|(_, w)| !(*w >= 0.0)) || spec.mix.iter().all(|(_, w)| *w == 0.0) {
        return Err(Error::InvalidConfig("regime mixture needs a positive weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_samples)
        .map(|_| {
            let path = pick(&spec.mix, &mut rng).generate(spec.t_in + spec.t_out, spec.d, &mut rng);
            (
                path.slice(s![..spec.t_in, ..]).to_owned(),
                path.slice(s![spec.t_in.., ..]).to_owned(),
            )
        })
        .collect())
}

/// Generates `n_samples` triplets for `spec` with `zoo` as the model zoo.
pub fn synthetic_task(spec: &TaskSpec, zoo: &[ZooMethod], n_samples: usize, split: Split, seed: u64) -> Result<MetaShard> {
    let samples = synthetic_series(spec, n_samples, seed)?
        .into_iter()
        .map(|(window, truth)| {
            let preds = zoo_predictions(window.view(), zoo, spec.t_out)?;
            collect_meta_sample(&TimeSeriesWindow::new(window)?, preds, truth)
        })
        .collect::<Result<Vec<_>>>()?;
    MetaShard::from_samples(spec.task_id.clone(), split, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> TaskSpec {
        TaskSpec {
            task_id: "mix".into(),
            mix: standard_regimes().into_iter().map(|r| (r, 1.0)).collect(),
            t_in: 48,
            t_out: 8,
            d: 2,
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let a = synthetic_task(&spec(), &standard_zoo(), 6, Split::Test, 9).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.schema().t_out, 8);
        assert_eq!(a.schema().d, 2);
        assert_eq!(a.roster().names(), ["seasonal_naive:16", "ar_p:1", "naive_last"]);
        let b = synthetic_task(&spec(), &standard_zoo(), 6, Split::Test, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seasonal_regime_is_periodic_up_to_noise() {
        let r = Regime::Seasonal {
            period: 16,
            amplitude: 1.0,
            noise: 0.0,
        };
        let x = r.generate(64, 1, &mut ChaCha8Rng::seed_from_u64(1));
        for t in 16..64 {
            assert!((x[[t, 0]] - x[[t - 16, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_mixture_is_rejected() {
        let mut s = spec();
        s.mix.clear();
        assert!(synthetic_series(&s, 1, 0).is_err());
    }
}
