#![allow(dead_code)]

pub mod oracle;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use timefuse::meta_features::TimeSeriesWindow;

/// Varied random columns: noise, AR(1), random walks, tones, trends, and the
/// occasional constant.
pub fn random_columns(seed: u64, t: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    (0..d)
        .map(|_| {
            let offset = rng.random_range(-5.0..5.0);
            let scale = 10f64.powf(rng.random_range(-2.0..2.0));
            let kind = rng.random_range(0..6);
            let mut x = vec![0.0; t];
            match kind {
                0 => x.iter_mut().for_each(|v| *v = z.sample(&mut rng)),
                1 => {
                    let phi = rng.random_range(-0.9..0.95);
                    for i in 1..t {
                        x[i] = phi * x[i - 1] + z.sample(&mut rng);
                    }
                }
                2 => {
                    for i in 1..t {
                        x[i] = x[i - 1] + z.sample(&mut rng);
                    }
                }
                3 => {
                    let period = rng.random_range(3.0..40.0);
                    let phase = rng.random_range(0.0..6.3);
                    let noise = rng.random_range(0.0..0.5);
                    for (i, v) in x.iter_mut().enumerate() {
                        *v = (std::f64::consts::TAU * i as f64 / period + phase).sin() + noise * z.sample(&mut rng);
                    }
                }
                4 => {
                    let slope = rng.random_range(-0.2..0.2);
                    for (i, v) in x.iter_mut().enumerate() {
                        *v = slope * i as f64 + z.sample(&mut rng);
                    }
                }
                _ if rng.random_bool(0.3) => return vec![offset; t],
                _ => x.iter_mut().for_each(|v| *v = z.sample(&mut rng).exp()),
            }
            x.into_iter().map(|v| offset + scale * v).collect()
        })
        .collect()
}

pub fn window_of(columns: &[Vec<f64>]) -> TimeSeriesWindow {
    let t = columns[0].len();
    TimeSeriesWindow::new(Array2::from_shape_fn((t, columns.len()), |(i, j)| columns[j][i])).unwrap()
}

/// `|a - b| ≤ rel·max(|a|, |b|)`, with an absolute floor of `1e-12` for
/// values that cancel to zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()) || (a - b).abs() <= 1e-12
}
