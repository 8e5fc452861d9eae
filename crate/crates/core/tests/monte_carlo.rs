mod common;

use common::{oracle, window_of};
use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use timefuse::baselines::{forward_selection_ensemble, ValidationScoreTable, Criterion};
use timefuse::meta_dataset::{MetaSample, MetaShard, PredictionTensor, Roster, Split};
use timefuse::meta_features::{
    adf_stationarity_ratio, adf_test, ar1_fit, spectral_features, MetaFeatureVector,
};

fn noise(seed: u64, n: usize, std: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, std).unwrap();
    (0..n).map(|_| z.sample(&mut rng)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn white_noise_is_usually_stationary() {
    let hits = (0..200)
        .filter(|&s| adf_test(&noise(s, 96, 1.0)).unwrap().is_stationary())
        .count();
    assert!(hits >= 190, "{hits}/200");
}

#[test]
fn ar1_coefficient_is_recovered() {
    let estimates: Vec<f64> = (0..100)
        .map(|s| {
            let e = noise(1000 + s, 96, 0.1);
            let mut x = vec![0.0; 96];
            for t in 1..96 {
                x[t] = 0.8 * x[t - 1] + e[t];
            }
            ar1_fit(&x).unwrap().0
        })
        .collect();
    let m = median(estimates);
    assert!((m - 0.8).abs() <= 0.15, "{m}");
}

fn white_noise_entropy_median() -> f64 {
    median(
        (0..100)
            .map(|s| spectral_features(&noise(2000 + s, 96, 1.0)).unwrap().spectral_entropy)
            .collect(),
    )
}

// Raw periodogram ordinates of white noise are close to iid exponential, so
// the normalized entropy sits about 1 - γ nats below the flat limit, which is
// 10.9% of ln 48. Run with --ignored to see the shortfall.
#[test]
#[ignore = "flat-limit 10% bound is below the expected periodogram entropy"]
fn white_noise_entropy_within_ten_percent_of_flat_limit() {
    let limit = 48f64.ln();
    let m = white_noise_entropy_median();
    assert!((m - limit).abs() <= 0.1 * limit, "{m} vs {limit}");
}

#[test]
fn white_noise_entropy_matches_exponential_ordinates() {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let expected = 48f64.ln() - (1.0 - EULER_GAMMA);
    let m = white_noise_entropy_median();
    assert!((m - expected).abs() <= 0.02 * expected, "{m} vs {expected}");
    assert!(m < 48f64.ln());
}

#[test]
fn stationarity_ratio_agrees_with_brute_force() {
    let mut walk = noise(7, 96, 1.0);
    for t in 1..96 {
        walk[t] += walk[t - 1];
    }
    let cols = vec![noise(1, 96, 1.0), noise(2, 96, 1.0), walk, noise(3, 96, 1.0)];
    let brute = cols.iter().filter(|c| oracle::adf(c).p_value < 0.05).count();
    assert_eq!(brute, 3);
    assert_eq!(adf_stationarity_ratio(&window_of(&cols)), 0.75);
}

#[test]
fn forward_selection_halves_symmetric_errors() {
    let roster = Roster::new(["a", "b"]).unwrap();
    let (ea, eb) = (noise(11, 2000, 1.0), noise(12, 2000, 1.0));
    let samples = (0..2000)
        .map(|i| {
            let p = Array3::from_shape_vec((2, 1, 1), vec![ea[i], eb[i]]).unwrap();
            MetaSample::new(
                MetaFeatureVector::from_array([0.0; 24]),
                PredictionTensor::new(p, roster.clone()).unwrap(),
                Array2::zeros((1, 1)),
            )
            .unwrap()
        })
        .collect();
    let shard = MetaShard::from_samples("iid", Split::MetaVal, samples).unwrap();
    let single = ValidationScoreTable::from_shard(&shard, Criterion::Mse).unwrap();
    let fs = forward_selection_ensemble(&shard, 4).unwrap();
    assert!(fs.members.contains(&0) && fs.members.contains(&1), "{:?}", fs.members);
    let best_single = single.scores().iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(*fs.loss_path.last().unwrap() < best_single);
}
