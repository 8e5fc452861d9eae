//! Similarity-weighted ensemble over known tasks for a task never trained on.
//!
//! Each training task is summarised by its meta-feature centroid and its best
//! model. Centroids are z-scored across tasks; a query's weights are the
//! softmax of `-distance / temperature` over tasks, mixing the tasks'
//! best-model indicators.

use super::{Criterion, ValidationScoreTable};
use crate::error::{Error, Result};
use crate::fusor::{standardize_features, FeatureStats, FusionWeights};
use crate::meta_dataset::{MetaShard, Roster};
use crate::meta_features::{MetaFeatureVector, N_FEATURES};

/// Fallback when the centroids give no usable distance scale.
const DEFAULT_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskProfile {
    pub task_id: String,
    pub centroid: MetaFeatureVector,
    pub best_model: usize,
}

#[derive(Debug, Clone)]
pub struct ZeroShotEnsemble {
    roster: Roster,
    profiles: Vec<TaskProfile>,
    stats: FeatureStats,
    standardized: Vec<[f64; N_FEATURES]>,
    temperature: f64,
}

fn distance(a: &[f64; N_FEATURES], b: &[f64; N_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    })
}

impl ZeroShotEnsemble {
    /// Profiles every shard: feature centroid and lowest-MSE model.
    pub fn fit(shards: &[MetaShard]) -> Result<Self> {
        let first = shards.first().ok_or(Error::EmptyDataset)?;
        let roster = first.roster().clone();
        let mut profiles = Vec::with_capacity(shards.len());
        for shard in shards {
            roster.ensure_same(shard.roster())?;
            let scores = ValidationScoreTable::from_shard(shard, Criterion::Mse)?;
            let n = shard.len() as f64;
            let mut centroid = [0.0; N_FEATURES];
            for s in shard.samples() {
                for (c, v) in centroid.iter_mut().zip(s.features().as_slice()) {
                    *c += v / n;
                }
            }
            profiles.push(TaskProfile {
                task_id: shard.task_id().to_owned(),
                centroid: MetaFeatureVector::from_array(centroid),
                best_model: scores.best(),
            });
        }
        let stats = FeatureStats::fit(profiles.iter().map(|p| &p.centroid))?;
        let standardized: Vec<[f64; N_FEATURES]> = profiles
            .iter()
            .map(|p| standardize_features(&stats, &p.centroid))
            .collect();
        let mut pairwise = Vec::new();
        for i in 0..standardized.len() {
            for j in i + 1..standardized.len() {
                pairwise.push(distance(&standardized[i], &standardized[j]));
            }
        }
        let temperature = median(pairwise)
            .filter(|t| *t > 0.0 && t.is_finite())
            .unwrap_or(DEFAULT_TEMPERATURE);
        Ok(Self {
            roster,
            profiles,
            stats,
            standardized,
            temperature,
        })
    }

    /// Replaces the median-distance temperature.
    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature {temperature}")));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn profiles(&self) -> &[TaskProfile] {
        &self.profiles
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Softmax similarity of the query to each task, in profile order.
    pub fn task_similarities(&self, query: &MetaFeatureVector) -> FusionWeights {
        let z = standardize_features(&self.stats, query);
        let logits: Vec<f64> = self
            .standardized
            .iter()
            .map(|c| -distance(&z, c) / self.temperature)
            .collect();
        FusionWeights::softmax(&logits)
    }

    pub fn weights(&self, query: &MetaFeatureVector) -> FusionWeights {
        let mut w = vec![0.0; self.roster.len()];
        for (p, s) in self.profiles.iter().zip(self.task_similarities(query).as_slice()) {
            w[p.best_model] += s;
        }
        let total: f64 = w.iter().sum();
        FusionWeights::new(w.into_iter().map(|v| v / total).collect()).expect("mixture of one-hot vectors")
    }
}

pub fn zeroshot_similarity_ensemble(shards: &[MetaShard], query: &MetaFeatureVector) -> Result<FusionWeights> {
    Ok(ZeroShotEnsemble::fit(shards)?.weights(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_dataset::{MetaSample, PredictionTensor, Split};
    use ndarray::{array, Array3};

    /// A task whose samples all carry `features` and where `best` predicts
    /// the truth exactly.
    fn task(id: &str, features: f64, best: usize) -> MetaShard {
        let r = Roster::new(["a", "b", "c"]).unwrap();
        let samples = (0..3)
            .map(|i| {
                let p = Array3::from_shape_fn((3, 1, 1), |(m, _, _)| if m == best { i as f64 } else { 10.0 + m as f64 });
                MetaSample::new(
                    MetaFeatureVector::from_array([features; N_FEATURES]),
                    PredictionTensor::new(p, r.clone()).unwrap(),
                    array![[i as f64]],
                )
                .unwrap()
            })
            .collect();
        MetaShard::from_samples(id, Split::MetaVal, samples).unwrap()
    }

    #[test]
    fn query_at_centroid_with_cold_temperature_is_one_hot() {
        let zs = ZeroShotEnsemble::fit(&[task("A", 1.0, 2), task("B", 3.0, 0)])
            .unwrap()
            .with_temperature(1e-9)
            .unwrap();
        let w = zs.weights(&MetaFeatureVector::from_array([1.0; N_FEATURES]));
        assert_eq!(w.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn equidistant_tasks_mix_equally() {
        let zs = ZeroShotEnsemble::fit(&[task("A", 1.0, 2), task("B", 3.0, 0)]).unwrap();
        let w = zs.weights(&MetaFeatureVector::from_array([2.0; N_FEATURES]));
        assert!((w.as_slice()[0] - 0.5).abs() < 1e-12);
        assert!((w.as_slice()[2] - 0.5).abs() < 1e-12);
        assert_eq!(w.as_slice()[1], 0.0);
    }

    #[test]
    fn temperature_defaults() {
        let zs = ZeroShotEnsemble::fit(&[task("A", 1.0, 2), task("B", 3.0, 0), task("C", 5.0, 1)]).unwrap();
        // standardized centroids sit at ±1.2247 and 0 on all 24 axes
        let step = (1.5f64).sqrt() * (N_FEATURES as f64).sqrt();
        assert!((zs.temperature() - step).abs() < 1e-9);
        let single = ZeroShotEnsemble::fit(&[task("A", 1.0, 2)]).unwrap();
        assert_eq!(single.temperature(), DEFAULT_TEMPERATURE);
        assert!(single.with_temperature(0.0).is_err());
    }
}
