//! Meta-training triplets, per-task shards, and the balanced joint dataset.
//!
//! A [`MetaSample`] stores the meta-features of one input window, the stacked
//! zoo predictions for its horizon, and the ground truth. Samples of one task
//! and split live in a [`MetaShard`]. [`JointMetaDataset`] oversamples every
//! shard to the size of the largest one and [`JointMetaDataset::batches`]
//! interleaves their batches round-robin.

mod shard;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use shard::{read_shard, shard_from_bytes, shard_to_bytes, write_shard, SHARD_MAGIC};

use crate::error::{Error, Result};
use crate::meta_features::{extract_meta_features, MetaFeatureVector, TimeSeriesWindow};

/// Ordered, duplicate-free model identifiers. Index `i` names prediction slice
/// `i` and weight `i` everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster(Arc<[String]>);

impl Roster {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::RosterTooSmall(names.len()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::DuplicateModelName(n.clone()));
            }
        }
        Ok(Self(names.into()))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    /// Fails unless `other` lists the same models in the same order.
    pub fn ensure_same(&self, other: &Roster) -> Result<()> {
        if self != other {
            return Err(Error::RosterMismatch {
                expected: self.0.to_vec(),
                found: other.0.to_vec(),
            });
        }
        Ok(())
    }
}

impl Deref for Roster {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

/// Stacked zoo outputs, `k × t_out × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    values: Array3<f64>,
    roster: Roster,
}

impl PredictionTensor {
    pub fn new(values: Array3<f64>, roster: Roster) -> Result<Self> {
        if values.shape()[0] != roster.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} prediction slices for a roster of {} models",
                values.shape()[0],
                roster.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite prediction value".into()));
        }
        Ok(Self { values, roster })
    }

    /// Stacks per-model `t_out × d` forecasts in roster order.
    pub fn from_slices(slices: &[Array2<f64>], roster: Roster) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::ShapeMismatch("no prediction slices".into()));
        };
        if let Some((i, s)) = slices.iter().enumerate().find(|(_, s)| s.dim() != first.dim()) {
            return Err(Error::ShapeMismatch(format!(
                "model `{}` predicts {:?}, expected {:?}",
                roster.get(i).map_or("?", String::as_str),
                s.dim(),
                first.dim()
            )));
        }
        let views: Vec<_> = slices.iter().map(|s| s.view()).collect();
        let values = ndarray::stack(Axis(0), &views).expect("equal shapes");
        Self::new(values, roster)
    }

    pub fn k(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn t_out(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn d(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn slice(&self, model: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), model)
    }
}

/// Which part of a task's data a shard holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    MetaTrain,
    MetaVal,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::MetaTrain => "meta_train",
            Split::MetaVal => "meta_val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meta_train" => Ok(Split::MetaTrain),
            "meta_val" => Ok(Split::MetaVal),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split `{other}`"))),
        }
    }
}

/// One meta-training triplet. All values are held at `f32` precision so a
/// sample is identical before and after a trip through a shard file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaSample {
    features: MetaFeatureVector,
    predictions: PredictionTensor,
    truth: Array2<f64>,
}

fn quantize<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) {
    a.mapv_inplace(|v| v as f32 as f64);
}

impl MetaSample {
    pub fn new(
        features: MetaFeatureVector,
        predictions: PredictionTensor,
        truth: Array2<f64>,
    ) -> Result<Self> {
        if truth.dim() != (predictions.t_out(), predictions.d()) {
            return Err(Error::ShapeMismatch(format!(
                "truth is {:?} but predictions are {} x {} x {}",
                truth.dim(),
                predictions.k(),
                predictions.t_out(),
                predictions.d()
            )));
        }
        if truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite truth value".into()));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite meta-feature".into()));
        }
        let PredictionTensor { mut values, roster } = predictions;
        quantize(&mut values);
        let mut truth = truth;
        quantize(&mut truth);
        let features = features.quantized();
        if values.iter().chain(truth.iter()).chain(features.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("value outside the f32 range".into()));
        }
        Ok(Self {
            features,
            predictions: PredictionTensor { values, roster },
            truth,
        })
    }

    pub fn features(&self) -> &MetaFeatureVector {
        &self.features
    }

    pub fn predictions(&self) -> &PredictionTensor {
        &self.predictions
    }

    pub fn truth(&self) -> &Array2<f64> {
        &self.truth
    }
}

/// Extracts the window's meta-features and packages the triplet.
pub fn collect_meta_sample(
    window: &TimeSeriesWindow,
    predictions: PredictionTensor,
    truth: Array2<f64>,
) -> Result<MetaSample> {
    if truth.dim() != (predictions.t_out(), predictions.d()) {
        return Err(Error::ShapeMismatch(format!(
            "truth is {:?} but predictions are {} x {} x {}",
            truth.dim(),
            predictions.k(),
            predictions.t_out(),
            predictions.d()
        )));
    }
    MetaSample::new(extract_meta_features(window), predictions, truth)
}

/// The data all samples of a shard share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSchema {
    pub roster: Roster,
    pub t_out: usize,
    pub d: usize,
}

/// The triplets of one task for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaShard {
    task_id: String,
    split: Split,
    schema: ShardSchema,
    samples: Vec<MetaSample>,
}

impl MetaShard {
    pub fn new(task_id: impl Into<String>, split: Split, schema: ShardSchema) -> Result<Self> {
        let task_id = task_id.into();
        if task_id.is_empty() {
            return Err(Error::Format("task id must not be empty".into()));
        }
        Ok(Self {
            task_id,
            split,
            schema,
            samples: Vec::new(),
        })
    }

    /// Builds a shard whose schema is taken from the first sample.
    pub fn from_samples(
        task_id: impl Into<String>,
        split: Split,
        samples: Vec<MetaSample>,
    ) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let schema = ShardSchema {
            roster: first.predictions.roster.clone(),
            t_out: first.predictions.t_out(),
            d: first.predictions.d(),
        };
        let mut shard = Self::new(task_id, split, schema)?;
        for s in samples {
            shard.push(s)?;
        }
        Ok(shard)
    }

    pub fn push(&mut self, sample: MetaSample) -> Result<()> {
        self.schema.roster.ensure_same(&sample.predictions.roster)?;
        let p = &sample.predictions;
        if (p.t_out(), p.d()) != (self.schema.t_out, self.schema.d) {
            return Err(Error::ShapeMismatch(format!(
                "sample horizon {} x {} does not match shard schema {} x {}",
                p.t_out(),
                p.d(),
                self.schema.t_out,
                self.schema.d
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn schema(&self) -> &ShardSchema {
        &self.schema
    }

    pub fn roster(&self) -> &Roster {
        &self.schema.roster
    }

    pub fn samples(&self) -> &[MetaSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same task and schema, different split label.
    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Moves a seeded `⌊fraction·n⌋` of the samples into a `meta_val` shard.
    /// Both parts keep the original sample order.
    pub fn carve_validation(&self, fraction: f64, seed: u64) -> (MetaShard, MetaShard) {
        let n = self.len();
        let n_val = ((n as f64) * fraction).floor() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut is_val = vec![false; n];
        for &i in &order[..n_val] {
            is_val[i] = true;
        }
        let part = |want: bool, split: Split| MetaShard {
            task_id: self.task_id.clone(),
            split,
            schema: self.schema.clone(),
            samples: self
                .samples
                .iter()
                .zip(&is_val)
                .filter(|(_, &v)| v == want)
                .map(|(s, _)| s.clone())
                .collect(),
        };
        (part(false, self.split), part(true, Split::MetaVal))
    }
}

/// All task shards, each oversampled to the largest shard's size.
#[derive(Debug, Clone)]
pub struct JointMetaDataset {
    shards: Vec<MetaShard>,
    target_size: usize,
    oversample_indices: Vec<Vec<usize>>,
    seed: u64,
}

/// Concatenated seeded permutations of `0..n`, truncated to `target`.
fn oversample_sequence(n: usize, target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut seq = Vec::with_capacity(target + n);
    while seq.len() < target {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        seq.extend(perm);
    }
    seq.truncate(target);
    seq
}

fn derive_seed(seed: u64, epoch_seed: u64) -> u64 {
    // splitmix64 finaliser over the pair; epoch 0 keeps the base seed
    if epoch_seed == 0 {
        return seed;
    }
    let mut z = seed ^ epoch_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Joins task shards for cross-task training. Shards may differ in horizon
/// and variable count but must share the model roster.
pub fn build_joint_dataset(shards: Vec<MetaShard>, seed: u64) -> Result<JointMetaDataset> {
    let first = shards.first().ok_or(Error::EmptyDataset)?;
    for s in &shards[1..] {
        first.roster().ensure_same(s.roster())?;
    }
    if shards.iter().any(MetaShard::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let target_size = shards.iter().map(MetaShard::len).max().expect("nonempty");
    let mut joint = JointMetaDataset {
        shards,
        target_size,
        oversample_indices: Vec::new(),
        seed,
    };
    joint.oversample_indices = joint.sequences(seed);
    Ok(joint)
}

impl JointMetaDataset {
    fn sequences(&self, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.shards
            .iter()
            .map(|s| oversample_sequence(s.len(), self.target_size, &mut rng))
            .collect()
    }

    pub fn shards(&self) -> &[MetaShard] {
        &self.shards
    }

    pub fn roster(&self) -> &Roster {
        self.shards[0].roster()
    }

    /// Samples each task contributes per epoch.
    pub fn target_size(&self) -> usize {
        self.target_size
    }

    /// Per-shard sample order for the base seed.
    pub fn oversample_indices(&self) -> &[Vec<usize>] {
        &self.oversample_indices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batches_per_task(&self, batch_size: usize) -> usize {
        self.target_size.div_ceil(batch_size.max(1))
    }

    /// One epoch of batches: task 0, task 1, …, task m-1, task 0, …
    ///
    /// `epoch_seed = 0` follows [`Self::oversample_indices`]; other values
    /// draw fresh permutations derived from the base seed.
    pub fn batches(&self, batch_size: usize, epoch_seed: u64) -> Batches<'_> {
        let batch_size = batch_size.max(1);
        let sequences = if epoch_seed == 0 {
            self.oversample_indices.clone()
        } else {
            self.sequences(derive_seed(self.seed, epoch_seed))
        };
        Batches {
            joint: self,
            sequences,
            batch_size,
            round: 0,
            task: 0,
            rounds: self.batches_per_task(batch_size),
        }
    }
}

/// One task's mini-batch.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub task_index: usize,
    pub task_id: &'a str,
    pub samples: Vec<&'a MetaSample>,
}

/// Round-robin batch stream over one epoch.
pub struct Batches<'a> {
    joint: &'a JointMetaDataset,
    sequences: Vec<Vec<usize>>,
    batch_size: usize,
    round: usize,
    task: usize,
    rounds: usize,
}

impl<'a> Iterator for Batches<'a> {
    type Item = Batch<'a>;

    fn next(&mut self) -> Option<Batch<'a>> {
        if self.round >= self.rounds {
            return None;
        }
        let shard = &self.joint.shards[self.task];
        let seq = &self.sequences[self.task];
        let start = self.round * self.batch_size;
        let end = (start + self.batch_size).min(seq.len());
        let batch = Batch {
            task_index: self.task,
            task_id: shard.task_id(),
            samples: seq[start..end].iter().map(|&i| &shard.samples[i]).collect(),
        };
        self.task += 1;
        if self.task == self.joint.shards.len() {
            self.task = 0;
            self.round += 1;
        }
        Some(batch)
    }
}

/// Alias for [`JointMetaDataset::batches`].
pub fn batch_iterator(joint: &JointMetaDataset, batch_size: usize, epoch_seed: u64) -> Batches<'_> {
    joint.batches(batch_size, epoch_seed)
}
