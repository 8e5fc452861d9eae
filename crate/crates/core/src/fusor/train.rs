//! Mini-batch Adam on the mean per-sample Huber loss of the fused forecast,
//! with early stopping on held-out meta samples.

use ndarray::{Array1, Array2};

use super::{combine, huber, huber_derivative, standardize_features, FeatureStats, FusionWeights, FusorModel};
use crate::error::{Error, Result};
use crate::meta_dataset::{build_joint_dataset, JointMetaDataset, MetaSample};
use crate::meta_features::N_FEATURES;

/// Share of each shard held out for early stopping by [`train_fusor`].
pub const VALIDATION_FRACTION: f64 = 0.1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Zero returns the initial (uniform) model.
    pub max_epochs: usize,
    /// Epochs without a validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub huber_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            huber_delta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("huber delta {}", self.huber_delta)));
        }
        Ok(())
    }
}

/// Loss gradient with respect to `Θ` and the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean of the epoch's batch losses; NaN for epoch 0.
    pub train_loss: f64,
    pub val_loss: f64,
    pub best_val_loss: f64,
    /// Batches drawn from each task during the epoch, in shard order.
    pub batches_per_task: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainedFusor {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: FusorModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// False when no sample could be held out and training loss was monitored.
    pub used_validation: bool,
}

fn check_roster(model: &FusorModel, samples: &[&MetaSample]) -> Result<()> {
    for s in samples {
        model.roster().ensure_same(s.predictions().roster())?;
    }
    Ok(())
}

/// Per-sample forward pass; accumulates the gradient when `grad` is given.
fn sample_loss(model: &FusorModel, sample: &MetaSample, grad: Option<(&mut Gradient, f64)>) -> f64 {
    let z = standardize_features(model.stats(), sample.features());
    let w = FusionWeights::softmax(&model.logits(&z)).into_vec();
    let p = sample.predictions();
    let fused = combine(&w, p);
    let n = fused.len() as f64;
    let delta = model.huber_delta();

    let residual = &fused - sample.truth();
    let loss = residual.iter().map(|&r| huber(r, delta)).sum::<f64>() / n;

    if let Some((g, scale)) = grad {
        let d_fused = residual.mapv(|r| huber_derivative(r, delta) / n);
        let g_model: Vec<f64> = (0..p.k())
            .map(|i| (&p.slice(i) * &d_fused).sum())
            .collect();
        let mean_g: f64 = w.iter().zip(&g_model).map(|(wi, gi)| wi * gi).sum();
        for j in 0..p.k() {
            let d_logit = scale * w[j] * (g_model[j] - mean_g);
            g.bias[j] += d_logit;
            for f in 0..N_FEATURES {
                g.theta[[f, j]] += z[f] * d_logit;
            }
        }
    }
    loss
}

/// Mean over `samples` of the per-sample mean Huber loss of the fused forecast.
pub fn batch_loss(model: &FusorModel, samples: &[&MetaSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_roster(model, samples)?;
    Ok(unchecked_loss(model, samples))
}

fn unchecked_loss(model: &FusorModel, samples: &[&MetaSample]) -> f64 {
    samples.iter().map(|s| sample_loss(model, s, None)).sum::<f64>() / samples.len() as f64
}

/// [`batch_loss`] and its analytic gradient.
pub fn loss_and_gradient(model: &FusorModel, samples: &[&MetaSample]) -> Result<(f64, Gradient)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_roster(model, samples)?;
    Ok(unchecked_loss_and_gradient(model, samples))
}

fn unchecked_loss_and_gradient(model: &FusorModel, samples: &[&MetaSample]) -> (f64, Gradient) {
    let k = model.k();
    let mut g = Gradient {
        theta: Array2::zeros((N_FEATURES, k)),
        bias: Array1::zeros(k),
    };
    let scale = 1.0 / samples.len() as f64;
    let total: f64 = samples
        .iter()
        .map(|s| sample_loss(model, s, Some((&mut g, scale))))
        .sum();
    (total * scale, g)
}

struct Adam {
    step: i32,
    m_theta: Array2<f64>,
    v_theta: Array2<f64>,
    m_bias: Array1<f64>,
    v_bias: Array1<f64>,
}

impl Adam {
    fn new(k: usize) -> Self {
        Self {
            step: 0,
            m_theta: Array2::zeros((N_FEATURES, k)),
            v_theta: Array2::zeros((N_FEATURES, k)),
            m_bias: Array1::zeros(k),
            v_bias: Array1::zeros(k),
        }
    }

    fn update(&mut self, model: &mut FusorModel, g: &Gradient, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let apply = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
        };
        ndarray::Zip::from(model.theta_mut())
            .and(&mut self.m_theta)
            .and(&mut self.v_theta)
            .and(&g.theta)
            .for_each(|p, m, v, &g| apply(p, m, v, g));
        ndarray::Zip::from(model.bias_mut())
            .and(&mut self.m_bias)
            .and(&mut self.v_bias)
            .and(&g.bias)
            .for_each(|p, m, v, &g| apply(p, m, v, g));
    }
}

/// Carves [`VALIDATION_FRACTION`] of every shard (seeded by `config.seed`)
/// for early stopping, then trains on the rest. Shards too small to spare a
/// sample contribute everything to training; if no shard can, training loss
/// is monitored instead.
pub fn train_fusor(joint: &JointMetaDataset, config: &TrainConfig) -> Result<TrainedFusor> {
    config.validate()?;
    let mut train_shards = Vec::with_capacity(joint.shards().len());
    let mut val_shards = Vec::new();
    for shard in joint.shards() {
        let (train, val) = shard.carve_validation(VALIDATION_FRACTION, config.seed);
        train_shards.push(train);
        if !val.is_empty() {
            val_shards.push(val);
        }
    }
    let train = build_joint_dataset(train_shards, joint.seed())?;
    let val: Vec<&MetaSample> = val_shards.iter().flat_map(|s| s.samples()).collect();
    train_on_joint(&train, &val, config)
}

/// Trains on every sample of `train`, stopping early on `val`.
/// An empty `val` monitors the (non-oversampled) training samples.
pub fn train_on_joint(
    train: &JointMetaDataset,
    val: &[&MetaSample],
    config: &TrainConfig,
) -> Result<TrainedFusor> {
    config.validate()?;
    let roster = train.roster().clone();
    let train_samples: Vec<&MetaSample> = train.shards().iter().flat_map(|s| s.samples()).collect();
    if train_samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats = FeatureStats::fit(train_samples.iter().map(|s| s.features()))?;
    let mut model = FusorModel::zeros(roster, stats, config.huber_delta);
    check_roster(&model, val)?;

    let used_validation = !val.is_empty();
    let monitor: &[&MetaSample] = if used_validation { val } else { &train_samples };

    let initial = unchecked_loss(&model, monitor);
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: 0,
            step: 0,
            loss: initial,
        });
    }
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: f64::NAN,
        val_loss: initial,
        best_val_loss: initial,
        batches_per_task: vec![0; train.shards().len()],
    }];
    let mut best = (initial, model.clone(), 0);
    let mut adam = Adam::new(model.k());
    let mut wait = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let mut sum = 0.0;
        let mut batches = 0usize;
        let mut per_task = vec![0; train.shards().len()];
        for (step, batch) in train.batches(config.batch_size, (epoch - 1) as u64).enumerate() {
            per_task[batch.task_index] += 1;
            let (loss, grad) = unchecked_loss_and_gradient(&model, &batch.samples);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, loss });
            }
            adam.update(&mut model, &grad, config.learning_rate);
            sum += loss;
            batches += 1;
        }
        let val_loss = unchecked_loss(&model, monitor);
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                step: batches,
                loss: val_loss,
            });
        }
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
            wait = 0;
        } else {
            wait += 1;
        }
        history.push(EpochRecord {
            epoch,
            train_loss: sum / batches as f64,
            val_loss,
            best_val_loss: best.0,
            batches_per_task: per_task,
        });
        if wait > 0 && wait >= config.patience {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    let (_, model, best_epoch) = best;
    Ok(TrainedFusor {
        model,
        history,
        best_epoch,
        stopped_early,
        used_validation,
    })
}
