//! Static ensembles, greedy selection, and rank summaries over the zoo.

mod zero_shot;
mod zoo;

use ndarray::{Array2, ArrayView2};

pub use zero_shot::{zeroshot_similarity_ensemble, TaskProfile, ZeroShotEnsemble};
pub use zoo::{synthetic_zoo_forecast, zoo_predictions, ZooMethod};

use crate::error::{Error, Result};
use crate::fusor::{huber_loss, FusionWeights};
use crate::meta_dataset::{MetaSample, MetaShard, PredictionTensor, Roster};

/// Loss used to score a forecast against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Criterion {
    #[default]
    Mse,
    Mae,
    Huber(f64),
}

impl Criterion {
    pub fn loss(&self, prediction: ArrayView2<f64>, truth: ArrayView2<f64>) -> f64 {
        let n = prediction.len() as f64;
        let residuals = prediction.iter().zip(truth.iter()).map(|(p, t)| p - t);
        match *self {
            Criterion::Mse => residuals.map(|r| r * r).sum::<f64>() / n,
            Criterion::Mae => residuals.map(f64::abs).sum::<f64>() / n,
            Criterion::Huber(delta) => huber_loss(prediction, truth, delta).expect("same shape"),
        }
    }
}

/// Per-model loss on a designated shard, in roster order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationScoreTable {
    roster: Roster,
    scores: Vec<f64>,
}

impl ValidationScoreTable {
    pub fn new(roster: Roster, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != roster.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scores for {} models",
                scores.len(),
                roster.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("non-finite validation score".into()));
        }
        Ok(Self { roster, scores })
    }

    /// Mean per-sample loss of each model over the shard.
    pub fn from_shard(shard: &MetaShard, criterion: Criterion) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = shard.roster().len();
        let mut scores = vec![0.0; k];
        for s in shard.samples() {
            for (i, score) in scores.iter_mut().enumerate() {
                *score += criterion.loss(s.predictions().slice(i), s.truth().view());
            }
        }
        let n = shard.len() as f64;
        scores.iter_mut().for_each(|s| *s /= n);
        Self::new(shard.roster().clone(), scores)
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Lowest-loss model; the earliest in roster order on ties.
    pub fn best(&self) -> usize {
        topk_order(&self.scores)[0]
    }
}

fn topk_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps roster order among equal scores
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// Indices of the `k_sel` lowest-loss models, best first.
pub fn topk_select(scores: &ValidationScoreTable, k_sel: usize) -> Result<Vec<usize>> {
    let k = scores.scores.len();
    if k_sel == 0 || k_sel > k {
        return Err(Error::KOutOfRange { k_sel, k });
    }
    let mut order = topk_order(&scores.scores);
    order.truncate(k_sel);
    Ok(order)
}

fn check_subset(predictions: &PredictionTensor, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= predictions.k()) {
        return Err(Error::KOutOfRange {
            k_sel: bad,
            k: predictions.k(),
        });
    }
    Ok(())
}

/// Elementwise mean of the selected slices.
pub fn mean_ensemble(predictions: &PredictionTensor, subset: &[usize]) -> Result<Array2<f64>> {
    check_subset(predictions, subset)?;
    let mut out = Array2::zeros((predictions.t_out(), predictions.d()));
    for &i in subset {
        out += &predictions.slice(i);
    }
    Ok(out / subset.len() as f64)
}

/// Elementwise median of the selected slices; even counts average the two
/// middle values.
pub fn median_ensemble(predictions: &PredictionTensor, subset: &[usize]) -> Result<Array2<f64>> {
    check_subset(predictions, subset)?;
    let m = subset.len();
    let mut buf = vec![0.0; m];
    Ok(Array2::from_shape_fn((predictions.t_out(), predictions.d()), |(t, j)| {
        for (b, &i) in buf.iter_mut().zip(subset) {
            *b = predictions.values()[[i, t, j]];
        }
        buf.sort_by(f64::total_cmp);
        if m % 2 == 1 {
            buf[m / 2]
        } else {
            0.5 * (buf[m / 2 - 1] + buf[m / 2])
        }
    }))
}

/// Outcome of greedy forward selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSelection {
    /// Accepted members in order; a model may appear more than once.
    pub members: Vec<usize>,
    /// Member multiplicities over the roster, normalised to sum to 1.
    pub weights: FusionWeights,
    /// Shard loss after each accepted member.
    pub loss_path: Vec<f64>,
}

/// Greedy with-replacement selection under MSE.
pub fn forward_selection_ensemble(shard: &MetaShard, max_members: usize) -> Result<ForwardSelection> {
    forward_selection_with(shard, max_members, Criterion::Mse)
}

/// Repeatedly adds the model whose inclusion most lowers the shard loss of
/// the running uniform average; stops at `max_members` or when no candidate
/// strictly improves.
pub fn forward_selection_with(
    shard: &MetaShard,
    max_members: usize,
    criterion: Criterion,
) -> Result<ForwardSelection> {
    if shard.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if max_members == 0 {
        return Err(Error::InvalidConfig("max_members must be positive".into()));
    }
    let k = shard.roster().len();
    let samples = shard.samples();
    let mut sums: Vec<Array2<f64>> = samples
        .iter()
        .map(|s| Array2::zeros(s.truth().dim()))
        .collect();
    let mut members = Vec::new();
    let mut loss_path: Vec<f64> = Vec::new();

    while members.len() < max_members {
        let size = (members.len() + 1) as f64;
        let candidate_loss = |i: usize| {
            samples
                .iter()
                .zip(&sums)
                .map(|(s, sum)| {
                    let avg = (sum + &s.predictions().slice(i)) / size;
                    criterion.loss(avg.view(), s.truth().view())
                })
                .sum::<f64>()
                / samples.len() as f64
        };
        let (best, loss) = (0..k)
            .map(|i| (i, candidate_loss(i)))
            .fold((usize::MAX, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        if best == usize::MAX || loss_path.last().is_some_and(|&prev| loss >= prev) {
            break;
        }
        for (s, sum) in samples.iter().zip(sums.iter_mut()) {
            *sum += &s.predictions().slice(best);
        }
        members.push(best);
        loss_path.push(loss);
    }
    if members.is_empty() {
        return Err(Error::InvalidConfig("no finite candidate loss".into()));
    }
    let mut counts = vec![0.0; k];
    for &m in &members {
        counts[m] += 1.0;
    }
    let total = members.len() as f64;
    let weights = FusionWeights::new(counts.into_iter().map(|c| c / total).collect())?;
    Ok(ForwardSelection {
        members,
        weights,
        loss_path,
    })
}

/// Per-model share of samples on which the model has the lowest MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct RankFirstReport {
    pub roster: Roster,
    pub fractions: Vec<f64>,
    pub n_samples: usize,
    /// Model with the lowest mean per-sample MSE over all samples.
    pub best_individual: usize,
    /// Share of samples where the fused forecast's MSE is strictly below the
    /// best individual model's; present when fused forecasts were given.
    pub fused_beats_best: Option<f64>,
}

pub(crate) fn sample_mse(prediction: ArrayView2<f64>, truth: ArrayView2<f64>) -> f64 {
    Criterion::Mse.loss(prediction, truth)
}

/// Ties for first place split the credit equally. `fused`, when given, holds
/// one forecast per sample in shard order.
pub fn rank_first_analysis(shards: &[MetaShard], fused: Option<&[Array2<f64>]>) -> Result<RankFirstReport> {
    let first = shards.first().ok_or(Error::EmptyDataset)?;
    let roster = first.roster().clone();
    for s in shards {
        roster.ensure_same(s.roster())?;
    }
    let samples: Vec<&MetaSample> = shards.iter().flat_map(|s| s.samples()).collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(f) = fused {
        if f.len() != samples.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} fused forecasts for {} samples",
                f.len(),
                samples.len()
            )));
        }
    }
    let k = roster.len();
    let mut credit = vec![0.0; k];
    let mut totals = vec![0.0; k];
    let mut per_sample = Vec::with_capacity(samples.len());
    for s in &samples {
        let errs: Vec<f64> = (0..k)
            .map(|i| sample_mse(s.predictions().slice(i), s.truth().view()))
            .collect();
        let min = errs.iter().copied().fold(f64::INFINITY, f64::min);
        let winners = errs.iter().filter(|&&e| e == min).count() as f64;
        for (i, &e) in errs.iter().enumerate() {
            totals[i] += e;
            if e == min {
                credit[i] += 1.0 / winners;
            }
        }
        per_sample.push(errs);
    }
    let n = samples.len();
    let best_individual = topk_order(&totals)[0];
    let fused_beats_best = match fused {
        None => None,
        Some(f) => {
            let mut wins = 0usize;
            for ((s, errs), pred) in samples.iter().zip(&per_sample).zip(f) {
                if pred.dim() != s.truth().dim() {
                    return Err(Error::ShapeMismatch(format!(
                        "fused forecast {:?} vs truth {:?}",
                        pred.dim(),
                        s.truth().dim()
                    )));
                }
                if sample_mse(pred.view(), s.truth().view()) < errs[best_individual] {
                    wins += 1;
                }
            }
            Some(wins as f64 / n as f64)
        }
    };
    Ok(RankFirstReport {
        roster,
        fractions: credit.into_iter().map(|c| c / n as f64).collect(),
        n_samples: n,
        best_individual,
        fused_beats_best,
    })
}
