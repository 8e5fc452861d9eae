//! The learnable fusor: standardized meta-features → softmax weights over the
//! model zoo → convex combination of the zoo's forecasts.

mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView2};

pub use io::{
    export_task_weights, export_theta, model_from_json, model_to_json, read_model, theta_to_csv,
    write_model, TaskWeightSummary,
};
pub use train::{
    batch_loss, loss_and_gradient, train_fusor, train_on_joint, EpochRecord, Gradient,
    TrainConfig, TrainedFusor, VALIDATION_FRACTION,
};

use crate::error::{Error, Result};
use crate::meta_dataset::{MetaSample, PredictionTensor, Roster};
use crate::meta_features::{MetaFeatureVector, N_FEATURES};

/// Lower bound on per-feature standard deviations.
pub const STD_EPSILON: f64 = 1e-8;
/// Standardized features are clamped to `±STANDARDIZED_CLAMP`.
pub const STANDARDIZED_CLAMP: f64 = 10.0;

/// Per-feature z-score statistics taken from meta-training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    means: [f64; N_FEATURES],
    stds: [f64; N_FEATURES],
}

impl FeatureStats {
    /// `stds` below [`STD_EPSILON`] are raised to it.
    pub fn new(means: [f64; N_FEATURES], stds: [f64; N_FEATURES]) -> Self {
        Self {
            means,
            stds: stds.map(|s| if s >= STD_EPSILON { s } else { STD_EPSILON }),
        }
    }

    /// Identity standardization (mean 0, std 1).
    pub fn identity() -> Self {
        Self::new([0.0; N_FEATURES], [1.0; N_FEATURES])
    }

    /// Population mean and std of each feature over `features`.
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a MetaFeatureVector>) -> Result<Self> {
        let rows: Vec<&MetaFeatureVector> = features.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = rows.len() as f64;
        let mut means = [0.0; N_FEATURES];
        for r in &rows {
            for (m, v) in means.iter_mut().zip(r.as_slice()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = [0.0; N_FEATURES];
        for r in &rows {
            for ((s, v), m) in stds.iter_mut().zip(r.as_slice()).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Ok(Self::new(means, stds))
    }

    pub fn means(&self) -> &[f64; N_FEATURES] {
        &self.means
    }

    pub fn stds(&self) -> &[f64; N_FEATURES] {
        &self.stds
    }
}

/// `z[i] = clamp((raw[i] - mean[i]) / std[i], ±10)`.
pub fn standardize_features(stats: &FeatureStats, raw: &MetaFeatureVector) -> [f64; N_FEATURES] {
    let mut z = [0.0; N_FEATURES];
    for i in 0..N_FEATURES {
        z[i] = ((raw[i] - stats.means[i]) / stats.stds[i])
            .clamp(-STANDARDIZED_CLAMP, STANDARDIZED_CLAMP);
    }
    z
}

/// A point on the probability simplex over the zoo.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights(Vec<f64>);

impl FusionWeights {
    /// Accepts finite, nonnegative weights summing to 1 within `1e-9`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("no weights".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(format!("{weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut w = vec![0.0; k];
        w[index] = 1.0;
        Self(w)
    }

    /// Numerically stable softmax (the largest logit is subtracted first).
    pub fn softmax(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        Self(exp.into_iter().map(|e| e / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Linear map `Θ` (24 × k) plus bias, the standardization it was trained
/// with, and the roster its columns refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct FusorModel {
    theta: Array2<f64>,
    bias: Array1<f64>,
    stats: FeatureStats,
    roster: Roster,
    huber_delta: f64,
}

impl FusorModel {
    /// All-zero parameters: predicts uniform weights for every input.
    pub fn zeros(roster: Roster, stats: FeatureStats, huber_delta: f64) -> Self {
        let k = roster.len();
        Self {
            theta: Array2::zeros((N_FEATURES, k)),
            bias: Array1::zeros(k),
            stats,
            roster,
            huber_delta,
        }
    }

    pub fn from_parts(
        theta: Array2<f64>,
        bias: Array1<f64>,
        stats: FeatureStats,
        roster: Roster,
        huber_delta: f64,
    ) -> Result<Self> {
        let k = roster.len();
        if theta.dim() != (N_FEATURES, k) || bias.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "theta {:?} and bias {} do not fit {} features × {} models",
                theta.dim(),
                bias.len(),
                N_FEATURES,
                k
            )));
        }
        if theta.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite fusor parameter".into()));
        }
        if !(huber_delta > 0.0 && huber_delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("huber delta {huber_delta}")));
        }
        Ok(Self {
            theta,
            bias,
            stats,
            roster,
            huber_delta,
        })
    }

    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Array2<f64> {
        &mut self.theta
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.bias
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn k(&self) -> usize {
        self.roster.len()
    }

    pub fn huber_delta(&self) -> f64 {
        self.huber_delta
    }

    /// `Θᵀz + b` for already standardized features.
    pub fn logits(&self, z: &[f64; N_FEATURES]) -> Vec<f64> {
        let mut out = self.bias.to_vec();
        for (f, &zf) in z.iter().enumerate() {
            if zf == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(self.theta.row(f)) {
                *o += zf * t;
            }
        }
        out
    }

    pub fn predict_weights(&self, features: &MetaFeatureVector) -> FusionWeights {
        FusionWeights::softmax(&self.logits(&standardize_features(&self.stats, features)))
    }

    /// Weights and fused forecast for one stored sample.
    pub fn fuse_sample(&self, sample: &MetaSample) -> Result<(FusionWeights, Array2<f64>)> {
        self.roster.ensure_same(sample.predictions().roster())?;
        let w = self.predict_weights(sample.features());
        let fused = fuse(&w, sample.predictions())?;
        Ok((w, fused))
    }
}

/// `Σ_i w_i · P_i` over the zoo axis.
pub fn fuse(weights: &FusionWeights, predictions: &PredictionTensor) -> Result<Array2<f64>> {
    if weights.len() != predictions.k() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} models",
            weights.len(),
            predictions.k()
        )));
    }
    Ok(combine(weights.as_slice(), predictions))
}

pub(crate) fn combine(weights: &[f64], predictions: &PredictionTensor) -> Array2<f64> {
    let mut out = Array2::zeros((predictions.t_out(), predictions.d()));
    for (i, &w) in weights.iter().enumerate() {
        out.scaled_add(w, &predictions.slice(i));
    }
    out
}

fn ensure_same_shape(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs truth {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `ρ_δ(r) = r²/2` for `|r| ≤ δ`, else `δ(|r| - δ/2)`.
pub(crate) fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to `r`.
pub(crate) fn huber_derivative(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Mean Huber penalty over all elements.
pub fn huber_loss(prediction: ArrayView2<f64>, truth: ArrayView2<f64>, delta: f64) -> Result<f64> {
    ensure_same_shape(&prediction, &truth)?;
    let n = prediction.len() as f64;
    Ok(prediction
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| huber(p - t, delta))
        .sum::<f64>()
        / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_dataset::tests::roster;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array3};

    fn features(v: f64) -> MetaFeatureVector {
        MetaFeatureVector::from_array([v; N_FEATURES])
    }

    #[test]
    fn standardization() {
        let stats = FeatureStats::new([2.0; N_FEATURES], [0.5; N_FEATURES]);
        assert_eq!(standardize_features(&stats, &features(2.0)), [0.0; N_FEATURES]);
        assert_eq!(standardize_features(&stats, &features(2.5)), [1.0; N_FEATURES]);
        assert_eq!(standardize_features(&stats, &features(100.0)), [10.0; N_FEATURES]);

        // a constant training feature has std 0, clamped to ε
        let flat = FeatureStats::fit([features(3.0), features(3.0)].iter()).unwrap();
        assert_eq!(flat.stds()[0], STD_EPSILON);
        assert_eq!(standardize_features(&flat, &features(3.0)), [0.0; N_FEATURES]);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = FusorModel::zeros(roster(&["a", "b", "c"]), FeatureStats::identity(), 1.0);
        for w in m.predict_weights(&features(7.0)).as_slice() {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bias_only_softmax() {
        let mut m = FusorModel::zeros(roster(&["a", "b"]), FeatureStats::identity(), 1.0);
        m.bias_mut()[0] = 2f64.ln();
        let w = m.predict_weights(&features(-4.0));
        assert_abs_diff_eq!(w.as_slice()[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.as_slice()[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_is_shift_invariant_and_stable() {
        let a = FusionWeights::softmax(&[1.0, -2.0, 0.5]);
        let b = FusionWeights::softmax(&[1001.0, 998.0, 1000.5]);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        let huge = FusionWeights::softmax(&[1e308, 0.0]);
        assert_eq!(huge.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn fuse_examples() {
        let p = PredictionTensor::new(
            Array3::from_shape_vec((2, 1, 1), vec![0.0, 2.0]).unwrap(),
            roster(&["a", "b"]),
        )
        .unwrap();
        assert_eq!(fuse(&FusionWeights::uniform(2), &p).unwrap(), array![[1.0]]);
        assert_eq!(fuse(&FusionWeights::one_hot(2, 1), &p).unwrap(), array![[2.0]]);
        assert!(matches!(
            fuse(&FusionWeights::uniform(3), &p),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn weights_validation() {
        assert!(FusionWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(FusionWeights::new(vec![0.6, 0.5]).is_err());
        assert!(FusionWeights::new(vec![1.5, -0.5]).is_err());
        assert!(FusionWeights::new(vec![]).is_err());
    }

    #[test]
    fn huber_branches() {
        let zeros = Array2::<f64>::zeros((3, 2));
        let half = Array2::from_elem((3, 2), 0.5);
        let two = Array2::from_elem((3, 2), 2.0);
        assert_eq!(huber_loss(half.view(), zeros.view(), 1.0).unwrap(), 0.125);
        assert_eq!(huber_loss(two.view(), zeros.view(), 1.0).unwrap(), 1.5);
        assert!(huber_loss(two.view(), Array2::zeros((2, 2)).view(), 1.0).is_err());
        assert_eq!(huber_derivative(3.0, 1.0), 1.0);
        assert_eq!(huber_derivative(-0.25, 1.0), -0.25);
    }

    #[test]
    fn huber_with_large_delta_is_half_mse() {
        let p = array![[0.3, -1.7], [2.2, 0.0]];
        let t = array![[-0.4, 0.9], [1.0, 5.0]];
        let mse = (&p - &t).mapv(|r| r * r).mean().unwrap();
        assert_abs_diff_eq!(huber_loss(p.view(), t.view(), 1e9).unwrap(), mse / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn from_parts_checks_dimensions() {
        let r = roster(&["a", "b"]);
        assert!(FusorModel::from_parts(
            Array2::zeros((24, 3)),
            Array1::zeros(2),
            FeatureStats::identity(),
            r.clone(),
            1.0
        )
        .is_err());
        assert!(FusorModel::from_parts(
            Array2::zeros((24, 2)),
            Array1::zeros(2),
            FeatureStats::identity(),
            r,
            0.0
        )
        .is_err());
    }
}
