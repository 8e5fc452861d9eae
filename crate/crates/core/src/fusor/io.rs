//! Model files and CSV exports.

use std::fs;
use std::io;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{FeatureStats, FusorModel};
use crate::error::{Error, Result};
use crate::meta_dataset::{MetaShard, Roster};
use crate::meta_features::{FEATURE_NAMES, N_FEATURES};

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    roster: Vec<String>,
    huber_delta: f64,
    feature_order: Vec<String>,
    feature_means: Vec<f64>,
    feature_stds: Vec<f64>,
    theta: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Compact JSON with every float at 17 significant digits, enough for an
/// exact `f64` round trip.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn model_to_json(model: &FusorModel) -> Result<String> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        roster: model.roster().to_vec(),
        huber_delta: model.huber_delta(),
        feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        feature_means: model.stats().means().to_vec(),
        feature_stds: model.stats().stds().to_vec(),
        theta: model.theta().rows().into_iter().map(|r| r.to_vec()).collect(),
        bias: model.bias().to_vec(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    file.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

fn fixed<const N: usize>(v: Vec<f64>, what: &str) -> Result<[f64; N]> {
    let len = v.len();
    v.try_into()
        .map_err(|_| Error::Format(format!("{what} has {len} entries, expected {N}")))
}

pub fn model_from_json(text: &str) -> Result<FusorModel> {
    let f: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if f.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {}",
            f.format_version
        )));
    }
    if f.feature_order.iter().ne(FEATURE_NAMES.iter()) {
        return Err(Error::Format("feature order does not match this build".into()));
    }
    let roster = Roster::new(f.roster)?;
    let k = roster.len();
    if f.theta.len() != N_FEATURES || f.theta.iter().any(|r| r.len() != k) {
        return Err(Error::Format(format!("theta must be {N_FEATURES} rows of {k}")));
    }
    let means = fixed::<N_FEATURES>(f.feature_means, "feature_means")?;
    let stds = fixed::<N_FEATURES>(f.feature_stds, "feature_stds")?;
    if means.iter().chain(&stds).any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite feature statistic".into()));
    }
    let theta = Array2::from_shape_vec((N_FEATURES, k), f.theta.concat()).expect("checked shape");
    FusorModel::from_parts(
        theta,
        Array1::from(f.bias),
        FeatureStats::new(means, stds),
        roster,
        f.huber_delta,
    )
    .map_err(|e| match e {
        Error::ShapeMismatch(m) | Error::InvalidConfig(m) => Error::Format(m),
        other => other,
    })
}

pub fn write_model(model: &FusorModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<FusorModel> {
    model_from_json(&fs::read_to_string(path)?)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("{other:?}")),
    }
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

/// `Θ` as CSV: header `feature,<roster…>`, one row per meta-feature.
pub fn theta_to_csv(model: &FusorModel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["feature".to_string()];
    header.extend(model.roster().iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for (name, row) in FEATURE_NAMES.iter().zip(model.theta().rows()) {
        let mut record = vec![name.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_error)?;
    }
    finish(w)
}

pub fn export_theta(model: &FusorModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, theta_to_csv(model)?)?;
    Ok(())
}

/// Mean and population std of one model's predicted weight over a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeightSummary {
    pub task_id: String,
    pub model: String,
    pub mean_weight: f64,
    pub std_weight: f64,
}

/// Writes `task_id,model,mean_weight,std_weight` rows, one per task and
/// model, and returns them.
pub fn export_task_weights(
    model: &FusorModel,
    shards: &[MetaShard],
    path: impl AsRef<Path>,
) -> Result<Vec<TaskWeightSummary>> {
    let mut rows = Vec::new();
    for shard in shards {
        model.roster().ensure_same(shard.roster())?;
        if shard.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let weights: Vec<Vec<f64>> = shard
            .samples()
            .iter()
            .map(|s| model.predict_weights(s.features()).into_vec())
            .collect();
        let n = weights.len() as f64;
        for (j, name) in model.roster().iter().enumerate() {
            let mean = weights.iter().map(|w| w[j]).sum::<f64>() / n;
            let var = weights.iter().map(|w| (w[j] - mean).powi(2)).sum::<f64>() / n;
            rows.push(TaskWeightSummary {
                task_id: shard.task_id().to_owned(),
                model: name.clone(),
                mean_weight: mean,
                std_weight: var.sqrt(),
            });
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task_id", "model", "mean_weight", "std_weight"])
        .map_err(csv_error)?;
    for r in &rows {
        w.write_record([
            r.task_id.clone(),
            r.model.clone(),
            r.mean_weight.to_string(),
            r.std_weight.to_string(),
        ])
        .map_err(csv_error)?;
    }
    fs::write(path, finish(w)?)?;
    Ok(rows)
}
