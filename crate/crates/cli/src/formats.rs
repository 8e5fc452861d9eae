//! File formats of the command line: long-format CSV for windows, truths and
//! forecasts, and per-model raw float32 prediction files with JSON sidecars.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use timefuse::meta_dataset::{PredictionTensor, Roster};

use crate::error::{AtPath, CliError, CliResult};

/// Samples of a long-format CSV in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTable {
    pub ids: Vec<String>,
    /// One `t × d` block per sample.
    pub frames: Vec<Array2<f64>>,
}

impl LongTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Fails unless every sample has the same `t × d` shape.
    pub fn uniform_shape(&self, path: &Path) -> CliResult<(usize, usize)> {
        let first = self.frames[0].dim();
        for (id, f) in self.ids.iter().zip(&self.frames) {
            if f.dim() != first {
                return Err(CliError::Data(format!(
                    "{}: sample `{id}` is {} x {}, sample `{}` is {} x {}",
                    path.display(),
                    f.nrows(),
                    f.ncols(),
                    self.ids[0],
                    first.0,
                    first.1
                )));
            }
        }
        Ok(first)
    }
}

fn header(d: usize) -> Vec<String> {
    let mut h = vec!["sample_id".to_string(), "t".to_string()];
    h.extend((0..d).map(|j| format!("var_{j}")));
    h
}

/// Reads `sample_id,t,var_0,…,var_{d-1}` rows. The rows of a sample must be
/// contiguous with `t` counting up from 0.
pub fn read_long_csv(path: &Path) -> CliResult<LongTable> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .at(path)?;
    let head = reader.headers().at(path)?.clone();
    let d = head.len().saturating_sub(2);
    if d == 0 || head.iter().ne(header(d).iter().map(String::as_str)) {
        return Err(CliError::Data(format!(
            "{}: line 1: expected header sample_id,t,var_0,...,var_<d-1>",
            path.display()
        )));
    }

    let mut table = LongTable {
        ids: Vec::new(),
        frames: Vec::new(),
    };
    let mut current: Vec<f64> = Vec::new();
    let mut seen = HashSet::new();
    let flush = |table: &mut LongTable, current: &mut Vec<f64>| {
        if !table.ids.is_empty() {
            let rows = current.len() / d;
            table
                .frames
                .push(Array2::from_shape_vec((rows, d), std::mem::take(current)).expect("rows of d values"));
        }
    };
    for record in reader.records() {
        let record = record.at(path)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| CliError::Data(format!("{}: line {line}: {msg}", path.display()));
        if record.len() != d + 2 {
            return Err(bad(format!("expected {} fields, found {}", d + 2, record.len())));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(bad("empty sample_id".into()));
        }
        let t: usize = record[1]
            .parse()
            .map_err(|_| bad(format!("t `{}` is not a non-negative integer", &record[1])))?;
        if table.ids.last().map(String::as_str) != Some(id) {
            if !seen.insert(id.to_string()) {
                return Err(bad(format!("rows of sample `{id}` are not contiguous")));
            }
            flush(&mut table, &mut current);
            table.ids.push(id.to_string());
        }
        let expected = current.len() / d;
        if t != expected {
            return Err(bad(format!("sample `{id}` expects t = {expected}, found {t}")));
        }
        for j in 0..d {
            let v: f64 = record[j + 2]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("var_{j} `{}` is not a finite number", &record[j + 2])))?;
            current.push(v);
        }
    }
    flush(&mut table, &mut current);
    if table.ids.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", path.display())));
    }
    Ok(table)
}

/// Long-format CSV bytes; values use the shortest exact decimal form.
pub fn long_csv_bytes(ids: &[String], frames: &[Array2<f64>]) -> CliResult<Vec<u8>> {
    let d = frames.first().map_or(0, |f| f.ncols());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(d))?;
    for (id, f) in ids.iter().zip(frames) {
        for (t, row) in f.rows().into_iter().enumerate() {
            let mut rec = vec![id.clone(), t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

/// Shape declaration stored next to `<model>.f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub model: String,
    pub n_samples: usize,
    pub t_out: usize,
    pub d: usize,
}

fn prediction_paths(dir: &Path, model: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{model}.json")), dir.join(format!("{model}.f32")))
}

/// Model names of every sidecar in `dir`, sorted.
pub fn sidecar_models(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// One model's forecasts, `n_samples × t_out × d`.
pub fn read_model_predictions(dir: &Path, model: &str) -> CliResult<Array3<f64>> {
    let (json, raw) = prediction_paths(dir, model);
    let missing = |p: &Path| CliError::Data(format!("model `{model}`: missing {}", p.display()));
    if !json.is_file() {
        return Err(missing(&json));
    }
    if !raw.is_file() {
        return Err(missing(&raw));
    }
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(&json).at(&json)?)
        .map_err(|e| CliError::Data(format!("model `{model}`: {}: {e}", json.display())))?;
    if sidecar.model != model {
        return Err(CliError::Data(format!(
            "model `{model}`: {} declares model `{}`",
            json.display(),
            sidecar.model
        )));
    }
    let bytes = fs::read(&raw).at(&raw)?;
    let count = sidecar
        .n_samples
        .checked_mul(sidecar.t_out)
        .and_then(|c| c.checked_mul(sidecar.d))
        .and_then(|c| c.checked_mul(4));
    if count != Some(bytes.len()) {
        return Err(CliError::Data(format!(
            "model `{model}`: {} holds {} bytes, sidecar declares {} x {} x {} float32 values",
            raw.display(),
            bytes.len(),
            sidecar.n_samples,
            sidecar.t_out,
            sidecar.d
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Data(format!("model `{model}`: non-finite value at index {i}")));
    }
    Ok(Array3::from_shape_vec((sidecar.n_samples, sidecar.t_out, sidecar.d), values).expect("checked length"))
}

/// Writes `<model>.json` and `<model>.f32` for per-sample forecasts.
pub fn write_model_predictions(dir: &Path, model: &str, forecasts: &[Array2<f64>]) -> CliResult<()> {
    let (t_out, d) = forecasts.first().map_or((0, 0), |f| f.dim());
    let sidecar = Sidecar {
        model: model.to_string(),
        n_samples: forecasts.len(),
        t_out,
        d,
    };
    let mut raw = Vec::with_capacity(4 * forecasts.len() * t_out * d);
    for f in forecasts {
        for v in f.iter() {
            raw.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let (json, bin) = prediction_paths(dir, model);
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(&json, text).at(&json)?;
    fs::write(&bin, raw).at(&bin)?;
    Ok(())
}

/// Per-sample prediction tensors for `models` (or every sidecar in `dir`),
/// checked against `n_samples` and, when given, the truth shape.
pub fn read_prediction_dir(
    dir: &Path,
    models: &[String],
    n_samples: usize,
    shape: Option<(usize, usize)>,
) -> CliResult<Vec<PredictionTensor>> {
    let names = if models.is_empty() {
        sidecar_models(dir)?
    } else {
        models.to_vec()
    };
    let roster = Roster::new(names.iter().cloned()).at(dir)?;
    let mut per_model = Vec::with_capacity(names.len());
    for name in &names {
        let p = read_model_predictions(dir, name)?;
        let (n, t, d) = p.dim();
        if n != n_samples {
            return Err(CliError::Data(format!(
                "shape mismatch: model `{name}` has {n} samples, expected {n_samples}"
            )));
        }
        if let Some((t_out, dd)) = shape {
            if (t, d) != (t_out, dd) {
                return Err(CliError::Data(format!(
                    "shape mismatch: model `{name}` forecasts are {t} x {d}, truths are {t_out} x {dd}"
                )));
            }
        }
        if let Some((first, fp)) = names.first().zip(per_model.first()) {
            let fp: &Array3<f64> = fp;
            if (t, d) != (fp.dim().1, fp.dim().2) {
                return Err(CliError::Data(format!(
                    "shape mismatch: model `{name}` forecasts are {t} x {d}, model `{first}` forecasts are {} x {}",
                    fp.dim().1,
                    fp.dim().2
                )));
            }
        }
        per_model.push(p);
    }
    (0..n_samples)
        .map(|i| {
            let slices: Vec<Array2<f64>> = per_model
                .iter()
                .map(|p| p.index_axis(ndarray::Axis(0), i).to_owned())
                .collect();
            PredictionTensor::from_slices(&slices, roster.clone()).map_err(CliError::from)
        })
        .collect()
}
