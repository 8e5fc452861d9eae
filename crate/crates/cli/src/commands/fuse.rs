use std::fs;
use std::path::PathBuf;

use clap::Args;
use ndarray::Array2;
use rayon::prelude::*;
use timefuse::fusor::{fuse as fuse_forecasts, read_model, FusionWeights};
use timefuse::meta_dataset::{read_shard, PredictionTensor};
use timefuse::meta_features::{extract_meta_features, MetaFeatureVector, TimeSeriesWindow};

use crate::error::{require_inputs, require_output_dirs, AtPath, CliError, CliResult};
use crate::formats::{long_csv_bytes, read_long_csv, read_prediction_dir};
use crate::{Ctx, Status};

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Trained fusor model (JSON).
    #[arg(long)]
    model: PathBuf,

    /// Shard whose samples are fused; ids are sample positions.
    #[arg(long, required_unless_present = "windows", conflicts_with_all = ["windows", "predictions", "models"])]
    shard: Option<PathBuf>,

    /// Live input windows, long-format CSV.
    #[arg(long, requires = "predictions")]
    windows: Option<PathBuf>,

    /// Live zoo forecasts, one `<model>.json` + `<model>.f32` pair per model.
    #[arg(long, requires = "windows")]
    predictions: Option<PathBuf>,

    /// Roster order of the live forecasts; defaults to sidecars sorted by name.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,

    /// Output fused forecasts, long-format CSV.
    #[arg(long)]
    out: PathBuf,

    /// Also write each sample's fusion weights.
    #[arg(long, value_name = "CSV")]
    emit_weights: Option<PathBuf>,
}

pub fn fuse(ctx: &Ctx, args: FuseArgs) -> CliResult<Status> {
    let inputs: Vec<&PathBuf> = [Some(&args.model), args.shard.as_ref(), args.windows.as_ref(), args.predictions.as_ref()]
        .into_iter()
        .flatten()
        .collect();
    require_inputs(inputs.iter().map(|p| p.as_path()))?;
    require_output_dirs([Some(&args.out), args.emit_weights.as_ref()].into_iter().flatten().map(|p| p.as_path()))?;

    let model = read_model(&args.model).at(&args.model)?;
    let (ids, inputs): (Vec<String>, Vec<(MetaFeatureVector, PredictionTensor)>) = match (&args.shard, &args.windows, &args.predictions) {
        (Some(path), _, _) => {
            let shard = read_shard(path).at(path)?;
            model.roster().ensure_same(shard.roster()).at(path)?;
            shard
                .samples()
                .iter()
                .enumerate()
                .map(|(i, s)| (i.to_string(), (s.features().clone(), s.predictions().clone())))
                .unzip()
        }
        (None, Some(windows), Some(dir)) => {
            let table = read_long_csv(windows)?;
            let preds = read_prediction_dir(dir, &args.models, table.len(), None)?;
            if let Some(first) = preds.first() {
                model.roster().ensure_same(first.roster()).at(dir)?;
            }
            let features = table
                .ids
                .par_iter()
                .zip(&table.frames)
                .map(|(id, frame)| {
                    TimeSeriesWindow::new(frame.clone())
                        .map(|w| extract_meta_features(&w))
                        .map_err(|e| CliError::Data(format!("{}: sample `{id}`: {e}", windows.display())))
                })
                .collect::<CliResult<Vec<_>>>()?;
            (table.ids, features.into_iter().zip(preds).collect())
        }
        _ => return Err(CliError::Usage("give --shard, or --windows with --predictions".into())),
    };

    let fused: Vec<(FusionWeights, Array2<f64>)> = inputs
        .par_iter()
        .map(|(features, preds)| {
            let w = model.predict_weights(features);
            let out = fuse_forecasts(&w, preds)?;
            Ok((w, out))
        })
        .collect::<CliResult<_>>()?;
    if let Some((i, _)) = fused.iter().enumerate().find(|(_, (_, f))| f.iter().any(|v| !v.is_finite())) {
        return Err(CliError::Numeric(format!("sample `{}`: non-finite fused forecast", ids[i])));
    }

    let frames: Vec<Array2<f64>> = fused.iter().map(|(_, f)| f.clone()).collect();
    let forecast_bytes = long_csv_bytes(&ids, &frames)?;
    let weight_bytes = match &args.emit_weights {
        None => None,
        Some(_) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(std::iter::once("sample_id").chain(model.roster().iter().map(String::as_str)))?;
            for (id, (weights, _)) in ids.iter().zip(&fused) {
                w.write_record(std::iter::once(id.clone()).chain(weights.as_slice().iter().map(|v| v.to_string())))?;
            }
            Some(w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)
        }
    };
    fs::write(&args.out, forecast_bytes).at(&args.out)?;
    if let (Some(p), Some(bytes)) = (&args.emit_weights, weight_bytes) {
        fs::write(p, bytes).at(p)?;
    }
    ctx.say(format!("{} fused forecasts -> {}", ids.len(), args.out.display()));
    Ok(Status::Clean)
}
