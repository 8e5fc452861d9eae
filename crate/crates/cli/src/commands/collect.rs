use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use timefuse::meta_dataset::{collect_meta_sample, write_shard, MetaShard, Split};
use timefuse::meta_features::TimeSeriesWindow;

use crate::error::{require_inputs, require_output_dirs, AtPath, CliError, CliResult};
use crate::formats::{read_long_csv, read_prediction_dir};
use crate::{Ctx, Status};

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Input windows, long-format CSV.
    #[arg(long)]
    windows: PathBuf,

    /// Directory of `<model>.json` + `<model>.f32` forecast files.
    #[arg(long)]
    predictions: PathBuf,

    /// Horizon ground truth, long-format CSV with the windows' sample ids.
    #[arg(long)]
    truths: PathBuf,

    /// Task identifier stored in the shard.
    #[arg(long)]
    task: String,

    /// meta_train, meta_val or test.
    #[arg(long, default_value = "meta_train")]
    split: Split,

    /// Zoo roster in order; defaults to every sidecar, sorted by name.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,

    /// Output shard file.
    #[arg(long)]
    out: PathBuf,
}

pub fn collect(ctx: &Ctx, args: CollectArgs) -> CliResult<Status> {
    require_inputs([args.windows.as_path(), args.predictions.as_path(), args.truths.as_path()])?;
    require_output_dirs([args.out.as_path()])?;
    if args.task.is_empty() {
        return Err(CliError::Usage("--task must not be empty".into()));
    }
    let windows = read_long_csv(&args.windows)?;
    let truths = read_long_csv(&args.truths)?;
    if windows.ids != truths.ids {
        let at = windows
            .ids
            .iter()
            .zip(&truths.ids)
            .position(|(a, b)| a != b)
            .unwrap_or(windows.len().min(truths.len()));
        return Err(CliError::Data(format!(
            "{} and {} disagree on sample ids ({} vs {} samples, first difference at sample {at})",
            args.windows.display(),
            args.truths.display(),
            windows.len(),
            truths.len()
        )));
    }
    let shape = truths.uniform_shape(&args.truths)?;
    let predictions = read_prediction_dir(&args.predictions, &args.models, windows.len(), Some(shape))?;

    let samples = windows
        .ids
        .par_iter()
        .zip(&windows.frames)
        .zip(&truths.frames)
        .zip(predictions)
        .map(|(((id, window), truth), preds)| {
            TimeSeriesWindow::new(window.clone())
                .and_then(|w| collect_meta_sample(&w, preds, truth.clone()))
                .map_err(|e| CliError::Data(format!("sample `{id}`: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let shard = MetaShard::from_samples(args.task.clone(), args.split, samples)?;
    write_shard(&shard, &args.out).at(&args.out)?;
    ctx.say(format!(
        "task {} ({}): {} samples, k={} [{}], t_out={}, d={} -> {}",
        shard.task_id(),
        shard.split(),
        shard.len(),
        shard.roster().len(),
        shard.roster().join(","),
        shape.0,
        shape.1,
        args.out.display()
    ));
    Ok(Status::Clean)
}
