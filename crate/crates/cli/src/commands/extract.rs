use std::fs;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use timefuse::meta_features::{extract_meta_features, TimeSeriesWindow, FEATURE_NAMES};

use crate::error::{require_inputs, require_output_dirs, AtPath, CliError, CliResult};
use crate::formats::read_long_csv;
use crate::{Ctx, Status};

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Input windows, long-format CSV.
    #[arg(long)]
    windows: PathBuf,

    /// Output CSV: sample_id and one column per meta-feature.
    #[arg(long)]
    out: PathBuf,
}

pub fn extract(ctx: &Ctx, args: ExtractArgs) -> CliResult<Status> {
    require_inputs([args.windows.as_path()])?;
    require_output_dirs([args.out.as_path()])?;
    let table = read_long_csv(&args.windows)?;
    let features = table
        .ids
        .par_iter()
        .zip(&table.frames)
        .map(|(id, frame)| {
            TimeSeriesWindow::new(frame.clone())
                .map(|w| extract_meta_features(&w))
                .map_err(|e| CliError::Data(format!("{}: sample `{id}`: {e}", args.windows.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("sample_id").chain(FEATURE_NAMES))?;
    for (id, f) in table.ids.iter().zip(&features) {
        w.write_record(std::iter::once(id.clone()).chain(f.as_slice().iter().map(|v| v.to_string())))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(&args.out, bytes).at(&args.out)?;
    ctx.say(format!("{} windows -> {}", table.len(), args.out.display()));
    Ok(Status::Clean)
}
