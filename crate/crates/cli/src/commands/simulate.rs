use std::fs;
use std::path::PathBuf;

use clap::Args;
use ndarray::{Array2, Axis};
use timefuse::baselines::{zoo_predictions, ZooMethod};
use timefuse::synthetic::{standard_regimes, synthetic_series, TaskSpec};

use crate::error::{AtPath, CliError, CliResult};
use crate::formats::{long_csv_bytes, write_model_predictions};
use crate::{Ctx, Status};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory; receives windows.csv, truths.csv and predictions/.
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 200)]
    samples: usize,

    #[arg(long, default_value_t = 96)]
    t_in: usize,

    #[arg(long, default_value_t = 24)]
    t_out: usize,

    #[arg(long, default_value_t = 1)]
    d: usize,

    /// Relative frequency of seasonal, mean-reverting and random-walk samples.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
    mix: Vec<f64>,

    /// Zoo run on every window; file names replace `:` with `_`.
    #[arg(long, value_delimiter = ',', default_value = "seasonal_naive:16,ar_p:1,naive_last")]
    zoo: Vec<ZooMethod>,
}

pub fn simulate(ctx: &Ctx, args: SimulateArgs) -> CliResult<Status> {
    if args.samples == 0 || args.d == 0 || args.t_out == 0 {
        return Err(CliError::Usage("--samples, --d and --t-out must be positive".into()));
    }
    if args.mix.len() != 3 {
        return Err(CliError::Usage(format!("--mix takes 3 weights, got {}", args.mix.len())));
    }
    for m in &args.zoo {
        m.validate(args.t_in)?;
    }
    let names: Vec<String> = args.zoo.iter().map(|m| m.to_string().replace(':', "_")).collect();
    let spec = TaskSpec {
        task_id: "simulated".into(),
        mix: standard_regimes().into_iter().zip(args.mix.iter().copied()).collect(),
        t_in: args.t_in,
        t_out: args.t_out,
        d: args.d,
    };
    let series = synthetic_series(&spec, args.samples, ctx.seed)?;
    let mut per_model: Vec<Vec<Array2<f64>>> = vec![Vec::with_capacity(series.len()); args.zoo.len()];
    for (window, _) in &series {
        let preds = zoo_predictions(window.view(), &args.zoo, args.t_out)?;
        for (i, slot) in per_model.iter_mut().enumerate() {
            slot.push(preds.values().index_axis(Axis(0), i).to_owned());
        }
    }

    let ids: Vec<String> = (0..series.len()).map(|i| format!("s{i}")).collect();
    let (windows, truths): (Vec<_>, Vec<_>) = series.into_iter().unzip();
    let pred_dir = args.out.join("predictions");
    fs::create_dir_all(&pred_dir).at(&pred_dir)?;
    let (w, t) = (args.out.join("windows.csv"), args.out.join("truths.csv"));
    fs::write(&w, long_csv_bytes(&ids, &windows)?).at(&w)?;
    fs::write(&t, long_csv_bytes(&ids, &truths)?).at(&t)?;
    for (name, forecasts) in names.iter().zip(&per_model) {
        write_model_predictions(&pred_dir, name, forecasts)?;
    }
    ctx.say(format!(
        "{} samples, zoo [{}] -> {}",
        ids.len(),
        names.join(","),
        args.out.display()
    ));
    Ok(Status::Clean)
}
