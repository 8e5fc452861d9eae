use std::path::PathBuf;

use clap::Args;
use timefuse::fusor::{export_task_weights, export_theta, train_fusor, write_model, TrainConfig};
use timefuse::meta_dataset::build_joint_dataset;

use super::load_shards;
use crate::error::{require_inputs, require_output_dirs, AtPath, CliResult};
use crate::{Ctx, Status};

/// Optimizer settings shared by `train` and `report --holdout`.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,

    #[arg(long, default_value_t = 32)]
    batch_size: usize,

    /// 0 writes the untrained (uniform) fusor.
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,

    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 5)]
    patience: usize,

    #[arg(long, default_value_t = 1.0)]
    huber_delta: f64,
}

impl TrainFlags {
    pub fn config(&self, seed: u64) -> CliResult<TrainConfig> {
        let config = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
            huber_delta: self.huber_delta,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Meta-training shards, one or more tasks.
    #[arg(required = true)]
    shards: Vec<PathBuf>,

    /// Output fusor model (JSON).
    #[arg(long)]
    out: PathBuf,

    #[command(flatten)]
    flags: TrainFlags,

    /// Also write Θ as a feature × model CSV.
    #[arg(long, value_name = "CSV")]
    export_theta: Option<PathBuf>,

    /// Also write per-task mean and std of the predicted weights.
    #[arg(long, value_name = "CSV")]
    export_weights: Option<PathBuf>,
}

pub fn train(ctx: &Ctx, args: TrainArgs) -> CliResult<Status> {
    let config = args.flags.config(ctx.seed)?;
    require_inputs(args.shards.iter().map(|p| p.as_path()))?;
    let outputs: Vec<&PathBuf> = [Some(&args.out), args.export_theta.as_ref(), args.export_weights.as_ref()]
        .into_iter()
        .flatten()
        .collect();
    require_output_dirs(outputs.iter().map(|p| p.as_path()))?;

    let shards = load_shards(&args.shards)?;
    let joint = build_joint_dataset(shards, ctx.seed)?;
    for s in joint.shards() {
        ctx.say(format!("task {}: {} samples", s.task_id(), s.len()));
    }
    let trained = train_fusor(&joint, &config)?;

    let names: Vec<&str> = joint.shards().iter().map(|s| s.task_id()).collect();
    let monitor = if trained.used_validation { "val" } else { "train (no validation split)" };
    for h in &trained.history {
        if h.epoch == 0 {
            ctx.say(format!("epoch 0: {monitor} loss {:.6}", h.val_loss));
            continue;
        }
        let batches: Vec<String> = names
            .iter()
            .zip(&h.batches_per_task)
            .map(|(n, b)| format!("{n}={b}"))
            .collect();
        ctx.say(format!(
            "epoch {}: train loss {:.6}, {monitor} loss {:.6}, batches {}",
            h.epoch,
            h.train_loss,
            h.val_loss,
            batches.join(" ")
        ));
    }
    ctx.say(format!(
        "selected epoch {}{}",
        trained.best_epoch,
        if trained.stopped_early { " (stopped early)" } else { "" }
    ));

    write_model(&trained.model, &args.out).at(&args.out)?;
    if let Some(p) = &args.export_theta {
        export_theta(&trained.model, p).at(p)?;
    }
    if let Some(p) = &args.export_weights {
        export_task_weights(&trained.model, joint.shards(), p).at(p)?;
    }
    ctx.say(format!("model -> {}", args.out.display()));
    Ok(Status::Clean)
}
