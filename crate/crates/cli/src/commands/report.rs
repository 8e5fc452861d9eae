use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use ndarray::Array2;
use timefuse::baselines::{
    forward_selection_ensemble, rank_first_analysis, topk_select, Criterion, RankFirstReport, ValidationScoreTable,
    ZeroShotEnsemble,
};
use timefuse::evaluation::{compute_metrics, leaderboard, zero_shot_protocol, Method, MetricsReport, TaskShards};
use timefuse::fusor::{read_model, FusorModel};
use timefuse::meta_dataset::{MetaShard, Split};

use super::load_shards;
use super::train::TrainFlags;
use crate::error::{require_inputs, require_output_dirs, AtPath, CliError, CliResult};
use crate::{Ctx, Status};

/// One `--methods` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Fused,
    Mean,
    Median,
    TopK(usize),
    Forward,
    ZeroShot,
    BestIndividual,
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fused" => MethodSpec::Fused,
            "mean" => MethodSpec::Mean,
            "median" => MethodSpec::Median,
            "forward" => MethodSpec::Forward,
            "zeroshot" => MethodSpec::ZeroShot,
            "best-individual" => MethodSpec::BestIndividual,
            other => match other.strip_prefix("topk:").map(str::parse) {
                Some(Ok(k)) if k > 0 => MethodSpec::TopK(k),
                _ => {
                    return Err(format!(
                        "unknown method `{other}`; expected fused, mean, median, topk:K, forward, zeroshot or best-individual"
                    ))
                }
            },
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Fused => f.write_str("fused"),
            MethodSpec::Mean => f.write_str("mean"),
            MethodSpec::Median => f.write_str("median"),
            MethodSpec::TopK(k) => write!(f, "topk:{k}"),
            MethodSpec::Forward => f.write_str("forward"),
            MethodSpec::ZeroShot => f.write_str("zeroshot"),
            MethodSpec::BestIndividual => f.write_str("best-individual"),
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Shards of any split; test shards are scored, meta_val (else
    /// meta_train) shards pick top-k, forward and best-individual members,
    /// meta_train shards of other tasks feed zeroshot.
    #[arg(required = true)]
    shards: Vec<PathBuf>,

    /// Trained fusor for the `fused` method.
    #[arg(long)]
    model: Option<PathBuf>,

    #[arg(long, value_delimiter = ',', default_value = "fused,mean,median,best-individual")]
    methods: Vec<MethodSpec>,

    /// Score only this task and add fusors trained with it (normal-fused)
    /// and without it (zeroshot-fused).
    #[arg(long, value_name = "TASK")]
    holdout: Option<String>,

    /// Largest forward-selection multiset; defaults to twice the zoo size.
    #[arg(long)]
    forward_max: Option<usize>,

    /// Leaderboard CSV.
    #[arg(long)]
    out: PathBuf,

    /// Rank-first CSV; defaults to `<out stem>_rank_first.csv`.
    #[arg(long, value_name = "CSV")]
    rank_out: Option<PathBuf>,

    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Default)]
struct TaskSplits<'a> {
    train: Option<&'a MetaShard>,
    val: Option<&'a MetaShard>,
    test: Option<&'a MetaShard>,
}

impl<'a> TaskSplits<'a> {
    fn selection(&self) -> Option<&'a MetaShard> {
        self.val.or(self.train)
    }
}

fn group(shards: &[MetaShard]) -> CliResult<Vec<(String, TaskSplits<'_>)>> {
    let mut tasks: Vec<(String, TaskSplits)> = Vec::new();
    for s in shards {
        let i = match tasks.iter().position(|(t, _)| t == s.task_id()) {
            Some(i) => i,
            None => {
                tasks.push((s.task_id().to_string(), TaskSplits::default()));
                tasks.len() - 1
            }
        };
        let slot = match s.split() {
            Split::MetaTrain => &mut tasks[i].1.train,
            Split::MetaVal => &mut tasks[i].1.val,
            Split::Test => &mut tasks[i].1.test,
        };
        if slot.replace(s).is_some() {
            return Err(CliError::Data(format!("two {} shards for task `{}`", s.split(), s.task_id())));
        }
    }
    Ok(tasks)
}

fn rank_out_path(args: &ReportArgs) -> PathBuf {
    args.rank_out.clone().unwrap_or_else(|| {
        let stem = args.out.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
        args.out.with_file_name(format!("{stem}_rank_first.csv"))
    })
}

fn build_method(
    spec: MethodSpec,
    task: &str,
    splits: &TaskSplits,
    all: &[(String, TaskSplits)],
    model: Option<&FusorModel>,
    forward_max: Option<usize>,
) -> CliResult<Method> {
    let selection = || {
        splits.selection().ok_or_else(|| {
            CliError::Data(format!("task `{task}`: method `{spec}` needs a meta_val or meta_train shard"))
        })
    };
    let scores = || -> CliResult<ValidationScoreTable> { Ok(ValidationScoreTable::from_shard(selection()?, Criterion::Mse)?) };
    Ok(match spec {
        MethodSpec::Fused => Method::Fusor(model.expect("checked before scoring").clone()),
        MethodSpec::Mean => Method::Uniform,
        MethodSpec::Median => {
            let k = splits.test.expect("scored tasks have a test shard").roster().len();
            Method::Median((0..k).collect())
        }
        MethodSpec::TopK(k) => Method::Mean(topk_select(&scores()?, k)?),
        MethodSpec::Forward => {
            let shard = selection()?;
            let max = forward_max.unwrap_or(2 * shard.roster().len());
            Method::Weighted(forward_selection_ensemble(shard, max)?.weights)
        }
        MethodSpec::ZeroShot => {
            let others: Vec<MetaShard> = all
                .iter()
                .filter(|(t, _)| t != task)
                .filter_map(|(_, s)| s.train.cloned())
                .collect();
            if others.is_empty() {
                return Err(CliError::Data(format!(
                    "task `{task}`: method `zeroshot` needs meta_train shards of another task"
                )));
            }
            Method::ZeroShot(ZeroShotEnsemble::fit(&others)?)
        }
        MethodSpec::BestIndividual => Method::Model(scores()?.best()),
    })
}

fn rank_csv(rows: &[(String, RankFirstReport)]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let roster = &rows[0].1.roster;
    let mut header = vec!["task", "n_samples", "best_individual", "fused_beats_best"];
    header.extend(roster.iter().map(String::as_str));
    w.write_record(&header)?;
    for (task, r) in rows {
        let mut rec = vec![
            task.clone(),
            r.n_samples.to_string(),
            r.roster[r.best_individual].clone(),
            r.fused_beats_best.map_or(String::new(), |f| format!("{f:.6}")),
        ];
        rec.extend(r.fractions.iter().map(|f| format!("{f:.6}")));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

pub fn report(ctx: &Ctx, args: ReportArgs) -> CliResult<Status> {
    let config = args.flags.config(ctx.seed)?;
    let rank_out = rank_out_path(&args);
    if args.methods.contains(&MethodSpec::Fused) && args.model.is_none() {
        return Err(CliError::Usage("method `fused` needs --model".into()));
    }
    if args.forward_max == Some(0) {
        return Err(CliError::Usage("--forward-max must be positive".into()));
    }
    let mut seen = Vec::new();
    for m in &args.methods {
        if seen.contains(m) {
            return Err(CliError::Usage(format!("method `{m}` listed twice")));
        }
        seen.push(*m);
    }
    require_inputs(args.shards.iter().chain(&args.model).map(|p| p.as_path()))?;
    require_output_dirs([args.out.as_path(), rank_out.as_path()])?;

    let shards = load_shards(&args.shards)?;
    for (s, p) in shards.iter().zip(&args.shards) {
        shards[0].roster().ensure_same(s.roster()).at(p)?;
    }
    let model = match &args.model {
        Some(p) => {
            let m = read_model(p).at(p)?;
            m.roster().ensure_same(shards[0].roster()).at(p)?;
            Some(m)
        }
        None => None,
    };
    let tasks = group(&shards)?;
    let scored: Vec<&(String, TaskSplits)> = match &args.holdout {
        Some(h) => {
            let t = tasks
                .iter()
                .find(|(t, _)| t == h)
                .ok_or_else(|| CliError::Usage(format!("--holdout: unknown task `{h}`")))?;
            if t.1.test.is_none() {
                return Err(CliError::Data(format!("--holdout: task `{h}` has no test shard")));
            }
            vec![t]
        }
        None => tasks.iter().filter(|(_, s)| s.test.is_some()).collect(),
    };
    if scored.is_empty() {
        return Err(CliError::Data("no test shards among the inputs".into()));
    }

    let mut metrics = MetricsReport::new();
    let mut fused_forecasts: Vec<Vec<Array2<f64>>> = Vec::new();
    for (task, splits) in &scored {
        let test = splits.test.expect("filtered");
        let truths: Vec<Array2<f64>> = test.samples().iter().map(|s| s.truth().clone()).collect();
        let mut fused = None;
        for &spec in &args.methods {
            let method = build_method(spec, task, splits, &tasks, model.as_ref(), args.forward_max)?;
            let preds = method.predict_shard(test)?;
            metrics.insert(task, &spec.to_string(), compute_metrics(&preds, &truths)?);
            if spec == MethodSpec::Fused {
                fused = Some(preds);
            }
        }
        if args.holdout.is_some() {
            let mut task_shards = Vec::new();
            for (t, s) in &tasks {
                match (s.train, s.test) {
                    (Some(train), Some(test)) => task_shards.push(TaskShards {
                        task_id: t.clone(),
                        train: train.clone(),
                        test: test.clone(),
                    }),
                    _ => {
                        return Err(CliError::Data(format!(
                            "--holdout needs a meta_train and a test shard for every task; `{t}` lacks one"
                        )))
                    }
                }
            }
            let r = zero_shot_protocol(&task_shards, task, &config)?;
            metrics.insert(task, "normal-fused", r.joint);
            metrics.insert(task, "zeroshot-fused", r.zero_shot);
            if fused.is_none() {
                fused = Some(Method::Fusor(r.joint_fusor.model.clone()).predict_shard(test)?);
            }
        }
        fused_forecasts.push(fused.unwrap_or_default());
    }

    let mut rank_rows = Vec::new();
    for ((task, splits), fused) in scored.iter().zip(&fused_forecasts) {
        let test = splits.test.expect("filtered").clone();
        let given = (!fused.is_empty()).then_some(fused.as_slice());
        rank_rows.push((task.clone(), rank_first_analysis(&[test], given)?));
    }
    if scored.len() > 1 {
        let tests: Vec<MetaShard> = scored.iter().map(|(_, s)| s.test.expect("filtered").clone()).collect();
        let all: Vec<Array2<f64>> = fused_forecasts.concat();
        let given = (all.len() == tests.iter().map(|s| s.len()).sum::<usize>()).then_some(all.as_slice());
        rank_rows.push(("all".into(), rank_first_analysis(&tests, given)?));
    }

    let board = leaderboard(&metrics)?;
    let ranks = rank_csv(&rank_rows)?;
    fs::write(&args.out, &board).at(&args.out)?;
    fs::write(&rank_out, ranks).at(&rank_out)?;
    ctx.say(board.trim_end());
    ctx.say(format!("leaderboard -> {}, rank-first -> {}", args.out.display(), rank_out.display()));

    if metrics.has_undefined_mape() {
        for task in metrics.tasks() {
            for m in metrics.methods() {
                if metrics.get(task, m).is_some_and(|c| c.mape.is_none()) {
                    eprintln!("warning: MAPE undefined for {task}/{m}: every truth value is within 1e-8 of zero");
                }
            }
        }
        return Ok(Status::Warnings);
    }
    Ok(Status::Clean)
}
