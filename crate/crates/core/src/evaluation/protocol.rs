//! Leave-one-task-out evaluation of the fusor.

use super::{evaluate, Method, Metrics, MetricsReport};
use crate::baselines::{Criterion, ValidationScoreTable, ZeroShotEnsemble};
use crate::error::{Error, Result};
use crate::fusor::{train_fusor, TrainConfig, TrainedFusor};
use crate::meta_dataset::{build_joint_dataset, MetaShard};

/// Meta-training and test shards of one task.
#[derive(Debug, Clone)]
pub struct TaskShards {
    pub task_id: String,
    pub train: MetaShard,
    pub test: MetaShard,
}

#[derive(Debug, Clone)]
pub struct ZeroShotReport {
    pub held_out: String,
    /// Fusor trained on every task, held-out one included.
    pub joint: Metrics,
    /// Fusor trained without the held-out task.
    pub zero_shot: Metrics,
    pub uniform: Metrics,
    /// Similarity-weighted ensemble over the other tasks.
    pub similarity: Metrics,
    /// Zoo member with the lowest test MSE on the held-out task.
    pub best_model: String,
    pub best_individual: Metrics,
    pub joint_fusor: TrainedFusor,
    pub zero_shot_fusor: TrainedFusor,
}

impl ZeroShotReport {
    /// The report's rows as a one-task [`MetricsReport`].
    pub fn to_metrics_report(&self) -> MetricsReport {
        let mut r = MetricsReport::new();
        r.insert(&self.held_out, "joint", self.joint);
        r.insert(&self.held_out, "zero_shot", self.zero_shot);
        r.insert(&self.held_out, "uniform", self.uniform);
        r.insert(&self.held_out, "similarity", self.similarity);
        r.insert(&self.held_out, "best_individual", self.best_individual);
        r
    }
}

fn train(tasks: &[&TaskShards], config: &TrainConfig) -> Result<TrainedFusor> {
    let shards = tasks.iter().map(|t| t.train.clone()).collect();
    train_fusor(&build_joint_dataset(shards, config.seed)?, config)
}

/// Trains one fusor on all tasks and one without `held_out`, then scores
/// both on the held-out task's test shard next to static references.
pub fn zero_shot_protocol(tasks: &[TaskShards], held_out: &str, config: &TrainConfig) -> Result<ZeroShotReport> {
    if tasks.len() < 2 {
        return Err(Error::InsufficientTasks {
            needed: 2,
            got: tasks.len(),
        });
    }
    let target = tasks
        .iter()
        .find(|t| t.task_id == held_out)
        .ok_or_else(|| Error::UnknownTask(held_out.to_owned()))?;
    let all: Vec<&TaskShards> = tasks.iter().collect();
    let others: Vec<&TaskShards> = tasks.iter().filter(|t| t.task_id != held_out).collect();

    let joint_fusor = train(&all, config)?;
    let zero_shot_fusor = train(&others, config)?;
    let other_train: Vec<MetaShard> = others.iter().map(|t| t.train.clone()).collect();
    let similarity = ZeroShotEnsemble::fit(&other_train)?;
    let scores = ValidationScoreTable::from_shard(&target.test, Criterion::Mse)?;
    let best = scores.best();

    let test = &target.test;
    Ok(ZeroShotReport {
        held_out: held_out.to_owned(),
        joint: evaluate(test, &Method::Fusor(joint_fusor.model.clone()))?,
        zero_shot: evaluate(test, &Method::Fusor(zero_shot_fusor.model.clone()))?,
        uniform: evaluate(test, &Method::Uniform)?,
        similarity: evaluate(test, &Method::ZeroShot(similarity))?,
        best_model: scores.roster()[best].clone(),
        best_individual: evaluate(test, &Method::Model(best))?,
        joint_fusor,
        zero_shot_fusor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_dataset::tests::shard;

    fn task(id: &str) -> TaskShards {
        TaskShards {
            task_id: id.into(),
            train: shard(id, 12),
            test: shard(id, 5),
        }
    }

    #[test]
    fn preconditions() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            zero_shot_protocol(&[task("a")], "a", &cfg),
            Err(Error::InsufficientTasks { needed: 2, got: 1 })
        ));
        assert!(matches!(
            zero_shot_protocol(&[task("a"), task("b")], "c", &cfg),
            Err(Error::UnknownTask(t)) if t == "c"
        ));
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = TrainConfig {
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let tasks = [task("a"), task("b"), task("c")];
        let r1 = zero_shot_protocol(&tasks, "b", &cfg).unwrap();
        let r2 = zero_shot_protocol(&tasks, "b", &cfg).unwrap();
        assert_eq!(r1.joint, r2.joint);
        assert_eq!(r1.zero_shot, r2.zero_shot);
        assert_eq!(r1.joint_fusor.model, r2.joint_fusor.model);
        assert_eq!(r1.to_metrics_report().methods().len(), 5);
    }
}
