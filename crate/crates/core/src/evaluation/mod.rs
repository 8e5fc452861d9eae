//! Forecast metrics, per-task reports, and the leaderboard table.

mod protocol;

use std::collections::HashMap;

use ndarray::Array2;

pub use protocol::{zero_shot_protocol, TaskShards, ZeroShotReport};

use crate::baselines::{mean_ensemble, median_ensemble, ZeroShotEnsemble};
use crate::error::{Error, Result};
use crate::fusor::{fuse, FusionWeights, FusorModel};
use crate::meta_dataset::{MetaSample, MetaShard};

/// Truth magnitudes at or below this are left out of MAPE.
pub const MAPE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    /// Percent; `None` when every truth element is within [`MAPE_EPSILON`] of 0.
    pub mape: Option<f64>,
    /// Elements that entered the MAPE average.
    pub mape_count: usize,
    pub n_elements: usize,
    pub sample_count: usize,
}

/// Global element means over all samples.
pub fn compute_metrics(predictions: &[Array2<f64>], truths: &[Array2<f64>]) -> Result<Metrics> {
    if predictions.len() != truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let (mut se, mut ae, mut ape) = (0.0, 0.0, 0.0);
    let (mut n, mut n_ape) = (0usize, 0usize);
    for (i, (p, t)) in predictions.iter().zip(truths).enumerate() {
        if p.dim() != t.dim() {
            return Err(Error::ShapeMismatch(format!(
                "sample {i}: prediction {:?} vs truth {:?}",
                p.dim(),
                t.dim()
            )));
        }
        for (&p, &t) in p.iter().zip(t.iter()) {
            let r = t - p;
            se += r * r;
            ae += r.abs();
            if t.abs() > MAPE_EPSILON {
                ape += r.abs() / t.abs();
                n_ape += 1;
            }
        }
        n += p.len();
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mse = se / n as f64;
    Ok(Metrics {
        mse,
        mae: ae / n as f64,
        rmse: mse.sqrt(),
        mape: (n_ape > 0).then(|| 100.0 * ape / n_ape as f64),
        mape_count: n_ape,
        n_elements: n,
        sample_count: predictions.len(),
    })
}

/// A way of turning one sample's zoo predictions into a forecast.
#[derive(Debug, Clone)]
pub enum Method {
    Fusor(FusorModel),
    /// Uniform average over the whole roster.
    Uniform,
    Mean(Vec<usize>),
    Median(Vec<usize>),
    /// One zoo member by roster index.
    Model(usize),
    /// Fixed weights, e.g. from forward selection.
    Weighted(FusionWeights),
    ZeroShot(ZeroShotEnsemble),
}

impl Method {
    pub fn predict(&self, sample: &MetaSample) -> Result<Array2<f64>> {
        let p = sample.predictions();
        match self {
            Method::Fusor(m) => Ok(m.fuse_sample(sample)?.1),
            Method::Uniform => fuse(&FusionWeights::uniform(p.k()), p),
            Method::Mean(subset) => mean_ensemble(p, subset),
            Method::Median(subset) => median_ensemble(p, subset),
            Method::Model(i) => {
                if *i >= p.k() {
                    return Err(Error::KOutOfRange { k_sel: *i, k: p.k() });
                }
                Ok(p.slice(*i).to_owned())
            }
            Method::Weighted(w) => fuse(w, p),
            Method::ZeroShot(z) => {
                z.roster().ensure_same(p.roster())?;
                fuse(&z.weights(sample.features()), p)
            }
        }
    }

    pub fn predict_shard(&self, shard: &MetaShard) -> Result<Vec<Array2<f64>>> {
        shard.samples().iter().map(|s| self.predict(s)).collect()
    }
}

pub fn evaluate(shard: &MetaShard, method: &Method) -> Result<Metrics> {
    let truths: Vec<Array2<f64>> = shard.samples().iter().map(|s| s.truth().clone()).collect();
    compute_metrics(&method.predict_shard(shard)?, &truths)
}

/// Metrics for each (task, method) pair, remembering insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    tasks: Vec<String>,
    methods: Vec<String>,
    cells: HashMap<(String, String), Metrics>,
}

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: &str, method: &str, metrics: Metrics) {
        if !self.tasks.iter().any(|t| t == task) {
            self.tasks.push(task.to_owned());
        }
        if !self.methods.iter().any(|m| m == method) {
            self.methods.push(method.to_owned());
        }
        self.cells.insert((task.to_owned(), method.to_owned()), metrics);
    }

    pub fn get(&self, task: &str, method: &str) -> Option<&Metrics> {
        self.cells.get(&(task.to_owned(), method.to_owned()))
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    /// True when some cell's MAPE is undefined.
    pub fn has_undefined_mape(&self) -> bool {
        self.cells.values().any(|m| m.mape.is_none())
    }
}

const METRIC_NAMES: [&str; 4] = ["mse", "mae", "rmse", "mape"];

fn metric(m: &Metrics, name: &str) -> Option<f64> {
    match name {
        "mse" => Some(m.mse),
        "mae" => Some(m.mae),
        "rmse" => Some(m.rmse),
        "mape" => m.mape,
        _ => unreachable!("unknown metric {name}"),
    }
}

/// CSV with one row per task and `<method>_<metric>` columns. Within a row
/// and metric, the lowest value is suffixed `**` and the runner-up `*`;
/// equal values keep method order. Missing values are empty cells.
pub fn leaderboard(report: &MetricsReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["task".to_string()];
    for metric_name in METRIC_NAMES {
        for method in &report.methods {
            header.push(format!("{method}_{metric_name}"));
        }
    }
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;

    for task in &report.tasks {
        let mut record = vec![task.clone()];
        for metric_name in METRIC_NAMES {
            let values: Vec<Option<f64>> = report
                .methods
                .iter()
                .map(|m| report.get(task, m).and_then(|c| metric(c, metric_name)))
                .collect();
            let mut ranked: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
            ranked.sort_by(|&a, &b| values[a].unwrap().total_cmp(&values[b].unwrap()));
            for (i, v) in values.iter().enumerate() {
                let mark = match ranked.iter().position(|&r| r == i) {
                    Some(0) => "**",
                    Some(1) => "*",
                    _ => "",
                };
                record.push(v.map_or(String::new(), |v| format!("{v:.6}{mark}")));
            }
        }
        w.write_record(&record).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8 fields"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&[array![[0.0, 0.0]]], &[array![[1.0, 1.0]]]).unwrap();
        assert_eq!((m.mse, m.mae, m.rmse, m.mape), (1.0, 1.0, 1.0, Some(100.0)));

        let t = array![[1.5, -2.0], [0.25, 3.0]];
        let m = compute_metrics(&[t.clone()], &[t]).unwrap();
        assert_eq!((m.mse, m.mae, m.rmse, m.mape), (0.0, 0.0, 0.0, Some(0.0)));

        let m = compute_metrics(&[array![[90.0]]], &[array![[100.0]]]).unwrap();
        assert_eq!(m.mape, Some(10.0));
    }

    #[test]
    fn mape_guard() {
        let m = compute_metrics(&[array![[1.0, 5.0]]], &[array![[0.0, 4.0]]]).unwrap();
        assert_eq!(m.mape_count, 1);
        assert_eq!(m.mape, Some(25.0));
        let m = compute_metrics(&[array![[1.0]]], &[array![[1e-9]]]).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.mape_count, 0);
    }

    #[test]
    fn metrics_are_global_element_means() {
        // a 1-element sample and a 3-element sample weigh by element count
        let m = compute_metrics(
            &[array![[2.0]], array![[0.0, 0.0, 0.0]]],
            &[array![[0.0]], array![[0.0, 0.0, 0.0]]],
        )
        .unwrap();
        assert_eq!(m.mse, 1.0);
        assert_eq!(m.sample_count, 2);
    }

    #[test]
    fn metric_shape_errors() {
        assert!(compute_metrics(&[array![[1.0]]], &[]).is_err());
        assert!(compute_metrics(&[array![[1.0]]], &[array![[1.0, 2.0]]]).is_err());
    }

    fn cell(mse: f64, mape: Option<f64>) -> Metrics {
        Metrics {
            mse,
            mae: mse,
            rmse: mse.sqrt(),
            mape,
            mape_count: 1,
            n_elements: 1,
            sample_count: 1,
        }
    }

    #[test]
    fn leaderboard_layout() {
        let mut r = MetricsReport::new();
        for (t, task) in ["etth1", "weather"].iter().enumerate() {
            for (m, method) in ["fused", "mean", "median"].iter().enumerate() {
                r.insert(task, method, cell(1.0 + m as f64 - t as f64 * 0.5 * m as f64, Some(3.0)));
            }
        }
        let csv = leaderboard(&r).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 1 + 3 * 4);
        assert!(lines[0].starts_with("task,fused_mse,mean_mse,median_mse,fused_mae"));
        assert!(lines[1].starts_with("etth1,1.000000**,2.000000*,3.000000,"));
        assert_eq!(leaderboard(&r).unwrap(), csv);
    }

    #[test]
    fn single_method_is_best_and_missing_mape_is_blank() {
        let mut r = MetricsReport::new();
        r.insert("a", "only", cell(0.5, None));
        let csv = leaderboard(&r).unwrap();
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "a,0.500000**,0.500000**,0.707107**,"
        );
        assert!(r.has_undefined_mape());
    }
}
