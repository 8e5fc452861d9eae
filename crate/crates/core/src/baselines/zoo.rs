//! Classical forecasters that stand in for a trained model zoo.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::meta_dataset::{PredictionTensor, Roster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZooMethod {
    /// Repeats the last observation.
    NaiveLast,
    /// Repeats the last full period.
    SeasonalNaive { period: usize },
    /// Repeats the mean of the trailing `width` observations.
    MovingAverage { width: usize },
    /// Least-squares AR(`order`) with intercept, rolled forward.
    ArP { order: usize },
}

impl fmt::Display for ZooMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZooMethod::NaiveLast => f.write_str("naive_last"),
            ZooMethod::SeasonalNaive { period } => write!(f, "seasonal_naive:{period}"),
            ZooMethod::MovingAverage { width } => write!(f, "moving_average:{width}"),
            ZooMethod::ArP { order } => write!(f, "ar_p:{order}"),
        }
    }
}

/// Parses `naive_last`, `seasonal_naive:P`, `moving_average:W`, `ar_p:O`.
impl FromStr for ZooMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownZooMethod(s.to_owned());
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.parse::<usize>().map_err(|_| unknown())?)),
            None => (s, None),
        };
        match (name, arg) {
            ("naive_last", None) => Ok(ZooMethod::NaiveLast),
            ("seasonal_naive", Some(period)) => Ok(ZooMethod::SeasonalNaive { period }),
            ("moving_average", Some(width)) => Ok(ZooMethod::MovingAverage { width }),
            ("ar_p", Some(order)) => Ok(ZooMethod::ArP { order }),
            _ => Err(unknown()),
        }
    }
}

impl ZooMethod {
    /// Checks the method's parameter against a history of `len` steps.
    pub fn validate(&self, len: usize) -> Result<()> {
        match *self {
            ZooMethod::NaiveLast if len == 0 => Err(Error::EmptyWindow),
            ZooMethod::SeasonalNaive { period } if period == 0 || period > len => {
                Err(Error::InvalidPeriod { period, len })
            }
            ZooMethod::MovingAverage { width } if width == 0 || width > len => {
                Err(Error::InvalidWidth { width, len })
            }
            // order + 1 coefficients need at least that many regression rows
            ZooMethod::ArP { order } if order == 0 || len < 2 * order + 1 => {
                Err(Error::InvalidOrder { order, len })
            }
            _ => Ok(()),
        }
    }
}

fn ar_forecast(x: ArrayView1<f64>, order: usize, t_out: usize) -> Vec<f64> {
    let n = x.len();
    let rows = n - order;
    let design = DMatrix::from_fn(rows, order + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            x[order + r - c]
        }
    });
    let target = DVector::from_fn(rows, |r, _| x[order + r]);
    let coef = design
        .svd(true, true)
        .solve(&target, 1e-12)
        .expect("both singular-vector sets requested");

    let mut history: Vec<f64> = x.iter().copied().collect();
    let mut out = Vec::with_capacity(t_out);
    for _ in 0..t_out {
        let t = history.len();
        let next = coef[0] + (1..=order).map(|i| coef[i] * history[t - i]).sum::<f64>();
        history.push(next);
        out.push(next);
    }
    out
}

/// Forecasts `t_out` steps of every column of `history` (steps × variables).
pub fn synthetic_zoo_forecast(history: ArrayView2<f64>, method: ZooMethod, t_out: usize) -> Result<Array2<f64>> {
    let (len, d) = history.dim();
    if len == 0 || d == 0 {
        return Err(Error::EmptyWindow);
    }
    method.validate(len)?;
    Ok(match method {
        ZooMethod::NaiveLast => Array2::from_shape_fn((t_out, d), |(_, j)| history[[len - 1, j]]),
        ZooMethod::SeasonalNaive { period } => {
            Array2::from_shape_fn((t_out, d), |(h, j)| history[[len - period + h % period, j]])
        }
        ZooMethod::MovingAverage { width } => {
            let tail = history.slice(ndarray::s![len - width.., ..]);
            let means = tail.mean_axis(ndarray::Axis(0)).expect("width ≥ 1");
            Array2::from_shape_fn((t_out, d), |(_, j)| means[j])
        }
        ZooMethod::ArP { order } => {
            let mut out = Array2::zeros((t_out, d));
            for j in 0..d {
                for (h, v) in ar_forecast(history.column(j), order, t_out).into_iter().enumerate() {
                    out[[h, j]] = v;
                }
            }
            out
        }
    })
}

/// Runs every method and stacks the forecasts under a roster named after them.
pub fn zoo_predictions(history: ArrayView2<f64>, methods: &[ZooMethod], t_out: usize) -> Result<PredictionTensor> {
    let roster = Roster::new(methods.iter().map(ToString::to_string))?;
    let slices = methods
        .iter()
        .map(|&m| synthetic_zoo_forecast(history, m, t_out))
        .collect::<Result<Vec<_>>>()?;
    PredictionTensor::from_slices(&slices, roster)
}
