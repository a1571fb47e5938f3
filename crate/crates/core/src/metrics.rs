//! Performance metrics: accuracy, balanced accuracy, RMSE, range-normalized
//! RMSE and the coefficient of determination.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Target;
use crate::scalar::{range, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {truth} truth values, {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("empty input")]
    Empty,
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("reference target has zero range")]
    ZeroRange,
    #[error("target has zero variance")]
    ZeroVariance,
    #[error("R² needs at least two values")]
    TooFew,
    #[error("metric {metric} does not apply to {task} targets")]
    WrongTask { metric: Metric, task: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Acc,
    Ba,
    Rmse,
    Nrmse,
    R2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Metric {
    pub fn orientation(self) -> Orientation {
        match self {
            Metric::Acc | Metric::Ba | Metric::R2 => Orientation::HigherBetter,
            Metric::Rmse | Metric::Nrmse => Orientation::LowerBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Acc => "acc",
            Metric::Ba => "ba",
            Metric::Rmse => "rmse",
            Metric::Nrmse => "nrmse",
            Metric::R2 => "r2",
        }
    }

    /// Scores predictions against truth. `Nrmse` normalizes by the range of
    /// `truth`; use [`nrmse`] directly to normalize by another reference.
    pub fn evaluate<T: Scalar>(
        self,
        truth: &Target<T>,
        predicted: &Target<T>,
        class_count: usize,
    ) -> Result<MetricValue<T>, MetricError> {
        let value = match (self, truth, predicted) {
            (Metric::Acc, Target::Classes(y), Target::Classes(p)) => accuracy(y, p)?,
            (Metric::Ba, Target::Classes(y), Target::Classes(p)) => balanced_accuracy(y, p, class_count)?,
            (Metric::Rmse, Target::Values(y), Target::Values(p)) => rmse(y, p)?,
            (Metric::Nrmse, Target::Values(y), Target::Values(p)) => nrmse(rmse(y, p)?, y)?,
            (Metric::R2, Target::Values(y), Target::Values(p)) => r_squared(y, p)?,
            _ => {
                return Err(MetricError::WrongTask {
                    metric: self,
                    task: truth.task().to_string(),
                })
            }
        };
        Ok(MetricValue { metric: self, value })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "acc" => Ok(Metric::Acc),
            "ba" => Ok(Metric::Ba),
            "rmse" => Ok(Metric::Rmse),
            "nrmse" => Ok(Metric::Nrmse),
            "r2" => Ok(Metric::R2),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue<T> {
    pub metric: Metric,
    pub value: T,
}

impl<T> MetricValue<T> {
    pub fn orientation(&self) -> Orientation {
        self.metric.orientation()
    }
}

fn check_lengths(truth: usize, predicted: usize) -> Result<(), MetricError> {
    if truth != predicted {
        return Err(MetricError::LengthMismatch { truth, predicted });
    }
    if truth == 0 {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy<T: Scalar>(y: &[usize], yhat: &[usize]) -> Result<T, MetricError> {
    check_lengths(y.len(), yhat.len())?;
    let hits = y.iter().zip(yhat).filter(|(a, b)| a == b).count();
    Ok(T::of_usize(hits) / T::of_usize(y.len()))
}

/// Unweighted mean of per-class recall over the classes that occur in `y`.
pub fn balanced_accuracy<T: Scalar>(y: &[usize], yhat: &[usize], q: usize) -> Result<T, MetricError> {
    check_lengths(y.len(), yhat.len())?;
    let mut support = vec![0usize; q];
    let mut hits = vec![0usize; q];
    for (&a, &b) in y.iter().zip(yhat) {
        if a >= q {
            return Err(MetricError::LabelOutOfRange { label: a, classes: q });
        }
        support[a] += 1;
        if a == b {
            hits[a] += 1;
        }
    }
    let (sum, present) = support
        .iter()
        .zip(&hits)
        .filter(|(&s, _)| s > 0)
        .fold((T::zero(), 0usize), |(acc, k), (&s, &h)| {
            (acc + T::of_usize(h) / T::of_usize(s), k + 1)
        });
    Ok(sum / T::of_usize(present))
}

pub fn rmse<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T, MetricError> {
    check_lengths(y.len(), yhat.len())?;
    let sse: T = y.iter().zip(yhat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((sse / T::of_usize(y.len())).sqrt())
}

/// RMSE divided by the range of the reference target.
pub fn nrmse<T: Scalar>(rmse_value: T, y_reference: &[T]) -> Result<T, MetricError> {
    let (lo, hi) = range(y_reference).ok_or(MetricError::Empty)?;
    if hi <= lo {
        return Err(MetricError::ZeroRange);
    }
    Ok(rmse_value / (hi - lo))
}

/// `1 - SS_res / SS_tot` with `SS_tot` about the mean of `y`. Not clamped.
pub fn r_squared<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T, MetricError> {
    check_lengths(y.len(), yhat.len())?;
    if y.len() < 2 {
        return Err(MetricError::TooFew);
    }
    let mean = y.iter().copied().sum::<T>() / T::of_usize(y.len());
    let ss_tot: T = y.iter().map(|&a| (a - mean) * (a - mean)).sum();
    if ss_tot <= T::zero() {
        return Err(MetricError::ZeroVariance);
    }
    let ss_res: T = y.iter().zip(yhat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(T::one() - ss_res / ss_tot)
}
