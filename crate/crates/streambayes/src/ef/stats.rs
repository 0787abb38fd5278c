//! Additive sufficient statistics extracted from (possibly weighted) data.

use crate::error::{Error, Result};

/// Sufficient statistics for one parameter block, gathered from data.
///
/// Statistics are additive: combining two batches is coordinate-wise
/// addition, which [`SufficientStatistics::merge`] implements. Weights come
/// from posterior responsibilities during variational learning and are 1 for
/// fully observed instances.
#[derive(Clone, Debug, PartialEq)]
pub enum SufficientStatistics {
    /// Soft counts per state of a discrete variable.
    Categorical { counts: Vec<f64> },
    /// Observations of a Gaussian mean under known precision:
    /// `sum_i w_i tau_i x_i` and `sum_i w_i tau_i`.
    GaussianKnownPrecision { weighted_sum: f64, weighted_precision: f64 },
    /// Weighted observations of a Gaussian with unknown mean and precision:
    /// `sum w`, `sum w x`, `sum w x^2`.
    GaussianObservations { weight: f64, sum: f64, sum_sq: f64 },
    /// Weighted observations of an exponential-rate variable: `sum w`,
    /// `sum w x`.
    ExponentialObservations { weight: f64, sum: f64 },
}

impl SufficientStatistics {
    /// Empty categorical counts over `k` states.
    pub fn zero_counts(k: usize) -> Self {
        SufficientStatistics::Categorical { counts: vec![0.0; k] }
    }

    /// Empty Gaussian observation statistics.
    pub fn zero_gaussian() -> Self {
        SufficientStatistics::GaussianObservations { weight: 0.0, sum: 0.0, sum_sq: 0.0 }
    }

    /// One weighted draw of a Gaussian observable.
    pub fn gaussian_observation(weight: f64, x: f64) -> Self {
        SufficientStatistics::GaussianObservations {
            weight,
            sum: weight * x,
            sum_sq: weight * x * x,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SufficientStatistics::Categorical { .. } => "categorical",
            SufficientStatistics::GaussianKnownPrecision { .. } => "gaussian-known-precision",
            SufficientStatistics::GaussianObservations { .. } => "gaussian-observations",
            SufficientStatistics::ExponentialObservations { .. } => "exponential-observations",
        }
    }

    /// Total weight of data absorbed into the statistics.
    pub fn count(&self) -> f64 {
        match self {
            SufficientStatistics::Categorical { counts } => counts.iter().sum(),
            SufficientStatistics::GaussianKnownPrecision { weighted_precision, .. } => {
                *weighted_precision
            }
            SufficientStatistics::GaussianObservations { weight, .. } => *weight,
            SufficientStatistics::ExponentialObservations { weight, .. } => *weight,
        }
    }

    /// Adds `other` into `self`; both must be the same kind and shape.
    pub fn merge(&mut self, other: &SufficientStatistics) -> Result<()> {
        match (self, other) {
            (
                SufficientStatistics::Categorical { counts },
                SufficientStatistics::Categorical { counts: more },
            ) => {
                if counts.len() != more.len() {
                    return Err(Error::Conjugacy(format!(
                        "count vectors of length {} and {}",
                        counts.len(),
                        more.len()
                    )));
                }
                for (a, b) in counts.iter_mut().zip(more) {
                    *a += b;
                }
                Ok(())
            }
            (
                SufficientStatistics::GaussianKnownPrecision { weighted_sum, weighted_precision },
                SufficientStatistics::GaussianKnownPrecision {
                    weighted_sum: s,
                    weighted_precision: p,
                },
            ) => {
                *weighted_sum += s;
                *weighted_precision += p;
                Ok(())
            }
            (
                SufficientStatistics::GaussianObservations { weight, sum, sum_sq },
                SufficientStatistics::GaussianObservations { weight: w, sum: s, sum_sq: s2 },
            ) => {
                *weight += w;
                *sum += s;
                *sum_sq += s2;
                Ok(())
            }
            (
                SufficientStatistics::ExponentialObservations { weight, sum },
                SufficientStatistics::ExponentialObservations { weight: w, sum: s },
            ) => {
                *weight += w;
                *sum += s;
                Ok(())
            }
            (a, b) => Err(Error::Conjugacy(format!(
                "cannot merge {} statistics into {}",
                b.kind(),
                a.kind()
            ))),
        }
    }

    /// Scales every coordinate, as stochastic-approximation updates require
    /// when a minibatch stands in for the full stream.
    pub fn scale(&mut self, factor: f64) {
        match self {
            SufficientStatistics::Categorical { counts } => {
                for c in counts {
                    *c *= factor;
                }
            }
            SufficientStatistics::GaussianKnownPrecision { weighted_sum, weighted_precision } => {
                *weighted_sum *= factor;
                *weighted_precision *= factor;
            }
            SufficientStatistics::GaussianObservations { weight, sum, sum_sq } => {
                *weight *= factor;
                *sum *= factor;
                *sum_sq *= factor;
            }
            SufficientStatistics::ExponentialObservations { weight, sum } => {
                *weight *= factor;
                *sum *= factor;
            }
        }
    }
}
