//! Exponential-family distributions, natural parameters, and conjugate
//! updates.
//!
//! Five families cover every parameter block in a CLG network:
//!
//! | family        | role                                            |
//! |---------------|-------------------------------------------------|
//! | `Multinomial` | discrete variables / mixture weights            |
//! | `Dirichlet`   | conjugate prior over probability rows           |
//! | `Gaussian`    | continuous variables and regression coefficients|
//! | `Gamma`       | precision marginal of a `NormalGamma`           |
//! | `NormalGamma` | joint prior over a Gaussian (mean, precision)   |
//!
//! Conventions: Dirichlet natural parameters are `alpha - 1`; the Gaussian
//! natural vector is `(mean/variance, -1/(2 variance))`; `NormalGamma` is
//! parameterized by `(mean, scale, shape, rate)` against the statistics
//! `(tau*m, tau*m^2, tau, ln tau)`. A conjugate posterior update is
//! *addition* in natural coordinates, which is what makes batch learning
//! order-insensitive for fully observed data.

use crate::error::{Error, Result};
use crate::math::{digamma, ln_gamma};

mod stats;

pub use stats::SufficientStatistics;

/// Family tag for [`EfDistribution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Multinomial,
    Dirichlet,
    Gaussian,
    Gamma,
    NormalGamma,
}

/// Categorical distribution on `k` states.
#[derive(Clone, Debug, PartialEq)]
pub struct Multinomial {
    pub probs: Vec<f64>,
}

/// Dirichlet with positive concentrations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    pub alphas: Vec<f64>,
}

/// Univariate Gaussian in mean/variance form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

/// Gamma in shape/rate form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gamma {
    pub shape: f64,
    pub rate: f64,
}

/// Normal-Gamma prior over a Gaussian's (mean, precision):
/// `tau ~ Gamma(shape, rate)`, `m | tau ~ Normal(mean, 1/(scale*tau))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalGamma {
    pub mean: f64,
    pub scale: f64,
    pub shape: f64,
    pub rate: f64,
}

impl NormalGamma {
    /// Default prior used when no override is given.
    pub fn standard() -> Self {
        NormalGamma { mean: 0.0, scale: 1.0, shape: 1.0, rate: 1.0 }
    }

    /// Posterior expectation of the precision `tau`.
    pub fn expected_precision(&self) -> f64 {
        self.shape / self.rate
    }

    /// Posterior expectation of `ln tau`.
    pub fn expected_log_precision(&self) -> f64 {
        digamma(self.shape) - self.rate.ln()
    }

    /// Posterior mean of the variance `1/tau`, defined only for shape > 1.
    pub fn variance_mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.rate / (self.shape - 1.0))
    }
}

impl Gaussian {
    pub fn standard() -> Self {
        Gaussian { mean: 0.0, variance: 1.0 }
    }
}

/// A distribution in one of the five supported exponential families.
#[derive(Clone, Debug, PartialEq)]
pub enum EfDistribution {
    Multinomial(Multinomial),
    Dirichlet(Dirichlet),
    Gaussian(Gaussian),
    Gamma(Gamma),
    NormalGamma(NormalGamma),
}

impl EfDistribution {
    pub fn multinomial(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("multinomial needs at least one state".into()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("probabilities must be a simplex (sum {sum})")));
        }
        Ok(EfDistribution::Multinomial(Multinomial {
            probs: probs.iter().map(|p| p / sum).collect(),
        }))
    }

    pub fn dirichlet(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::Domain("dirichlet needs >= 2 concentrations".into()));
        }
        if alphas.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::Domain("dirichlet concentrations must be positive".into()));
        }
        Ok(EfDistribution::Dirichlet(Dirichlet { alphas }))
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::Domain(format!("invalid Gaussian ({mean}, {variance})")));
        }
        Ok(EfDistribution::Gaussian(Gaussian { mean, variance }))
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::Domain(format!("invalid Gamma ({shape}, {rate})")));
        }
        Ok(EfDistribution::Gamma(Gamma { shape, rate }))
    }

    pub fn normal_gamma(mean: f64, scale: f64, shape: f64, rate: f64) -> Result<Self> {
        if !mean.is_finite() || !(scale > 0.0) || !(shape > 0.0) || !(rate > 0.0) {
            return Err(Error::Domain(format!(
                "invalid NormalGamma ({mean}, {scale}, {shape}, {rate})"
            )));
        }
        Ok(EfDistribution::NormalGamma(NormalGamma { mean, scale, shape, rate }))
    }

    pub fn family(&self) -> Family {
        match self {
            EfDistribution::Multinomial(_) => Family::Multinomial,
            EfDistribution::Dirichlet(_) => Family::Dirichlet,
            EfDistribution::Gaussian(_) => Family::Gaussian,
            EfDistribution::Gamma(_) => Family::Gamma,
            EfDistribution::NormalGamma(_) => Family::NormalGamma,
        }
    }

    /// Natural parameter vector. For multinomials the canonical choice
    /// `ln p_i` is used, so natural and moment forms are mutually inverse.
    pub fn natural(&self) -> Vec<f64> {
        match self {
            EfDistribution::Multinomial(m) => m.probs.iter().map(|p| p.ln()).collect(),
            EfDistribution::Dirichlet(d) => d.alphas.iter().map(|a| a - 1.0).collect(),
            EfDistribution::Gaussian(g) => {
                vec![g.mean / g.variance, -0.5 / g.variance]
            }
            EfDistribution::Gamma(g) => vec![g.shape - 1.0, -g.rate],
            EfDistribution::NormalGamma(ng) => vec![
                ng.scale * ng.mean,
                -0.5 * ng.scale,
                -(ng.rate + 0.5 * ng.scale * ng.mean * ng.mean),
                ng.shape - 0.5,
            ],
        }
    }

    /// Inverse of [`EfDistribution::natural`]. Rejects vectors outside the
    /// family's domain (e.g. a non-negative second Gaussian coordinate).
    pub fn from_natural(family: Family, eta: &[f64]) -> Result<Self> {
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain("non-finite natural parameter".into()));
        }
        match family {
            Family::Multinomial => {
                let z = crate::math::log_sum_exp(eta);
                if !z.is_finite() {
                    return Err(Error::Domain("degenerate multinomial naturals".into()));
                }
                EfDistribution::multinomial(eta.iter().map(|e| (e - z).exp()).collect())
            }
            Family::Dirichlet => {
                expect_len(eta, 2, usize::MAX, "Dirichlet")?;
                EfDistribution::dirichlet(eta.iter().map(|e| e + 1.0).collect())
            }
            Family::Gaussian => {
                expect_len(eta, 2, 2, "Gaussian")?;
                if !(eta[1] < 0.0) {
                    return Err(Error::Domain(format!(
                        "Gaussian natural[1] must be negative, got {}",
                        eta[1]
                    )));
                }
                let variance = -0.5 / eta[1];
                EfDistribution::gaussian(eta[0] * variance, variance)
            }
            Family::Gamma => {
                expect_len(eta, 2, 2, "Gamma")?;
                EfDistribution::gamma(eta[0] + 1.0, -eta[1])
            }
            Family::NormalGamma => {
                expect_len(eta, 4, 4, "NormalGamma")?;
                if !(eta[1] < 0.0) {
                    return Err(Error::Domain("NormalGamma scale coordinate must be negative".into()));
                }
                let scale = -2.0 * eta[1];
                let mean = eta[0] / scale;
                let shape = eta[3] + 0.5;
                let rate = -eta[2] - 0.5 * scale * mean * mean;
                EfDistribution::normal_gamma(mean, scale, shape, rate)
            }
        }
    }

    /// Log-partition function `A(eta)`; its gradient is
    /// [`EfDistribution::expected_sufficient_statistics`].
    pub fn log_normalizer(&self) -> f64 {
        match self {
            // Canonical naturals satisfy sum(exp eta) = 1.
            EfDistribution::Multinomial(m) => {
                m.probs.iter().map(|p| *p).sum::<f64>().ln()
            }
            EfDistribution::Dirichlet(d) => {
                let total: f64 = d.alphas.iter().sum();
                d.alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(total)
            }
            EfDistribution::Gaussian(g) => {
                0.5 * g.mean * g.mean / g.variance + 0.5 * g.variance.ln()
            }
            EfDistribution::Gamma(g) => ln_gamma(g.shape) - g.shape * g.rate.ln(),
            EfDistribution::NormalGamma(ng) => {
                ln_gamma(ng.shape) - ng.shape * ng.rate.ln() - 0.5 * ng.scale.ln()
                    + 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    /// Expected sufficient statistics `E[t(x)]` under the distribution.
    ///
    /// `Dirichlet(2, 2)` yields `E[ln p_i] = psi(2) - psi(4) = -5/6`.
    pub fn expected_sufficient_statistics(&self) -> Vec<f64> {
        match self {
            EfDistribution::Multinomial(m) => m.probs.clone(),
            EfDistribution::Dirichlet(d) => {
                let total: f64 = d.alphas.iter().sum();
                let dt = digamma(total);
                d.alphas.iter().map(|&a| digamma(a) - dt).collect()
            }
            EfDistribution::Gaussian(g) => {
                vec![g.mean, g.mean * g.mean + g.variance]
            }
            EfDistribution::Gamma(g) => {
                vec![digamma(g.shape) - g.rate.ln(), g.shape / g.rate]
            }
            EfDistribution::NormalGamma(ng) => {
                let e_tau = ng.expected_precision();
                vec![
                    e_tau * ng.mean,
                    1.0 / ng.scale + e_tau * ng.mean * ng.mean,
                    e_tau,
                    ng.expected_log_precision(),
                ]
            }
        }
    }

    /// Kullback-Leibler divergence `KL(self || other)` between two members
    /// of the same family, via the natural-parameter identity
    /// `KL = <eta_q - eta_p, E_q[t]> - A(q) + A(p)`.
    pub fn kl_divergence(&self, other: &EfDistribution) -> Result<f64> {
        if self.family() != other.family() {
            return Err(Error::Domain(format!(
                "KL between different families ({:?} vs {:?})",
                self.family(),
                other.family()
            )));
        }
        if let (EfDistribution::Multinomial(a), EfDistribution::Multinomial(b)) = (self, other) {
            if a.probs.len() != b.probs.len() {
                return Err(Error::Domain("state-count mismatch".into()));
            }
            // Direct form tolerates zero probabilities in q.
            let mut kl = 0.0;
            for (&q, &p) in a.probs.iter().zip(&b.probs) {
                if q > 0.0 {
                    kl += q * (q.ln() - p.ln());
                }
            }
            return Ok(kl.max(0.0));
        }
        let eq = self.natural();
        let ep = other.natural();
        if eq.len() != ep.len() {
            return Err(Error::Domain("dimension mismatch".into()));
        }
        let moments = self.expected_sufficient_statistics();
        let dot: f64 = eq
            .iter()
            .zip(&ep)
            .zip(&moments)
            .map(|((q, p), m)| (q - p) * m)
            .sum();
        Ok((dot - self.log_normalizer() + other.log_normalizer()).max(0.0))
    }

    /// Conjugate Bayesian update: adds the statistics to the natural
    /// parameters (folding the count into the normalizer coordinates) and
    /// returns the posterior. Zero statistics return the prior unchanged.
    pub fn posterior_update(&self, stats: &SufficientStatistics) -> Result<Self> {
        match (self, stats) {
            (EfDistribution::Dirichlet(d), SufficientStatistics::Categorical { counts }) => {
                if counts.len() != d.alphas.len() {
                    return Err(Error::Conjugacy(format!(
                        "{} counts for {} Dirichlet cells",
                        counts.len(),
                        d.alphas.len()
                    )));
                }
                if counts.iter().any(|c| *c < 0.0 || !c.is_finite()) {
                    return Err(Error::Conjugacy("counts must be non-negative".into()));
                }
                EfDistribution::dirichlet(
                    d.alphas.iter().zip(counts).map(|(a, c)| a + c).collect(),
                )
            }
            (
                EfDistribution::Gaussian(_),
                SufficientStatistics::GaussianKnownPrecision { weighted_sum, weighted_precision },
            ) => {
                let mut eta = self.natural();
                eta[0] += weighted_sum;
                eta[1] += -0.5 * weighted_precision;
                EfDistribution::from_natural(Family::Gaussian, &eta)
            }
            (
                EfDistribution::NormalGamma(_),
                SufficientStatistics::GaussianObservations { weight, sum, sum_sq },
            ) => {
                if *weight < 0.0 {
                    return Err(Error::Conjugacy("negative observation weight".into()));
                }
                let mut eta = self.natural();
                eta[0] += sum;
                eta[1] += -0.5 * weight;
                eta[2] += -0.5 * sum_sq;
                eta[3] += 0.5 * weight;
                EfDistribution::from_natural(Family::NormalGamma, &eta)
            }
            (
                EfDistribution::Gamma(g),
                SufficientStatistics::ExponentialObservations { weight, sum },
            ) => EfDistribution::gamma(g.shape + weight, g.rate + sum),
            _ => Err(Error::Conjugacy(format!(
                "{:?} prior cannot absorb {} statistics",
                self.family(),
                stats.kind()
            ))),
        }
    }

    pub fn as_dirichlet(&self) -> Option<&Dirichlet> {
        match self {
            EfDistribution::Dirichlet(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&Gaussian> {
        match self {
            EfDistribution::Gaussian(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_normal_gamma(&self) -> Option<&NormalGamma> {
        match self {
            EfDistribution::NormalGamma(ng) => Some(ng),
            _ => None,
        }
    }
}

fn expect_len(eta: &[f64], min: usize, max: usize, family: &str) -> Result<()> {
    if eta.len() < min || eta.len() > max {
        return Err(Error::Domain(format!(
            "{family} natural vector has dimension {}",
            eta.len()
        )));
    }
    Ok(())
}
