//! Conditional probability distributions for CLG networks.

use crate::error::{Error, Result};

/// Tolerance for accepting a probability row before renormalization.
pub(crate) const ROW_SUM_SLACK: f64 = 1e-9;

/// Distribution kind, determined by the child's state space together with
/// the state spaces of its parents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpdKind {
    /// Finite child, no parents.
    Multinomial,
    /// Finite child, finite parents.
    MultinomialMultinomial,
    /// Real child, no parents.
    Normal,
    /// Real child, only real parents.
    NormalNormal,
    /// Real child, only finite parents.
    NormalMultinomial,
    /// Real child, finite and real parents.
    NormalMultinomialNormal,
}

impl CpdKind {
    /// Kind implied by a child space and its parent spaces.
    pub(crate) fn derive(child_finite: bool, has_disc: bool, has_cont: bool) -> CpdKind {
        match (child_finite, has_disc, has_cont) {
            (true, false, _) => CpdKind::Multinomial,
            (true, true, _) => CpdKind::MultinomialMultinomial,
            (false, false, false) => CpdKind::Normal,
            (false, false, true) => CpdKind::NormalNormal,
            (false, true, false) => CpdKind::NormalMultinomial,
            (false, true, true) => CpdKind::NormalMultinomialNormal,
        }
    }

    /// Display tag, also used in the serialized model format.
    pub fn tag(&self) -> &'static str {
        match self {
            CpdKind::Multinomial => "Multinomial",
            CpdKind::MultinomialMultinomial => "Multinomial|Multinomial",
            CpdKind::Normal => "Normal",
            CpdKind::NormalNormal => "Normal|Normal",
            CpdKind::NormalMultinomial => "Normal|Multinomial",
            CpdKind::NormalMultinomialNormal => "Normal|MultinomialNormal",
        }
    }

    pub(crate) fn from_tag(tag: &str) -> Option<CpdKind> {
        Some(match tag {
            "Multinomial" => CpdKind::Multinomial,
            "Multinomial|Multinomial" => CpdKind::MultinomialMultinomial,
            "Normal" => CpdKind::Normal,
            "Normal|Normal" => CpdKind::NormalNormal,
            "Normal|Multinomial" => CpdKind::NormalMultinomial,
            "Normal|MultinomialNormal" => CpdKind::NormalMultinomialNormal,
            _ => return None,
        })
    }
}

/// Probability table for a finite-state child: one simplex row per joint
/// discrete-parent configuration (a single row for a root).
#[derive(Clone, Debug, PartialEq)]
pub struct MultinomialCpd {
    rows: Vec<Vec<f64>>,
}

impl MultinomialCpd {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        MultinomialCpd { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.rows[config]
    }

    /// Checks non-negativity and row sums, renormalizing rows whose sum is
    /// within `1e-9` of one. Called during network validation.
    pub(crate) fn normalize(&mut self, variable: &str, cardinality: usize) -> Result<()> {
        for row in &mut self.rows {
            if row.len() != cardinality {
                return Err(Error::Validation {
                    variable: variable.to_string(),
                    rule: format!("probability row has {} entries, expected {}", row.len(), cardinality),
                });
            }
            let mut sum = 0.0;
            for &p in row.iter() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::Validation {
                        variable: variable.to_string(),
                        rule: format!("probability entry {p} is negative or non-finite"),
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_SLACK {
                return Err(Error::Validation {
                    variable: variable.to_string(),
                    rule: format!("probability row sums to {sum}, expected 1"),
                });
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
        Ok(())
    }
}

/// Conditional Gaussian parameters for one discrete-parent configuration:
/// `child ~ Normal(intercept + coeffs . x_continuous, variance)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussian {
    pub intercept: f64,
    pub coeffs: Vec<f64>,
    pub variance: f64,
}

impl LinearGaussian {
    pub fn new(intercept: f64, coeffs: Vec<f64>, variance: f64) -> Self {
        LinearGaussian { intercept, coeffs, variance }
    }

    /// Root or switch-only Gaussian: no continuous parents.
    pub fn isolated(mean: f64, variance: f64) -> Self {
        LinearGaussian { intercept: mean, coeffs: Vec::new(), variance }
    }

    /// Conditional mean given the continuous-parent values.
    pub fn mean(&self, x_continuous: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(x_continuous).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Log density of `z` given the continuous-parent values.
    ///
    /// At the mean of a unit-variance Gaussian this is `-0.918938...`
    /// (`-ln sqrt(2 pi)`).
    pub fn log_density(&self, z: f64, x_continuous: &[f64]) -> Result<f64> {
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Gaussian variance must be positive and finite, got {}",
                self.variance
            )));
        }
        let d = z - self.mean(x_continuous);
        Ok(-0.5 * (2.0 * std::f64::consts::PI * self.variance).ln() - d * d / (2.0 * self.variance))
    }
}

/// Switched linear-Gaussian distribution for a real child: one
/// [`LinearGaussian`] per joint discrete-parent configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianCpd {
    configs: Vec<LinearGaussian>,
}

impl GaussianCpd {
    pub fn new(configs: Vec<LinearGaussian>) -> Self {
        GaussianCpd { configs }
    }

    pub fn configs(&self) -> &[LinearGaussian] {
        &self.configs
    }

    pub fn config(&self, idx: usize) -> &LinearGaussian {
        &self.configs[idx]
    }

    /// Log density of `z` under the configuration selected by the discrete
    /// parents, evaluated at the continuous-parent values.
    pub fn log_density(&self, z: f64, config: usize, x_continuous: &[f64]) -> Result<f64> {
        self.configs[config].log_density(z, x_continuous)
    }

    pub(crate) fn validate(&self, variable: &str, n_cont_parents: usize) -> Result<()> {
        for lg in &self.configs {
            if lg.coeffs.len() != n_cont_parents {
                return Err(Error::Validation {
                    variable: variable.to_string(),
                    rule: format!(
                        "{} regression coefficients, expected {}",
                        lg.coeffs.len(),
                        n_cont_parents
                    ),
                });
            }
            if !(lg.variance > 0.0) || !lg.variance.is_finite() {
                return Err(Error::Validation {
                    variable: variable.to_string(),
                    rule: format!("variance {} is not strictly positive", lg.variance),
                });
            }
            if !lg.intercept.is_finite() || lg.coeffs.iter().any(|b| !b.is_finite()) {
                return Err(Error::Validation {
                    variable: variable.to_string(),
                    rule: "non-finite Gaussian parameter".into(),
                });
            }
        }
        Ok(())
    }
}

/// Conditional distribution of one variable given its parents.
#[derive(Clone, Debug, PartialEq)]
pub enum Cpd {
    Multinomial(MultinomialCpd),
    Gaussian(GaussianCpd),
}

impl Cpd {
    /// Probability table from rows (one per discrete-parent configuration).
    pub fn multinomial(rows: Vec<Vec<f64>>) -> Cpd {
        Cpd::Multinomial(MultinomialCpd::new(rows))
    }

    /// Single-row table for a finite root variable.
    pub fn multinomial_root(probs: Vec<f64>) -> Cpd {
        Cpd::multinomial(vec![probs])
    }

    /// Switched linear Gaussian from per-configuration parameters.
    pub fn gaussian(configs: Vec<LinearGaussian>) -> Cpd {
        Cpd::Gaussian(GaussianCpd::new(configs))
    }

    /// Unconditional Gaussian for a real root variable.
    pub fn gaussian_root(mean: f64, variance: f64) -> Cpd {
        Cpd::gaussian(vec![LinearGaussian::isolated(mean, variance)])
    }

    pub fn as_multinomial(&self) -> Option<&MultinomialCpd> {
        match self {
            Cpd::Multinomial(m) => Some(m),
            Cpd::Gaussian(_) => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianCpd> {
        match self {
            Cpd::Gaussian(g) => Some(g),
            Cpd::Multinomial(_) => None,
        }
    }

    /// Number of discrete-parent configurations covered by this CPD.
    pub fn config_count(&self) -> usize {
        match self {
            Cpd::Multinomial(m) => m.rows().len(),
            Cpd::Gaussian(g) => g.configs().len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_density_at_mean_of_standard_normal() {
        let lg = LinearGaussian::isolated(0.0, 1.0);
        assert_relative_eq!(lg.log_density(0.0, &[]).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-9);
    }

    #[test]
    fn log_density_uses_variance_not_standard_deviation() {
        // N(1, var = 4) at z = 3: -0.5 ln(8 pi) - 4/8
        let lg = LinearGaussian::isolated(1.0, 4.0);
        let expect = -0.5 * (8.0 * std::f64::consts::PI).ln() - 0.5;
        assert_relative_eq!(lg.log_density(3.0, &[]).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn linear_mean_combines_parents() {
        let lg = LinearGaussian::new(1.0, vec![2.0, -1.0], 1.0);
        assert_relative_eq!(lg.mean(&[3.0, 4.0]), 1.0 + 6.0 - 4.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_is_rejected() {
        let lg = LinearGaussian::isolated(0.0, 0.0);
        assert!(matches!(lg.log_density(0.0, &[]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn row_normalization_accepts_tiny_slack_and_rejects_bad_rows() {
        let mut ok = MultinomialCpd::new(vec![vec![0.5, 0.5 + 5e-10]]);
        ok.normalize("V", 2).unwrap();
        let s: f64 = ok.row(0).iter().sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);

        let mut bad = MultinomialCpd::new(vec![vec![0.5, 0.6]]);
        assert!(bad.normalize("V", 2).is_err());
        let mut neg = MultinomialCpd::new(vec![vec![-0.1, 1.1]]);
        assert!(neg.normalize("V", 2).is_err());
    }
}
