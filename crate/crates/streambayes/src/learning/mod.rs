//! Bayesian parameter learning from streams of batches.
//!
//! Each learnable conditional distribution gets a conjugate prior block:
//! one Dirichlet per probability-table row, and per Gaussian configuration
//! a Normal-Gamma over (intercept, precision) plus an independent Gaussian
//! per linear coefficient. Learning maintains the corresponding posterior
//! blocks and absorbs data one batch at a time:
//!
//! 1. freeze the current parameter expectations,
//! 2. infer a per-instance posterior over that instance's unobserved
//!    variables (a no-op for complete rows),
//! 3. accumulate expected sufficient statistics across the batch,
//! 4. add them to the posterior in natural coordinates.
//!
//! Because step 4 is addition, fully observed conjugate problems give the
//! same posterior no matter how the stream is cut into batches, and batch
//! statistics can be computed on parallel workers and merged. A
//! stochastic-approximation variant ([`Learner::svi_step`]) instead blends
//! the natural parameters toward a rescaled-minibatch target with a
//! decaying step size.

mod io;
mod learner;

pub use io::{learner_from_json, learner_to_json};
pub use learner::{Learner, UpdateSummary};
pub(crate) use io::{block_to_doc, doc_to_block, BlockDoc};
pub(crate) use learner::{absorbed, accumulate, block_point_cpd, zero_stats};

use crate::ef::{Dirichlet, EfDistribution, Gaussian, NormalGamma};
use crate::error::{Error, Result};
use crate::inference::{ExpCpd, GaussExpect};
use crate::math::digamma;
use crate::model::{Cpd, Dag, StructureIndex, VarId, VariableRegistry};

/// Prior or posterior state of one variable's parameter block.
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    /// One Dirichlet per discrete-parent configuration row.
    Dirichlet(Vec<Dirichlet>),
    /// One Gaussian block per discrete-parent configuration.
    Gaussian(Vec<GaussianBlock>),
    /// A frozen distribution that learning never touches.
    Fixed(Cpd),
}

/// Conjugate state for one Gaussian configuration: a Normal-Gamma over the
/// (intercept, precision) pair and an independent Gaussian per linear
/// coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBlock {
    pub base: NormalGamma,
    pub coeffs: Vec<Gaussian>,
}

impl GaussianBlock {
    /// Standard reference prior: NG(0, 1, 1, 1) with N(0, 1) coefficients.
    pub fn standard(n_coeffs: usize) -> GaussianBlock {
        GaussianBlock {
            base: NormalGamma::standard(),
            coeffs: vec![Gaussian::standard(); n_coeffs],
        }
    }
}

/// The structure to learn plus the prior for every parameter block.
///
/// Defaults to flat Dirichlet rows and standard Gaussian blocks; priors can
/// be replaced per variable and blocks can be frozen to a fixed
/// distribution.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    dag: Dag,
    structure: StructureIndex,
    blocks: Vec<Block>,
}

impl ModelSpec {
    /// A spec with default priors for every variable of the DAG.
    pub fn new(dag: Dag) -> Result<ModelSpec> {
        let structure = StructureIndex::build(&dag)?;
        if dag.is_empty() {
            return Err(Error::EmptyModel);
        }
        let mut blocks = Vec::with_capacity(dag.len());
        for v in dag.registry().ids() {
            let n_cfg = structure.config_count(v);
            let block = match dag.var(v).space().cardinality() {
                Some(card) => Block::Dirichlet(vec![
                    Dirichlet { alphas: vec![1.0; card] };
                    n_cfg
                ]),
                None => {
                    let n_coeffs = structure.cont_parents[v.index()].len();
                    Block::Gaussian(vec![GaussianBlock::standard(n_coeffs); n_cfg])
                }
            };
            blocks.push(block);
        }
        Ok(ModelSpec { dag, structure, blocks })
    }

    pub fn registry(&self) -> &VariableRegistry {
        self.dag.registry()
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub(crate) fn structure(&self) -> &StructureIndex {
        &self.structure
    }

    pub fn block(&self, v: VarId) -> &Block {
        &self.blocks[v.index()]
    }

    pub(crate) fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Replaces the Dirichlet prior rows of a finite variable.
    pub fn set_dirichlet_prior(&mut self, v: VarId, rows: Vec<Dirichlet>) -> Result<&mut Self> {
        let var = self.dag.var(v);
        let card = var.space().cardinality().ok_or_else(|| Error::TypeMismatch(format!(
            "`{}` is not a finite variable",
            var.name()
        )))?;
        if rows.len() != self.structure.config_count(v) {
            return Err(Error::InvalidParameter(format!(
                "{} prior rows for {} configurations of `{}`",
                rows.len(),
                self.structure.config_count(v),
                var.name()
            )));
        }
        for r in &rows {
            if r.alphas.len() != card || r.alphas.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "bad Dirichlet prior for `{}`",
                    var.name()
                )));
            }
        }
        self.blocks[v.index()] = Block::Dirichlet(rows);
        Ok(self)
    }

    /// Replaces the Gaussian prior blocks of a real variable.
    pub fn set_gaussian_prior(&mut self, v: VarId, configs: Vec<GaussianBlock>) -> Result<&mut Self> {
        let var = self.dag.var(v);
        if var.space().is_finite() {
            return Err(Error::TypeMismatch(format!("`{}` is not a real variable", var.name())));
        }
        let n_coeffs = self.structure.cont_parents[v.index()].len();
        if configs.len() != self.structure.config_count(v)
            || configs.iter().any(|c| c.coeffs.len() != n_coeffs)
        {
            return Err(Error::InvalidParameter(format!(
                "prior blocks for `{}` do not match its structure",
                var.name()
            )));
        }
        for c in &configs {
            if !(c.base.scale > 0.0 && c.base.shape > 0.0 && c.base.rate > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "bad Normal-Gamma prior for `{}`",
                    var.name()
                )));
            }
            if c.coeffs.iter().any(|g| !(g.variance > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "bad coefficient prior for `{}`",
                    var.name()
                )));
            }
        }
        self.blocks[v.index()] = Block::Gaussian(configs);
        Ok(self)
    }

    /// Freezes one variable's distribution; learning will leave it as-is.
    pub fn fix(&mut self, v: VarId, cpd: Cpd) -> Result<&mut Self> {
        // Validate shape by assembling a throwaway network around it? Too
        // strict: check row/config counts and parent arity directly.
        let var = self.dag.var(v);
        let n_cfg = self.structure.config_count(v);
        match (&cpd, var.space().cardinality()) {
            (Cpd::Multinomial(m), Some(card)) => {
                if m.rows().len() != n_cfg || m.rows().iter().any(|r| r.len() != card) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed table for `{}` has the wrong shape",
                        var.name()
                    )));
                }
            }
            (Cpd::Gaussian(g), None) => {
                let n_coeffs = self.structure.cont_parents[v.index()].len();
                if g.configs().len() != n_cfg
                    || g.configs().iter().any(|lg| lg.coeffs.len() != n_coeffs)
                {
                    return Err(Error::InvalidParameter(format!(
                        "fixed Gaussian for `{}` has the wrong shape",
                        var.name()
                    )));
                }
                g.validate(var.name(), self.structure.cont_parents[v.index()].len())?;
            }
            _ => {
                return Err(Error::TypeMismatch(format!(
                    "fixed distribution kind does not match `{}`",
                    var.name()
                )))
            }
        }
        self.blocks[v.index()] = Block::Fixed(cpd);
        Ok(self)
    }
}

/// Inner fixed-point and step-size settings for a [`Learner`].
#[derive(Clone, Debug)]
pub struct LearnerConfig {
    /// Sweeps per instance when a row has unobserved variables.
    pub max_iterations: usize,
    /// Convergence threshold for the per-instance bound.
    pub elbo_rel_tol: f64,
    /// Forgetting exponent `kappa` of the stochastic schedule
    /// `rho_t = (t + delay)^-kappa`.
    pub svi_forgetting: f64,
    /// Delay `tau` of the stochastic schedule; with the default `1.0` the
    /// first step has `rho = 1`.
    pub svi_delay: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            max_iterations: 100,
            elbo_rel_tol: 1e-8,
            svi_forgetting: 0.75,
            svi_delay: 1.0,
        }
    }
}

/// Expected-parameter form of one block, as the inference engine needs it.
pub(crate) fn block_expectations(block: &Block) -> ExpCpd {
    match block {
        Block::Fixed(cpd) => ExpCpd::from_cpd(cpd),
        Block::Dirichlet(rows) => ExpCpd::Discrete {
            e_log: rows
                .iter()
                .map(|d| {
                    EfDistribution::Dirichlet(d.clone()).expected_sufficient_statistics()
                })
                .collect(),
        },
        Block::Gaussian(configs) => ExpCpd::Gaussian {
            configs: configs
                .iter()
                .map(|c| {
                    let ng = &c.base;
                    let e_tau = ng.shape / ng.rate;
                    GaussExpect {
                        e_tau,
                        e_log_tau: digamma(ng.shape) - ng.rate.ln(),
                        e_tau_alpha: e_tau * ng.mean,
                        e_tau_alpha2: e_tau * ng.mean * ng.mean + 1.0 / ng.scale,
                        e_beta: c.coeffs.iter().map(|g| g.mean).collect(),
                        e_beta2: c.coeffs.iter().map(|g| g.mean * g.mean + g.variance).collect(),
                    }
                })
                .collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;
    use approx::assert_relative_eq;

    fn two_var_dag() -> Dag {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, x).unwrap();
        dag
    }

    #[test]
    fn default_priors_are_flat_and_standard() {
        let spec = ModelSpec::new(two_var_dag()).unwrap();
        let a = spec.registry().by_name("A").unwrap().id();
        let x = spec.registry().by_name("X").unwrap().id();
        match spec.block(a) {
            Block::Dirichlet(rows) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].alphas, vec![1.0, 1.0]);
            }
            other => panic!("unexpected block {other:?}"),
        }
        match spec.block(x) {
            Block::Gaussian(configs) => {
                assert_eq!(configs.len(), 2);
                assert_eq!(configs[0].base, NormalGamma::standard());
                assert!(configs[0].coeffs.is_empty());
            }
            other => panic!("unexpected block {other:?}"),
        }
    }

    #[test]
    fn prior_overrides_are_shape_checked() {
        let mut spec = ModelSpec::new(two_var_dag()).unwrap();
        let a = spec.registry().by_name("A").unwrap().id();
        let x = spec.registry().by_name("X").unwrap().id();
        assert!(spec
            .set_dirichlet_prior(a, vec![Dirichlet { alphas: vec![2.0, 3.0] }])
            .is_ok());
        assert!(spec
            .set_dirichlet_prior(a, vec![Dirichlet { alphas: vec![1.0] }])
            .is_err());
        assert!(spec.set_dirichlet_prior(x, vec![]).is_err());
        assert!(spec
            .set_gaussian_prior(x, vec![GaussianBlock::standard(0); 2])
            .is_ok());
        assert!(spec
            .set_gaussian_prior(x, vec![GaussianBlock::standard(1); 2])
            .is_err());
    }

    #[test]
    fn expected_values_match_closed_forms() {
        let block = Block::Dirichlet(vec![Dirichlet { alphas: vec![2.0, 2.0] }]);
        match block_expectations(&block) {
            ExpCpd::Discrete { e_log } => {
                assert_relative_eq!(e_log[0][0], -5.0 / 6.0, epsilon = 1e-12);
            }
            _ => unreachable!(),
        }
        let block = Block::Gaussian(vec![GaussianBlock {
            base: NormalGamma { mean: 2.0, scale: 4.0, shape: 3.0, rate: 6.0 },
            coeffs: vec![Gaussian { mean: 1.5, variance: 0.25 }],
        }]);
        match block_expectations(&block) {
            ExpCpd::Gaussian { configs } => {
                let g = &configs[0];
                assert_relative_eq!(g.e_tau, 0.5, epsilon = 1e-12);
                assert_relative_eq!(g.e_tau_alpha, 1.0, epsilon = 1e-12);
                assert_relative_eq!(g.e_tau_alpha2, 2.0 + 0.25, epsilon = 1e-12);
                assert_relative_eq!(g.e_beta2[0], 2.5, epsilon = 1e-12);
            }
            _ => unreachable!(),
        }
    }
}
