//! Posterior queries over a fixed network.
//!
//! Three engines with one result shape:
//!
//! * [`vmp_infer`] — deterministic mean-field coordinate ascent maximizing
//!   the evidence lower bound; exact when a single latent variable remains.
//! * [`importance_sampling_infer`] — weighted forward sampling; seeded,
//!   parallel, and bit-for-bit reproducible for any worker count.
//! * [`exact_infer`] — enumeration over discrete configurations with exact
//!   Gaussian conditioning per configuration; exponential in the number of
//!   latent finite variables, intended for small models and for checking
//!   the other two.

pub(crate) mod engine;
mod exact;
mod importance;

pub use exact::{exact_infer, ExactResult};
pub use importance::{importance_sampling_infer, ImportanceResult};

pub(crate) use engine::{EngineNet, ExpCpd, GaussExpect, View, Views, LN_2PI};

use crate::error::{Error, Result};
use crate::model::{Assignment, BayesianNetwork, VarId};
use std::fmt;

/// Posterior marginal of a single variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Marginal {
    /// State probabilities of a finite variable.
    Discrete(Vec<f64>),
    Gaussian { mean: f64, variance: f64 },
}

impl Marginal {
    pub fn probabilities(&self) -> Option<&[f64]> {
        match self {
            Marginal::Discrete(p) => Some(p),
            Marginal::Gaussian { .. } => None,
        }
    }

    pub fn mean_variance(&self) -> Option<(f64, f64)> {
        match self {
            Marginal::Gaussian { mean, variance } => Some((*mean, *variance)),
            Marginal::Discrete(_) => None,
        }
    }

    /// Most probable state of a finite marginal.
    pub fn map_state(&self) -> Option<usize> {
        self.probabilities().map(|p| {
            p.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
    }
}

/// Prints a real number keeping a trailing `.0` on integral values, so
/// means and variances always read as reals.
pub(crate) fn format_real(x: f64) -> String {
    if x.is_finite() && x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Discrete(p) => {
                let cells: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                write!(f, "[ {} ]", cells.join(", "))
            }
            Marginal::Gaussian { mean, variance } => {
                write!(f, "Normal [ mu = {}, var = {} ]", format_real(*mean), format_real(*variance))
            }
        }
    }
}

/// Marginals for the latent / unobserved variables of one query, indexed by
/// variable id; observed variables hold no entry.
#[derive(Clone, Debug, Default)]
pub struct Posterior {
    entries: Vec<Option<Marginal>>,
}

impl Posterior {
    pub fn empty(n_vars: usize) -> Posterior {
        Posterior { entries: vec![None; n_vars] }
    }

    pub fn marginal(&self, v: VarId) -> Option<&Marginal> {
        self.entries.get(v.index()).and_then(|m| m.as_ref())
    }

    pub fn set(&mut self, v: VarId, m: Marginal) {
        self.entries[v.index()] = Some(m);
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &Marginal)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_ref().map(|m| (VarId(i), m)))
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tuning knobs shared by the inference engines. `Default` gives the values
/// used throughout the examples.
#[derive(Clone, Debug)]
pub struct InferenceConfig {
    /// Upper bound on coordinate-ascent sweeps.
    pub max_iterations: usize,
    /// Relative change of the evidence lower bound that counts as converged.
    pub elbo_rel_tol: f64,
    /// Number of weighted samples drawn by the sampling engine.
    pub sample_count: usize,
    /// Seed for all stochastic engines; fixed seed means fixed output.
    pub seed: u64,
    /// Worker threads for parallel engines; `0` uses all available cores.
    /// Results do not depend on this value.
    pub worker_count: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            max_iterations: 200,
            elbo_rel_tol: 1e-8,
            sample_count: 10_000,
            seed: 0,
            worker_count: 0,
        }
    }
}

/// Outcome of a variational run.
#[derive(Clone, Debug)]
pub struct VmpResult {
    pub posterior: Posterior,
    /// Evidence lower bound after each sweep; non-decreasing up to floating-
    /// point noise, and a lower bound on the log evidence.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

impl VmpResult {
    /// Final evidence lower bound.
    pub fn elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("at least one sweep")
    }
}

/// Mean-field variational inference on a fixed network.
///
/// Returns marginals for every unobserved variable given the evidence. The
/// run is deterministic: no randomness enters the coordinate updates.
pub fn vmp_infer(
    net: &BayesianNetwork,
    evidence: &Assignment,
    cfg: &InferenceConfig,
) -> Result<VmpResult> {
    check_evidence(net, evidence)?;
    if cfg.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be at least 1".into()));
    }
    let engine = EngineNet::from_network(net);
    let outcome = engine.run(evidence, cfg.max_iterations, cfg.elbo_rel_tol)?;
    Ok(VmpResult {
        posterior: views_to_posterior(&outcome.views),
        elbo_trace: outcome.elbo_trace,
        converged: outcome.converged,
    })
}

pub(crate) fn views_to_posterior(views: &Views) -> Posterior {
    let mut post = Posterior::empty(views.views.len());
    for (i, view) in views.views.iter().enumerate() {
        if views.observed[i] {
            continue;
        }
        let marginal = match view {
            View::Probs(p) => Marginal::Discrete(p.clone()),
            View::Moments { m1, m2 } => {
                Marginal::Gaussian { mean: *m1, variance: (m2 - m1 * m1).max(0.0) }
            }
        };
        post.set(VarId(i), marginal);
    }
    post
}

pub(crate) fn check_evidence(net: &BayesianNetwork, evidence: &Assignment) -> Result<()> {
    if evidence.n_vars() != net.len() {
        return Err(Error::Schema(format!(
            "evidence covers {} variables, the model has {}",
            evidence.n_vars(),
            net.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Cpd, Dag, LinearGaussian, StateSpace, Value, VariableRegistry,
    };
    use approx::assert_relative_eq;

    /// X ~ N(0,1), Y | X ~ N(x, 1).
    fn gaussian_chain() -> BayesianNetwork {
        let mut reg = VariableRegistry::new();
        let x = reg.add_latent("X", StateSpace::real()).unwrap();
        let y = reg.add_observable("Y", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(x, y).unwrap();
        BayesianNetwork::new(
            dag,
            vec![
                Cpd::gaussian_root(0.0, 1.0),
                Cpd::gaussian(vec![LinearGaussian::new(0.0, vec![1.0], 1.0)]),
            ],
        )
        .unwrap()
    }

    /// A ~ (0.7, 0.3); P(B=1 | A=0) = 0.1, P(B=1 | A=1) = 0.8.
    fn discrete_chain() -> BayesianNetwork {
        let mut reg = VariableRegistry::new();
        let a = reg.add_latent("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let b = reg.add_observable("B", StateSpace::finite_states(2).unwrap()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, b).unwrap();
        BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.7, 0.3]),
                Cpd::multinomial(vec![vec![0.9, 0.1], vec![0.2, 0.8]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_gaussian_latent_is_exact_in_one_sweep() {
        let net = gaussian_chain();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("Y").unwrap(), Value::Real(1.0)).unwrap();
        let r = vmp_infer(&net, &e, &InferenceConfig::default()).unwrap();
        let x = net.var_by_name("X").unwrap().id();
        let (mean, var) = r.posterior.marginal(x).unwrap().mean_variance().unwrap();
        assert_relative_eq!(mean, 0.5, epsilon = 1e-9);
        assert_relative_eq!(var, 0.5, epsilon = 1e-9);
        // With one latent variable the final bound is the exact log
        // evidence: ln N(1; 0, 2).
        assert_relative_eq!(r.elbo(), -1.515_512_123_484_645_3, epsilon = 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn single_discrete_latent_matches_bayes_rule() {
        let net = discrete_chain();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("B").unwrap(), Value::Index(1)).unwrap();
        let r = vmp_infer(&net, &e, &InferenceConfig::default()).unwrap();
        let a = net.var_by_name("A").unwrap().id();
        let p = r.posterior.marginal(a).unwrap().probabilities().unwrap();
        assert_relative_eq!(p[1], 24.0 / 31.0, epsilon = 1e-9);
        assert_relative_eq!(p[0], 7.0 / 31.0, epsilon = 1e-9);
    }

    #[test]
    fn bound_is_monotone_with_many_latents() {
        // Latent class with two Gaussian children plus a latent child chain;
        // coordinate ascent is approximate here but must never decrease the
        // bound.
        let mut reg = VariableRegistry::new();
        let c = reg.add_latent("C", StateSpace::finite_states(3).unwrap()).unwrap();
        let u = reg.add_latent("U", StateSpace::real()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let y = reg.add_observable("Y", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(c, u).unwrap();
        dag.add_edge(u, x).unwrap();
        dag.add_edge(c, y).unwrap();
        let net = BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.5, 0.3, 0.2]),
                Cpd::gaussian(vec![
                    LinearGaussian::isolated(-2.0, 1.0),
                    LinearGaussian::isolated(0.0, 1.0),
                    LinearGaussian::isolated(2.0, 1.0),
                ]),
                Cpd::gaussian(vec![LinearGaussian::new(0.5, vec![1.5], 0.5)]),
                Cpd::gaussian(vec![
                    LinearGaussian::isolated(1.0, 2.0),
                    LinearGaussian::isolated(0.0, 2.0),
                    LinearGaussian::isolated(-1.0, 2.0),
                ]),
            ],
        )
        .unwrap();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("X").unwrap(), Value::Real(2.2)).unwrap();
        e.set(net.var_by_name("Y").unwrap(), Value::Real(0.3)).unwrap();
        let r = vmp_infer(&net, &e, &InferenceConfig::default()).unwrap();
        assert!(r.converged);
        for w in r.elbo_trace.windows(2) {
            let slack = 1e-9 * w[0].abs().max(1.0);
            assert!(w[1] >= w[0] - slack, "bound decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn impossible_evidence_is_a_numerical_error() {
        let mut reg = VariableRegistry::new();
        let a = reg.add_latent("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let b = reg.add_observable("B", StateSpace::finite_states(2).unwrap()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, b).unwrap();
        let net = BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![1.0, 0.0]),
                Cpd::multinomial(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
        )
        .unwrap();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("B").unwrap(), Value::Index(1)).unwrap();
        let err = vmp_infer(&net, &e, &InferenceConfig::default());
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    #[test]
    fn integral_reals_keep_a_decimal_point() {
        assert_eq!(format_real(2.0), "2.0");
        assert_eq!(format_real(-0.5), "-0.5");
        assert_eq!(format_real(0.0), "0.0");
        assert_eq!(format_real(1.25), "1.25");
    }

    #[test]
    fn marginal_rendering_matches_the_query_output_format() {
        let m = Marginal::Gaussian { mean: 2.0, variance: 0.5 };
        assert_eq!(m.to_string(), "Normal [ mu = 2.0, var = 0.5 ]");
        let d = Marginal::Discrete(vec![0.25, 0.75]);
        assert_eq!(d.to_string(), "[ 0.25, 0.75 ]");
        assert_eq!(d.map_state(), Some(1));
    }
}
