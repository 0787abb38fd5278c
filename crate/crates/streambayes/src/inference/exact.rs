//! Exact inference by discrete enumeration with Gaussian conditioning.
//!
//! For every joint configuration of the latent finite variables the
//! continuous part of a CLG network is one multivariate Gaussian, built by
//! forward propagation and conditioned on the observed reals one variable
//! at a time. Summing configurations then yields exact marginals and the
//! exact evidence. Cost is exponential in the number of latent finite
//! variables, so the configuration count is capped.

use crate::error::{Error, Result};
use crate::model::config::config_unrank;
use crate::model::{Assignment, BayesianNetwork, Cpd, Value, VarId};

use super::{Marginal, Posterior, LN_2PI};

/// Largest admissible number of latent finite configurations.
const MAX_CONFIGS: usize = 1_000_000;

/// Exact marginals plus the log evidence of the observations.
#[derive(Clone, Debug)]
pub struct ExactResult {
    pub posterior: Posterior,
    pub log_evidence: f64,
}

/// Exact posterior marginals of all unobserved variables.
pub fn exact_infer(net: &BayesianNetwork, evidence: &Assignment) -> Result<ExactResult> {
    super::check_evidence(net, evidence)?;
    let n = net.len();

    // Latent finite variables to enumerate.
    let mut latent_disc: Vec<VarId> = Vec::new();
    let mut cards: Vec<usize> = Vec::new();
    // Continuous variables in topological order with dense indices.
    let mut cont_order: Vec<VarId> = Vec::new();
    let mut cont_idx: Vec<Option<usize>> = vec![None; n];
    for &v in net.topological_order() {
        match net.var(v).space().cardinality() {
            Some(card) => {
                if evidence.get(v).is_none() {
                    latent_disc.push(v);
                    cards.push(card);
                }
            }
            None => {
                cont_idx[v.index()] = Some(cont_order.len());
                cont_order.push(v);
            }
        }
    }
    let total: usize = cards.iter().try_fold(1usize, |acc, &c| {
        acc.checked_mul(c).filter(|t| *t <= MAX_CONFIGS)
    })
    .ok_or_else(|| {
        Error::TooLarge(format!(
            "enumeration over latent finite variables exceeds {MAX_CONFIGS} configurations"
        ))
    })?;

    let observed_cont: Vec<(usize, f64)> = cont_order
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| match evidence.get(v) {
            Some(Value::Real(x)) => Some((i, x)),
            _ => None,
        })
        .collect();

    let eval = |config: usize| -> Result<ConfigOutcome> {
        let states = config_unrank(&cards, config);
        let mut disc_state: Vec<Option<usize>> = vec![None; n];
        for (v, s) in latent_disc.iter().zip(&states) {
            disc_state[v.index()] = Some(*s);
        }
        for i in 0..n {
            if let Some(Value::Index(s)) = evidence.get(VarId(i)) {
                disc_state[i] = Some(s);
            }
        }
        let mut log_w = 0.0;
        for i in 0..n {
            let v = VarId(i);
            if let Some(s) = disc_state[i] {
                let row_idx = parent_config_from(net, v, &disc_state);
                let p = match net.cpd(v) {
                    Cpd::Multinomial(m) => m.row(row_idx)[s],
                    Cpd::Gaussian(_) => unreachable!("finite variable with Gaussian"),
                };
                if p <= 0.0 {
                    return Ok(ConfigOutcome::impossible(states));
                }
                log_w += p.ln();
            }
        }

        // Joint Gaussian over the continuous layer for this configuration.
        let nc = cont_order.len();
        let mut mean = vec![0.0; nc];
        let mut cov = vec![vec![0.0; nc]; nc];
        for (i, &v) in cont_order.iter().enumerate() {
            let row_idx = parent_config_from(net, v, &disc_state);
            let lg = match net.cpd(v) {
                Cpd::Gaussian(g) => g.config(row_idx),
                Cpd::Multinomial(_) => unreachable!("real variable with a table"),
            };
            let parents: Vec<usize> = net
                .structure()
                .cont_parents[v.index()]
                .iter()
                .map(|p| cont_idx[p.index()].expect("continuous parent precedes child"))
                .collect();
            mean[i] = lg.intercept
                + lg.coeffs.iter().zip(&parents).map(|(b, &p)| b * mean[p]).sum::<f64>();
            // Both triangles are kept filled, so parent covariances are
            // always available by plain indexing.
            for j in 0..i {
                cov[i][j] = lg
                    .coeffs
                    .iter()
                    .zip(&parents)
                    .map(|(b, &p)| b * cov[p][j])
                    .sum();
                cov[j][i] = cov[i][j];
            }
            let mut var = lg.variance;
            for (a, &pa) in lg.coeffs.iter().zip(&parents) {
                for (b, &pb) in lg.coeffs.iter().zip(&parents) {
                    var += a * b * cov[pa][pb];
                }
            }
            cov[i][i] = var;
        }

        // Condition on each observed real value in turn.
        for &(j, x) in &observed_cont {
            let vjj = cov[j][j];
            if !(vjj > 0.0) {
                return Err(Error::Numerical(
                    "zero variance while conditioning on an observation".into(),
                ));
            }
            let d = x - mean[j];
            log_w += -0.5 * (LN_2PI + vjj.ln()) - 0.5 * d * d / vjj;
            let col: Vec<f64> = (0..nc).map(|i| cov[i][j]).collect();
            for i in 0..nc {
                mean[i] += col[i] * d / vjj;
                for k in 0..nc {
                    cov[i][k] -= col[i] * col[k] / vjj;
                }
            }
        }
        Ok(ConfigOutcome { log_w, states, mean, var: (0..nc).map(|i| cov[i][i]).collect() })
    };

    // Pass one: the largest log weight anchors the scaling.
    let mut max_lw = f64::NEG_INFINITY;
    for config in 0..total {
        max_lw = max_lw.max(eval(config)?.log_w);
    }
    if !max_lw.is_finite() {
        return Err(Error::DegenerateEvidence);
    }

    // Pass two: accumulate relative weights.
    let mut z = 0.0;
    let mut disc_acc: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut cont_m1 = vec![0.0; cont_order.len()];
    let mut cont_m2 = vec![0.0; cont_order.len()];
    for config in 0..total {
        let out = eval(config)?;
        let w = (out.log_w - max_lw).exp();
        if w <= 0.0 {
            continue;
        }
        z += w;
        for (acc, &s) in disc_acc.iter_mut().zip(&out.states) {
            acc[s] += w;
        }
        for i in 0..cont_order.len() {
            cont_m1[i] += w * out.mean[i];
            cont_m2[i] += w * (out.var[i] + out.mean[i] * out.mean[i]);
        }
    }

    let mut posterior = Posterior::empty(n);
    for (v, acc) in latent_disc.iter().zip(disc_acc) {
        posterior.set(*v, Marginal::Discrete(acc.iter().map(|c| c / z).collect()));
    }
    for (i, &v) in cont_order.iter().enumerate() {
        if evidence.get(v).is_some() {
            continue;
        }
        let mean = cont_m1[i] / z;
        let variance = (cont_m2[i] / z - mean * mean).max(0.0);
        posterior.set(v, Marginal::Gaussian { mean, variance });
    }
    Ok(ExactResult { posterior, log_evidence: max_lw + z.ln() })
}

struct ConfigOutcome {
    log_w: f64,
    states: Vec<usize>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl ConfigOutcome {
    fn impossible(states: Vec<usize>) -> ConfigOutcome {
        ConfigOutcome { log_w: f64::NEG_INFINITY, states, mean: Vec::new(), var: Vec::new() }
    }
}

/// Discrete-parent configuration index of `v` given per-variable states.
fn parent_config_from(net: &BayesianNetwork, v: VarId, disc_state: &[Option<usize>]) -> usize {
    let dp = &net.structure().disc_parents[v.index()];
    let cards = &net.structure().disc_cards[v.index()];
    let values: Vec<usize> = dp
        .iter()
        .map(|p| disc_state[p.index()].expect("discrete parent assigned"))
        .collect();
    crate::model::config::config_index(cards, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cpd, Dag, LinearGaussian, StateSpace, VariableRegistry};
    use approx::assert_relative_eq;

    /// Two-state mixture over a Gaussian observation.
    fn mixture() -> BayesianNetwork {
        let mut reg = VariableRegistry::new();
        let c = reg.add_latent("C", StateSpace::finite_states(2).unwrap()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(c, x).unwrap();
        BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.6, 0.4]),
                Cpd::gaussian(vec![
                    LinearGaussian::isolated(-1.0, 1.0),
                    LinearGaussian::isolated(2.0, 1.0),
                ]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn mixture_posterior_matches_bayes_rule() {
        let net = mixture();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("X").unwrap(), Value::Real(1.0)).unwrap();
        let r = exact_infer(&net, &e).unwrap();
        // Hand computation: w0 = 0.6 N(1; -1, 1), w1 = 0.4 N(1; 2, 1).
        let n0 = (-0.5 * (LN_2PI + 4.0)).exp();
        let n1 = (-0.5 * (LN_2PI + 1.0)).exp();
        let p1 = 0.4 * n1 / (0.6 * n0 + 0.4 * n1);
        let c = net.var_by_name("C").unwrap().id();
        let p = r.posterior.marginal(c).unwrap().probabilities().unwrap();
        assert_relative_eq!(p[1], p1, epsilon = 1e-12);
        assert_relative_eq!(
            r.log_evidence,
            (0.6 * n0 + 0.4 * n1).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_chain_matches_conjugate_update() {
        // X ~ N(0,1), Y | X ~ N(x, 1), observe Y = 1: X | Y ~ N(0.5, 0.5).
        let mut reg = VariableRegistry::new();
        let x = reg.add_latent("X", StateSpace::real()).unwrap();
        let y = reg.add_observable("Y", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(x, y).unwrap();
        let net = BayesianNetwork::new(
            dag,
            vec![
                Cpd::gaussian_root(0.0, 1.0),
                Cpd::gaussian(vec![LinearGaussian::new(0.0, vec![1.0], 1.0)]),
            ],
        )
        .unwrap();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("Y").unwrap(), Value::Real(1.0)).unwrap();
        let r = exact_infer(&net, &e).unwrap();
        let (mean, var) = r.posterior.marginal(x).unwrap().mean_variance().unwrap();
        assert_relative_eq!(mean, 0.5, epsilon = 1e-12);
        assert_relative_eq!(var, 0.5, epsilon = 1e-12);
        assert_relative_eq!(r.log_evidence, -1.515_512_123_484_645_3, epsilon = 1e-12);
    }

    #[test]
    fn discrete_network_marginals_sum_correctly() {
        // Collider A -> C <- B with C observed.
        let mut reg = VariableRegistry::new();
        let a = reg.add_latent("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let b = reg.add_latent("B", StateSpace::finite_states(2).unwrap()).unwrap();
        let c = reg.add_observable("Cc", StateSpace::finite_states(2).unwrap()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, c).unwrap();
        dag.add_edge(b, c).unwrap();
        let net = BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.5, 0.5]),
                Cpd::multinomial_root(vec![0.8, 0.2]),
                // rows in row-major order over (A, B)
                Cpd::multinomial(vec![
                    vec![0.9, 0.1],
                    vec![0.5, 0.5],
                    vec![0.3, 0.7],
                    vec![0.1, 0.9],
                ]),
            ],
        )
        .unwrap();
        let mut e = Assignment::new(net.len());
        e.set(net.var_by_name("Cc").unwrap(), Value::Index(1)).unwrap();
        let r = exact_infer(&net, &e).unwrap();
        // P(A=1, C=1) = 0.5*(0.8*0.7 + 0.2*0.9) = 0.37;
        // P(A=0, C=1) = 0.5*(0.8*0.1 + 0.2*0.5) = 0.09.
        let pa = r.posterior.marginal(a).unwrap().probabilities().unwrap();
        assert_relative_eq!(pa[1], 0.37 / 0.46, epsilon = 1e-12);
        let pb = r.posterior.marginal(b).unwrap().probabilities().unwrap();
        // P(B=1, C=1) = 0.2*(0.5*0.5 + 0.5*0.9) = 0.14.
        assert_relative_eq!(pb[1], 0.14 / 0.46, epsilon = 1e-12);
        assert_relative_eq!(r.log_evidence, 0.46f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn impossible_evidence_is_degenerate() {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let dag = Dag::new(reg);
        let net =
            BayesianNetwork::new(dag, vec![Cpd::multinomial_root(vec![1.0, 0.0])]).unwrap();
        let mut e = Assignment::new(net.len());
        e.set(net.var(a), Value::Index(1)).unwrap();
        assert!(matches!(exact_infer(&net, &e), Err(Error::DegenerateEvidence)));
    }
}
