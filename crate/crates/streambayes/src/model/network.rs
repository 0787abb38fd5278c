//! Validated Bayesian network: DAG + conditional distributions.

use crate::error::{Error, Result};
use crate::model::assignment::{Assignment, Value};
use crate::model::config::{config_count, config_index};
use crate::model::cpd::{Cpd, CpdKind};
use crate::model::dag::Dag;
use crate::model::variable::{VarId, Variable, VariableRegistry};

/// Structural facts derived once at validation time and reused by every
/// downstream computation: topological order, child lists, and the split of
/// each parent set into its discrete and continuous parts.
#[derive(Clone, Debug)]
pub(crate) struct StructureIndex {
    pub topo: Vec<VarId>,
    pub children: Vec<Vec<VarId>>,
    /// Discrete parents of each variable, in parent-list order.
    pub disc_parents: Vec<Vec<VarId>>,
    /// Continuous parents of each variable, in parent-list order.
    pub cont_parents: Vec<Vec<VarId>>,
    /// Cardinalities of `disc_parents`, aligned with it.
    pub disc_cards: Vec<Vec<usize>>,
}

impl StructureIndex {
    /// Builds the index, enforcing acyclicity and the CLG restriction
    /// (finite-state children admit only finite-state parents).
    pub fn build(dag: &Dag) -> Result<StructureIndex> {
        let topo = dag.topological_order()?;
        let n = dag.len();
        let mut children = vec![Vec::new(); n];
        let mut disc_parents = vec![Vec::new(); n];
        let mut cont_parents = vec![Vec::new(); n];
        let mut disc_cards = vec![Vec::new(); n];
        for child in dag.registry().ids() {
            let child_var = dag.var(child);
            for &p in dag.parents(child) {
                children[p.index()].push(child);
                let pv = dag.var(p);
                match pv.space().cardinality() {
                    Some(card) => {
                        disc_parents[child.index()].push(p);
                        disc_cards[child.index()].push(card);
                    }
                    None => {
                        if child_var.space().is_finite() {
                            return Err(Error::Validation {
                                variable: child_var.name().to_string(),
                                rule: format!(
                                    "finite-state variable has continuous parent `{}`",
                                    pv.name()
                                ),
                            });
                        }
                        cont_parents[child.index()].push(p);
                    }
                }
            }
        }
        Ok(StructureIndex { topo, children, disc_parents, cont_parents, disc_cards })
    }

    pub fn config_count(&self, v: VarId) -> usize {
        config_count(&self.disc_cards[v.index()])
    }
}

/// An immutable, validated conditional linear Gaussian network.
///
/// Construction checks every structural and parametric rule; all query
/// methods can then assume a consistent model. Probability rows whose sum is
/// within `1e-9` of one are renormalized during construction.
#[derive(Clone, Debug)]
pub struct BayesianNetwork {
    dag: Dag,
    cpds: Vec<Cpd>,
    index: StructureIndex,
}

impl BayesianNetwork {
    /// Validates and assembles a network. `cpds` are indexed by variable id.
    pub fn new(dag: Dag, mut cpds: Vec<Cpd>) -> Result<Self> {
        if dag.is_empty() {
            return Err(Error::EmptyModel);
        }
        if cpds.len() != dag.len() {
            return Err(Error::Validation {
                variable: String::new(),
                rule: format!("{} distributions for {} variables", cpds.len(), dag.len()),
            });
        }
        let index = StructureIndex::build(&dag)?;
        for v in dag.registry().ids() {
            let var = dag.var(v);
            let expected_configs = index.config_count(v);
            match (&mut cpds[v.index()], var.space().cardinality()) {
                (Cpd::Multinomial(m), Some(card)) => {
                    if m.rows().len() != expected_configs {
                        return Err(Error::Validation {
                            variable: var.name().to_string(),
                            rule: format!(
                                "{} probability rows, expected {expected_configs}",
                                m.rows().len()
                            ),
                        });
                    }
                    m.normalize(var.name(), card)?;
                }
                (Cpd::Gaussian(g), None) => {
                    if g.configs().len() != expected_configs {
                        return Err(Error::Validation {
                            variable: var.name().to_string(),
                            rule: format!(
                                "{} Gaussian configurations, expected {expected_configs}",
                                g.configs().len()
                            ),
                        });
                    }
                    g.validate(var.name(), index.cont_parents[v.index()].len())?;
                }
                (Cpd::Multinomial(_), None) => {
                    return Err(Error::Validation {
                        variable: var.name().to_string(),
                        rule: "real variable paired with a probability table".into(),
                    })
                }
                (Cpd::Gaussian(_), Some(_)) => {
                    return Err(Error::Validation {
                        variable: var.name().to_string(),
                        rule: "finite-state variable paired with a Gaussian".into(),
                    })
                }
            }
        }
        Ok(BayesianNetwork { dag, cpds, index })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn registry(&self) -> &VariableRegistry {
        self.dag.registry()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        self.dag.var(id)
    }

    pub fn var_by_name(&self, name: &str) -> Result<&Variable> {
        self.registry().by_name(name)
    }

    pub fn len(&self) -> usize {
        self.dag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dag.is_empty()
    }

    pub fn cpd(&self, id: VarId) -> &Cpd {
        &self.cpds[id.index()]
    }

    pub fn cpds(&self) -> &[Cpd] {
        &self.cpds
    }

    /// Distribution kind of a variable, derived from parent spaces.
    pub fn kind(&self, id: VarId) -> CpdKind {
        CpdKind::derive(
            self.var(id).space().is_finite(),
            !self.index.disc_parents[id.index()].is_empty(),
            !self.index.cont_parents[id.index()].is_empty(),
        )
    }

    /// Topological order cached at validation.
    pub fn topological_order(&self) -> &[VarId] {
        &self.index.topo
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        self.dag.parents(id)
    }

    pub fn children(&self, id: VarId) -> &[VarId] {
        &self.index.children[id.index()]
    }

    pub(crate) fn structure(&self) -> &StructureIndex {
        &self.index
    }

    /// Row-major discrete-parent configuration index of `child` under a
    /// complete-enough assignment.
    pub(crate) fn parent_config(&self, child: VarId, a: &Assignment) -> Result<usize> {
        let dp = &self.index.disc_parents[child.index()];
        let mut values = Vec::with_capacity(dp.len());
        for &p in dp {
            match a.require(self.var(p))? {
                Value::Index(i) => values.push(i),
                Value::Real(_) => unreachable!("discrete parent holds a real value"),
            }
        }
        Ok(config_index(&self.index.disc_cards[child.index()], &values))
    }

    /// Values of the continuous parents of `child` under the assignment.
    pub(crate) fn cont_parent_values(&self, child: VarId, a: &Assignment) -> Result<Vec<f64>> {
        self.index.cont_parents[child.index()]
            .iter()
            .map(|&p| match a.require(self.var(p))? {
                Value::Real(x) => Ok(x),
                Value::Index(_) => unreachable!("continuous parent holds an index"),
            })
            .collect()
    }

    /// Log of the joint probability (density) of a complete assignment:
    /// the sum of each variable's conditional log probability given its
    /// parents. Finite and real factors mix freely.
    pub fn log_probability(&self, a: &Assignment) -> Result<f64> {
        let mut total = 0.0;
        for v in self.registry().ids() {
            let var = self.var(v);
            let cfg = self.parent_config(v, a)?;
            match (self.cpd(v), a.require(var)?) {
                (Cpd::Multinomial(m), Value::Index(i)) => {
                    total += m.row(cfg)[i].ln();
                }
                (Cpd::Gaussian(g), Value::Real(z)) => {
                    let x = self.cont_parent_values(v, a)?;
                    total += g.log_density(z, cfg, &x)?;
                }
                // new() guarantees space/CPD agreement; set() guarantees
                // value/space agreement.
                _ => unreachable!("value kind disagrees with validated CPD"),
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cpd::LinearGaussian;
    use crate::model::variable::{StateSpace, VariableRegistry};
    use approx::assert_relative_eq;

    /// D ~ (0.4, 0.6); Z | D=0 ~ N(1, 2), Z | D=1 ~ N(-1, 0.5).
    fn mixed_net() -> BayesianNetwork {
        let mut reg = VariableRegistry::new();
        let d = reg.add_observable("D", StateSpace::finite_states(2).unwrap()).unwrap();
        let z = reg.add_observable("Z", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(d, z).unwrap();
        BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.4, 0.6]),
                Cpd::gaussian(vec![
                    LinearGaussian::isolated(1.0, 2.0),
                    LinearGaussian::isolated(-1.0, 0.5),
                ]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn log_probability_sums_discrete_and_gaussian_factors() {
        let net = mixed_net();
        let d = net.var_by_name("D").unwrap().id();
        let z = net.var_by_name("Z").unwrap().id();
        let mut a = Assignment::new(net.len());
        a.set(net.var(d), Value::Index(1)).unwrap();
        a.set(net.var(z), Value::Real(0.5)).unwrap();
        // ln 0.6 + ln N(0.5; -1, var 0.5)
        let expect = 0.6f64.ln() - 0.5 * (2.0 * std::f64::consts::PI * 0.5).ln() - 1.5 * 1.5 / 1.0;
        assert_relative_eq!(net.log_probability(&a).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn log_probability_requires_every_variable() {
        let net = mixed_net();
        let d = net.var_by_name("D").unwrap().id();
        let mut a = Assignment::new(net.len());
        a.set(net.var(d), Value::Index(0)).unwrap();
        match net.log_probability(&a) {
            Err(Error::MissingValue(name)) => assert_eq!(name, "Z"),
            other => panic!("expected MissingValue, got {other:?}"),
        }
    }

    #[test]
    fn clg_restriction_rejects_continuous_parent_of_discrete_child() {
        let mut reg = VariableRegistry::new();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let d = reg.add_observable("D", StateSpace::finite_states(2).unwrap()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(x, d).unwrap();
        let err = BayesianNetwork::new(
            dag,
            vec![Cpd::gaussian_root(0.0, 1.0), Cpd::multinomial_root(vec![0.5, 0.5])],
        )
        .unwrap_err();
        match err {
            Error::Validation { variable, rule } => {
                assert_eq!(variable, "D");
                assert!(rule.contains("continuous parent"), "rule was: {rule}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn config_row_counts_must_match_parent_cardinalities() {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(3).unwrap()).unwrap();
        let b = reg.add_observable("B", StateSpace::finite_states(2).unwrap()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, b).unwrap();
        // B needs 3 rows (one per state of A), give it 2.
        let err = BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.2, 0.3, 0.5]),
                Cpd::multinomial(vec![vec![0.5, 0.5], vec![0.1, 0.9]]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref variable, .. } if variable == "B"));
    }

    #[test]
    fn kind_reflects_parent_spaces() {
        let mut reg = VariableRegistry::new();
        let d = reg.add_observable("D", StateSpace::finite_states(2).unwrap()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let z = reg.add_observable("Z", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(d, z).unwrap();
        dag.add_edge(x, z).unwrap();
        let net = BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.5, 0.5]),
                Cpd::gaussian_root(0.0, 1.0),
                Cpd::gaussian(vec![
                    LinearGaussian::new(0.0, vec![1.0], 1.0),
                    LinearGaussian::new(1.0, vec![-1.0], 2.0),
                ]),
            ],
        )
        .unwrap();
        assert_eq!(net.kind(d), CpdKind::Multinomial);
        assert_eq!(net.kind(x), CpdKind::Normal);
        assert_eq!(net.kind(z), CpdKind::NormalMultinomialNormal);
        assert_eq!(net.kind(z).tag(), "Normal|MultinomialNormal");
    }

    #[test]
    fn empty_network_is_rejected() {
        let dag = Dag::new(VariableRegistry::new());
        assert!(matches!(BayesianNetwork::new(dag, vec![]), Err(Error::EmptyModel)));
    }
}
