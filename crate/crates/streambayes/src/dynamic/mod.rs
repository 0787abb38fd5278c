//! Two-slice dynamic Bayesian networks: filtering, learning, sampling.
//!
//! A [`DynamicBayesianNetwork`] describes a stationary process over one set
//! of variables: a regular network for the first time slice, plus a
//! transition model in which each variable's parents live either in the
//! same slice ([`TemporalParent::Current`]) or the previous one
//! ([`TemporalParent::Previous`]).
//!
//! Exact filtering is intractable in general, so [`FactoredFilter`] keeps a
//! factored belief state — one marginal per variable — and advances it one
//! slice at a time (the factored-frontier scheme). Previous-slice variables
//! enter each step as independent roots carrying their belief marginal;
//! roots with a single same-kind child are marginalized into that child in
//! closed form, which makes the filter exact for chain-structured models
//! such as hidden Markov models and linear state-space models.

mod filter;
mod io;
mod learner;
mod sample;

pub use filter::{BeliefState, FactoredFilter, SliceEngine};
pub use io::{
    deserialize_dynamic_model, dynamic_learner_from_json, dynamic_learner_to_json,
    serialize_dynamic_model, serialize_dynamic_model_to_string, DYNAMIC_MODEL_FORMAT,
};
pub use learner::{DynamicLearner, DynamicModelSpec, SequenceSlice};
pub use sample::sample_sequences;

use crate::error::{Error, Result};
use crate::model::{
    BayesianNetwork, Cpd, Dag, LinearGaussian, StateSpace, VarId, VariableRegistry,
};

/// Suffix that marks a previous-slice parent in model files and in the
/// names of materialized interface copies.
pub const PREVIOUS_SUFFIX: &str = "@prev";

/// A parent reference in the transition model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemporalParent {
    /// The parent lives in the same time slice.
    Current(VarId),
    /// The parent is the previous-slice copy of a variable.
    Previous(VarId),
}

/// A stationary two-slice temporal model.
///
/// Both slices range over the variables of `time0`'s registry; transition
/// parent lists and distributions are indexed by variable id. Parent order
/// is significant: discrete-parent configurations and linear coefficients
/// follow the declared order, exactly as in a static network.
#[derive(Clone, Debug)]
pub struct DynamicBayesianNetwork {
    time0: BayesianNetwork,
    parents: Vec<Vec<TemporalParent>>,
    cpds: Vec<Cpd>,
    /// For each variable, the current-slice children of its previous copy.
    prev_children: Vec<Vec<VarId>>,
    /// Current-slice variables in a transition-consistent order.
    transition_topo: Vec<VarId>,
}

impl DynamicBayesianNetwork {
    /// Validates and assembles a dynamic network. The transition is checked
    /// by materializing one step as a static network: previous-slice copies
    /// become roots named `{name}@prev`, so variable names must not end
    /// with that suffix.
    pub fn new(
        time0: BayesianNetwork,
        parents: Vec<Vec<TemporalParent>>,
        cpds: Vec<Cpd>,
    ) -> Result<Self> {
        let n = time0.len();
        for v in time0.registry().ids() {
            if time0.var(v).name().ends_with(PREVIOUS_SUFFIX) {
                return Err(Error::Validation {
                    variable: time0.var(v).name().to_string(),
                    rule: format!("variable names must not end with `{PREVIOUS_SUFFIX}`"),
                });
            }
        }
        if parents.len() != n || cpds.len() != n {
            return Err(Error::Validation {
                variable: String::new(),
                rule: format!(
                    "transition lists cover {} parents / {} distributions for {n} variables",
                    parents.len(),
                    cpds.len()
                ),
            });
        }
        for list in &parents {
            for tp in list {
                let p = tp.var();
                if p.index() >= n {
                    return Err(Error::Validation {
                        variable: String::new(),
                        rule: "transition parent is out of range".into(),
                    });
                }
            }
        }

        // Materialize one step with placeholder root beliefs; the static
        // validator then enforces acyclicity, typing, and shapes.
        let skeleton = step_skeleton(time0.registry(), &parents, &vec![false; n])?;
        let mut step_cpds = Vec::with_capacity(skeleton.dag.len());
        for &p in &skeleton.kept {
            step_cpds.push(placeholder_root(time0.var(p).space()));
        }
        step_cpds.extend(cpds.iter().cloned());
        let step_net = BayesianNetwork::new(skeleton.dag, step_cpds)?;

        let mut prev_children = vec![Vec::new(); n];
        for v in time0.registry().ids() {
            for tp in &parents[v.index()] {
                if let TemporalParent::Previous(p) = tp {
                    prev_children[p.index()].push(v);
                }
            }
        }
        let transition_topo = step_net
            .topological_order()
            .iter()
            .filter(|id| id.index() >= skeleton.base)
            .map(|id| VarId(id.index() - skeleton.base))
            .collect();
        Ok(DynamicBayesianNetwork { time0, parents, cpds, prev_children, transition_topo })
    }

    /// The first-slice network.
    pub fn time0(&self) -> &BayesianNetwork {
        &self.time0
    }

    pub fn registry(&self) -> &VariableRegistry {
        self.time0.registry()
    }

    pub fn len(&self) -> usize {
        self.time0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time0.is_empty()
    }

    pub fn transition_parents(&self, v: VarId) -> &[TemporalParent] {
        &self.parents[v.index()]
    }

    pub(crate) fn transition_parent_lists(&self) -> &[Vec<TemporalParent>] {
        &self.parents
    }

    pub fn transition_cpd(&self, v: VarId) -> &Cpd {
        &self.cpds[v.index()]
    }

    pub(crate) fn prev_children(&self, v: VarId) -> &[VarId] {
        &self.prev_children[v.index()]
    }

    pub(crate) fn transition_topo(&self) -> &[VarId] {
        &self.transition_topo
    }

    /// Materializes `slices` time steps as one static network with
    /// variables named `{name}#{t}`. The id of variable `v` at slice `t` is
    /// `t * len() + v`, which makes evidence and posterior bookkeeping
    /// straightforward for exact cross-checks on short sequences.
    pub fn unroll(&self, slices: usize) -> Result<BayesianNetwork> {
        if slices == 0 {
            return Err(Error::Config("cannot unroll zero slices".into()));
        }
        let n = self.len();
        let mut reg = VariableRegistry::new();
        for t in 0..slices {
            for v in self.registry().ids() {
                let var = self.time0.var(v);
                reg.add(format!("{}#{t}", var.name()), var.space().clone(), var.role())?;
            }
        }
        let mut dag = Dag::new(reg);
        let id_at = |t: usize, v: VarId| VarId(t * n + v.index());
        for v in self.registry().ids() {
            for &p in self.time0.parents(v) {
                dag.add_edge(id_at(0, p), id_at(0, v))?;
            }
        }
        for t in 1..slices {
            for v in self.registry().ids() {
                for tp in &self.parents[v.index()] {
                    let parent = match tp {
                        TemporalParent::Current(c) => id_at(t, *c),
                        TemporalParent::Previous(p) => id_at(t - 1, *p),
                    };
                    dag.add_edge(parent, id_at(t, v))?;
                }
            }
        }
        let mut cpds = Vec::with_capacity(slices * n);
        cpds.extend(self.time0.cpds().iter().cloned());
        for _ in 1..slices {
            cpds.extend(self.cpds.iter().cloned());
        }
        BayesianNetwork::new(dag, cpds)
    }
}

impl TemporalParent {
    /// The referenced variable, ignoring which slice it lives in.
    pub fn var(&self) -> VarId {
        match self {
            TemporalParent::Current(v) | TemporalParent::Previous(v) => *v,
        }
    }
}

/// Structure of one materialized step: kept previous copies first (ids
/// `0..base`), then every current-slice variable in registry order.
pub(crate) struct StepSkeleton {
    pub(crate) dag: Dag,
    /// Model ids of the kept previous copies, in step-net id order.
    pub(crate) kept: Vec<VarId>,
    /// Step-net id offset of the current slice (= `kept.len()`).
    pub(crate) base: usize,
}

/// Builds the step DAG. `drop[p]` excludes the previous copy of `p` (its
/// edge disappears; the caller is responsible for folding its effect into
/// the child's distribution).
pub(crate) fn step_skeleton(
    registry: &VariableRegistry,
    parents: &[Vec<TemporalParent>],
    drop: &[bool],
) -> Result<StepSkeleton> {
    let n = registry.len();
    let mut referenced = vec![false; n];
    for list in parents {
        for tp in list {
            if let TemporalParent::Previous(p) = tp {
                referenced[p.index()] = true;
            }
        }
    }
    let mut reg = VariableRegistry::new();
    let mut kept = Vec::new();
    let mut prev_slot = vec![None; n];
    for v in registry.ids() {
        if referenced[v.index()] && !drop[v.index()] {
            let var = registry.get(v);
            reg.add_latent(format!("{}{PREVIOUS_SUFFIX}", var.name()), var.space().clone())?;
            prev_slot[v.index()] = Some(kept.len());
            kept.push(v);
        }
    }
    for v in registry.ids() {
        let var = registry.get(v);
        reg.add(var.name().to_string(), var.space().clone(), var.role())?;
    }
    let base = kept.len();
    let mut dag = Dag::new(reg);
    for v in registry.ids() {
        for tp in &parents[v.index()] {
            match tp {
                TemporalParent::Previous(p) => {
                    if let Some(slot) = prev_slot[p.index()] {
                        dag.add_edge(VarId(slot), VarId(base + v.index()))?;
                    }
                }
                TemporalParent::Current(c) => {
                    dag.add_edge(VarId(base + c.index()), VarId(base + v.index()))?;
                }
            }
        }
    }
    Ok(StepSkeleton { dag, kept, base })
}

/// A valid stand-in distribution for a previous-slice root; the real
/// belief replaces it before anything is computed.
pub(crate) fn placeholder_root(space: &StateSpace) -> Cpd {
    match space.cardinality() {
        Some(card) => Cpd::multinomial_root(vec![1.0 / card as f64; card]),
        None => Cpd::gaussian_root(0.0, 1.0),
    }
}

/// Marginalizes root-parent dimensions out of a probability table.
///
/// `cards` are the cardinalities of the table's discrete parents in order;
/// `drop` pairs a dimension index with that parent's marginal. The result
/// ranges over the remaining dimensions in their original order.
pub(crate) fn mix_rows(
    rows: &[Vec<f64>],
    cards: &[usize],
    drop: &[(usize, Vec<f64>)],
) -> Vec<Vec<f64>> {
    let keep: Vec<usize> =
        (0..cards.len()).filter(|d| drop.iter().all(|(j, _)| j != d)).collect();
    let kept_cards: Vec<usize> = keep.iter().map(|&d| cards[d]).collect();
    let n_out = crate::model::config::config_count(&kept_cards);
    let width = rows.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; width]; n_out];
    for (idx, row) in rows.iter().enumerate() {
        let states = crate::model::config::config_unrank(cards, idx);
        let mut weight = 1.0;
        for (dim, probs) in drop {
            weight *= probs[states[*dim]];
        }
        if weight == 0.0 {
            continue;
        }
        let kept_states: Vec<usize> = keep.iter().map(|&d| states[d]).collect();
        let target = crate::model::config::config_index(&kept_cards, &kept_states);
        for (acc, p) in out[target].iter_mut().zip(row) {
            *acc += weight * p;
        }
    }
    out
}

/// Folds independent Gaussian root parents into a linear-Gaussian family:
/// each dropped coefficient contributes its mean to the intercept and its
/// `coeff^2 * variance` to the variance. Exact for root parents.
pub(crate) fn fold_gaussian_parents(
    lg: &LinearGaussian,
    drop: &[(usize, f64, f64)],
) -> LinearGaussian {
    let mut intercept = lg.intercept;
    let mut variance = lg.variance;
    let mut coeffs = Vec::with_capacity(lg.coeffs.len() - drop.len());
    for (i, &c) in lg.coeffs.iter().enumerate() {
        if let Some((_, mean, var)) = drop.iter().find(|(j, _, _)| *j == i) {
            intercept += c * mean;
            variance += c * c * var;
        } else {
            coeffs.push(c);
        }
    }
    LinearGaussian::new(intercept, coeffs, variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;

    /// X is a latent chain, Y observes X: a 1-d linear state-space model.
    pub(crate) fn state_space_model() -> DynamicBayesianNetwork {
        let mut reg = VariableRegistry::new();
        let x = reg.add_latent("X", StateSpace::real()).unwrap();
        let y = reg.add_observable("Y", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(x, y).unwrap();
        let time0 = BayesianNetwork::new(
            dag,
            vec![Cpd::gaussian_root(0.0, 1.0), Cpd::gaussian(vec![LinearGaussian::new(0.0, vec![1.0], 1.0)])],
        )
        .unwrap();
        DynamicBayesianNetwork::new(
            time0,
            vec![
                vec![TemporalParent::Previous(x)],
                vec![TemporalParent::Current(x)],
            ],
            vec![
                Cpd::gaussian(vec![LinearGaussian::new(0.0, vec![1.0], 1.0)]),
                Cpd::gaussian(vec![LinearGaussian::new(0.0, vec![1.0], 1.0)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn transition_is_validated_like_a_static_network() {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let time0 = BayesianNetwork::new(
            Dag::new(reg),
            vec![Cpd::multinomial_root(vec![0.5, 0.5])],
        )
        .unwrap();
        // Wrong row count for one binary previous parent.
        let bad = DynamicBayesianNetwork::new(
            time0.clone(),
            vec![vec![TemporalParent::Previous(a)]],
            vec![Cpd::multinomial(vec![vec![0.9, 0.1]])],
        );
        assert!(matches!(bad, Err(Error::Validation { .. })));
        let good = DynamicBayesianNetwork::new(
            time0,
            vec![vec![TemporalParent::Previous(a)]],
            vec![Cpd::multinomial(vec![vec![0.9, 0.1], vec![0.2, 0.8]])],
        );
        assert!(good.is_ok());
    }

    #[test]
    fn reserved_name_suffix_is_rejected() {
        let mut reg = VariableRegistry::new();
        reg.add_observable("A@prev", StateSpace::finite_states(2).unwrap()).unwrap();
        let time0 = BayesianNetwork::new(
            Dag::new(reg),
            vec![Cpd::multinomial_root(vec![0.5, 0.5])],
        )
        .unwrap();
        assert!(matches!(
            DynamicBayesianNetwork::new(time0, vec![vec![]], vec![Cpd::multinomial_root(vec![0.5, 0.5])]),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn unrolling_names_and_wires_slices() {
        let dbn = state_space_model();
        let net = dbn.unroll(3).unwrap();
        assert_eq!(net.len(), 6);
        assert_eq!(net.var(VarId(0)).name(), "X#0");
        assert_eq!(net.var(VarId(4)).name(), "X#2");
        // X#2's parent is X#1; Y#2's parent is X#2.
        assert_eq!(net.parents(VarId(4)), &[VarId(2)]);
        assert_eq!(net.parents(VarId(5)), &[VarId(4)]);
    }

    #[test]
    fn row_mixing_marginalizes_exactly() {
        // Table over parents (A:2, B:2); drop A with marginal (0.25, 0.75).
        let rows = vec![
            vec![1.0, 0.0], // A=0, B=0
            vec![0.8, 0.2], // A=0, B=1
            vec![0.4, 0.6], // A=1, B=0
            vec![0.0, 1.0], // A=1, B=1
        ];
        let mixed = mix_rows(&rows, &[2, 2], &[(0, vec![0.25, 0.75])]);
        assert_eq!(mixed.len(), 2);
        assert!((mixed[0][0] - (0.25 * 1.0 + 0.75 * 0.4)).abs() < 1e-15);
        assert!((mixed[1][1] - (0.25 * 0.2 + 0.75 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_folding_shifts_mean_and_inflates_variance() {
        let lg = LinearGaussian::new(1.0, vec![2.0, -1.0], 0.5);
        let folded = fold_gaussian_parents(&lg, &[(0, 3.0, 0.25)]);
        assert_eq!(folded.coeffs, vec![-1.0]);
        assert!((folded.intercept - 7.0).abs() < 1e-15);
        assert!((folded.variance - 1.5).abs() < 1e-15);
    }
}
