//! Streaming parameter learning for temporal models.

use super::filter::BeliefState;
use super::{
    placeholder_root, step_skeleton, DynamicBayesianNetwork, TemporalParent, PREVIOUS_SUFFIX,
};
use crate::ef::Dirichlet;
use crate::error::{Error, Result};
use crate::inference::{EngineNet, ExpCpd, Marginal};
use crate::learning::{
    absorbed, accumulate, block_expectations, block_point_cpd, zero_stats, Block, GaussianBlock,
    LearnerConfig, ModelSpec, UpdateSummary,
};
use crate::model::{Assignment, BayesianNetwork, Cpd, Dag, Value, VarId, VariableRegistry};
use std::collections::HashSet;

/// One time slice of one sequence in a batched stream.
///
/// Slices of a sequence must appear contiguously and in time order; a
/// sequence may span several batches but cannot resume once another
/// sequence has started.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSlice {
    /// Identifier of the sequence this slice belongs to.
    pub sequence: u64,
    /// Observed values of this slice; unset variables are missing.
    pub values: Assignment,
}

/// The temporal structure to learn plus a prior for every block: one set of
/// blocks for the first slice, an independent set for the transition.
#[derive(Clone, Debug)]
pub struct DynamicModelSpec {
    time0: ModelSpec,
    step: ModelSpec,
    parents: Vec<Vec<TemporalParent>>,
    kept: Vec<VarId>,
    base: usize,
}

impl DynamicModelSpec {
    /// A spec with default priors. `dag0` is the first-slice structure;
    /// `parents` lists each variable's transition parents.
    pub fn new(dag0: Dag, parents: Vec<Vec<TemporalParent>>) -> Result<DynamicModelSpec> {
        let n = dag0.len();
        for v in dag0.registry().ids() {
            if dag0.var(v).name().ends_with(PREVIOUS_SUFFIX) {
                return Err(Error::Validation {
                    variable: dag0.var(v).name().to_string(),
                    rule: format!("variable names must not end with `{PREVIOUS_SUFFIX}`"),
                });
            }
        }
        if parents.len() != n {
            return Err(Error::Validation {
                variable: String::new(),
                rule: format!("transition lists cover {} of {n} variables", parents.len()),
            });
        }
        for list in &parents {
            for tp in list {
                if tp.var().index() >= n {
                    return Err(Error::Validation {
                        variable: String::new(),
                        rule: "transition parent is out of range".into(),
                    });
                }
            }
        }
        let skeleton = step_skeleton(dag0.registry(), &parents, &vec![false; n])?;
        let mut step = ModelSpec::new(skeleton.dag)?;
        for (slot, &p) in skeleton.kept.iter().enumerate() {
            // Previous copies carry beliefs, never parameters.
            step.fix(VarId(slot), placeholder_root(dag0.var(p).space()))?;
        }
        let time0 = ModelSpec::new(dag0)?;
        Ok(DynamicModelSpec { time0, step, parents, kept: skeleton.kept, base: skeleton.base })
    }

    pub fn registry(&self) -> &VariableRegistry {
        self.time0.registry()
    }

    pub fn transition_parents(&self, v: VarId) -> &[TemporalParent] {
        &self.parents[v.index()]
    }

    /// The first-slice block of one variable.
    pub fn time0_block(&self, v: VarId) -> &Block {
        self.time0.block(v)
    }

    /// The transition block of one variable.
    pub fn transition_block(&self, v: VarId) -> &Block {
        self.step.block(self.step_id(v))
    }

    pub fn set_time0_dirichlet_prior(&mut self, v: VarId, rows: Vec<Dirichlet>) -> Result<&mut Self> {
        self.time0.set_dirichlet_prior(v, rows)?;
        Ok(self)
    }

    pub fn set_time0_gaussian_prior(
        &mut self,
        v: VarId,
        configs: Vec<GaussianBlock>,
    ) -> Result<&mut Self> {
        self.time0.set_gaussian_prior(v, configs)?;
        Ok(self)
    }

    pub fn fix_time0(&mut self, v: VarId, cpd: Cpd) -> Result<&mut Self> {
        self.time0.fix(v, cpd)?;
        Ok(self)
    }

    pub fn set_transition_dirichlet_prior(
        &mut self,
        v: VarId,
        rows: Vec<Dirichlet>,
    ) -> Result<&mut Self> {
        self.step.set_dirichlet_prior(self.step_id(v), rows)?;
        Ok(self)
    }

    pub fn set_transition_gaussian_prior(
        &mut self,
        v: VarId,
        configs: Vec<GaussianBlock>,
    ) -> Result<&mut Self> {
        self.step.set_gaussian_prior(self.step_id(v), configs)?;
        Ok(self)
    }

    pub fn fix_transition(&mut self, v: VarId, cpd: Cpd) -> Result<&mut Self> {
        self.step.fix(self.step_id(v), cpd)?;
        Ok(self)
    }

    pub(crate) fn step_spec(&self) -> &ModelSpec {
        &self.step
    }

    pub(crate) fn base(&self) -> usize {
        self.base
    }

    /// Step-spec id of a variable's current-slice copy.
    fn step_id(&self, v: VarId) -> VarId {
        VarId(self.base + v.index())
    }
}

/// Streaming Bayesian learner over a [`DynamicModelSpec`].
///
/// Processes streams of [`SequenceSlice`] batches. Each sequence carries a
/// factored belief over its latest slice from batch to batch, so sequences
/// may be cut across batches freely. A failed update leaves the learner
/// exactly as it was.
#[derive(Clone, Debug)]
pub struct DynamicLearner {
    spec: DynamicModelSpec,
    cfg: LearnerConfig,
    time0_posterior: Vec<Block>,
    step_posterior: Vec<Block>,
    carry: Option<(u64, BeliefState)>,
    finished: HashSet<u64>,
    seen: f64,
    log: Vec<UpdateSummary>,
}

impl DynamicLearner {
    pub fn new(spec: DynamicModelSpec) -> DynamicLearner {
        DynamicLearner::with_config(spec, LearnerConfig::default())
    }

    pub fn with_config(spec: DynamicModelSpec, cfg: LearnerConfig) -> DynamicLearner {
        let time0_posterior = spec.time0.blocks().to_vec();
        let step_posterior = spec.step.blocks().to_vec();
        DynamicLearner {
            spec,
            cfg,
            time0_posterior,
            step_posterior,
            carry: None,
            finished: HashSet::new(),
            seen: 0.0,
            log: Vec::new(),
        }
    }

    /// Restores a learner from externally stored posterior blocks.
    pub(crate) fn from_parts(
        spec: DynamicModelSpec,
        cfg: LearnerConfig,
        time0_posterior: Vec<Block>,
        step_posterior: Vec<Block>,
        seen: f64,
    ) -> Result<DynamicLearner> {
        check_shapes(&time0_posterior, spec.time0.blocks())?;
        check_shapes(&step_posterior, spec.step.blocks())?;
        Ok(DynamicLearner {
            spec,
            cfg,
            time0_posterior,
            step_posterior,
            carry: None,
            finished: HashSet::new(),
            seen,
            log: Vec::new(),
        })
    }

    pub fn spec(&self) -> &DynamicModelSpec {
        &self.spec
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    /// Current first-slice posterior block of one variable.
    pub fn time0_posterior(&self, v: VarId) -> &Block {
        &self.time0_posterior[v.index()]
    }

    /// Current transition posterior block of one variable.
    pub fn transition_posterior(&self, v: VarId) -> &Block {
        &self.step_posterior[self.spec.step_id(v).index()]
    }

    #[cfg(test)]
    pub(crate) fn time0_blocks(&self) -> &[Block] {
        &self.time0_posterior
    }

    #[cfg(test)]
    pub(crate) fn step_blocks(&self) -> &[Block] {
        &self.step_posterior
    }

    /// Total number of slices absorbed so far.
    pub fn seen(&self) -> f64 {
        self.seen
    }

    /// One summary per update, in order.
    pub fn log(&self) -> &[UpdateSummary] {
        &self.log
    }

    /// Absorbs a batch of slices: per-slice posteriors are inferred under
    /// the frozen pre-batch expectations, their statistics accumulated, and
    /// both block sets updated once at the end.
    pub fn update(&mut self, slices: &[SequenceSlice]) -> Result<UpdateSummary> {
        if slices.is_empty() {
            return Err(Error::Config("batch is empty".into()));
        }
        let n = self.spec.registry().len();
        for s in slices {
            if s.values.n_vars() != n {
                return Err(Error::Schema(format!(
                    "slice covers {} variables, the model has {n}",
                    s.values.n_vars()
                )));
            }
        }

        let spec = &self.spec;
        let time0_cpds: Vec<ExpCpd> = self.time0_posterior.iter().map(block_expectations).collect();
        let time0_cards: Vec<Option<usize>> =
            spec.time0.registry().iter().map(|v| v.space().cardinality()).collect();
        let time0_net = EngineNet::new(spec.time0.structure(), time0_cpds, time0_cards);
        let step_template: Vec<ExpCpd> =
            self.step_posterior.iter().map(block_expectations).collect();
        let step_cards: Vec<Option<usize>> =
            spec.step.registry().iter().map(|v| v.space().cardinality()).collect();
        let step_len = spec.step.registry().len();

        // Work on copies so an error cannot leave half a batch behind.
        let mut carry = self.carry.clone();
        let mut finished = self.finished.clone();
        let mut stats0 = zero_stats(spec.time0.blocks());
        let mut stats_step = zero_stats(spec.step.blocks());
        let mut bound = 0.0;

        for slice in slices {
            let continuing = matches!(&carry, Some((seq, _)) if *seq == slice.sequence);
            if !continuing {
                if let Some((old, _)) = carry.take() {
                    finished.insert(old);
                }
                if finished.contains(&slice.sequence) {
                    return Err(Error::Order(format!(
                        "sequence {} reappears after it ended",
                        slice.sequence
                    )));
                }
            }
            let belief = match carry.take() {
                None => {
                    let complete = (0..n).all(|i| slice.values.is_set(VarId(i)));
                    let views = if complete {
                        time0_net.init_views(&slice.values)?
                    } else {
                        time0_net
                            .run(&slice.values, self.cfg.max_iterations, self.cfg.elbo_rel_tol)?
                            .views
                    };
                    bound += time0_net.elbo(&views);
                    accumulate(spec.time0.structure(), &time0_net, &views, &mut stats0);
                    BeliefState::from_views(&views, 0, n, 0)
                }
                Some((_, prev)) => {
                    let mut cpds = step_template.clone();
                    let mut evidence = Assignment::new(step_len);
                    for (slot, &p) in spec.kept.iter().enumerate() {
                        match prev.marginal(p) {
                            Marginal::Discrete(probs) => {
                                cpds[slot] = ExpCpd::Discrete {
                                    e_log: vec![probs.iter().map(|q| q.ln()).collect()],
                                };
                            }
                            Marginal::Gaussian { mean, variance } if *variance > 0.0 => {
                                cpds[slot] =
                                    ExpCpd::from_cpd(&Cpd::gaussian_root(*mean, *variance));
                            }
                            Marginal::Gaussian { mean, .. } => {
                                // Point belief: pin it, keep the placeholder.
                                evidence.set_raw(VarId(slot), Value::Real(*mean));
                            }
                        }
                    }
                    for v in spec.registry().ids() {
                        if let Some(value) = slice.values.get(v) {
                            evidence.set_raw(spec.step_id(v), value);
                        }
                    }
                    let net = EngineNet::new(spec.step.structure(), cpds, step_cards.clone());
                    let outcome =
                        net.run(&evidence, self.cfg.max_iterations, self.cfg.elbo_rel_tol)?;
                    bound += net.elbo(&outcome.views);
                    accumulate(spec.step.structure(), &net, &outcome.views, &mut stats_step);
                    BeliefState::from_views(&outcome.views, spec.base, n, prev.time() + 1)
                }
            };
            carry = Some((slice.sequence, belief));
        }

        self.time0_posterior = absorbed(&self.time0_posterior, &stats0, 1.0)?;
        self.step_posterior = absorbed(&self.step_posterior, &stats_step, 1.0)?;
        self.carry = carry;
        self.finished = finished;
        self.seen += slices.len() as f64;
        let summary = UpdateSummary { batch: self.log.len(), size: slices.len(), bound };
        self.log.push(summary);
        Ok(summary)
    }

    /// Posterior-mean parameters as a concrete dynamic network. Fails with
    /// [`Error::UndefinedVarianceMean`] while any variance posterior still
    /// has Gamma shape <= 1.
    pub fn point_estimate(&self) -> Result<DynamicBayesianNetwork> {
        let mut cpds0 = Vec::with_capacity(self.spec.registry().len());
        let mut transition = Vec::with_capacity(self.spec.registry().len());
        for v in self.spec.registry().ids() {
            let name = self.spec.registry().get(v).name();
            cpds0.push(block_point_cpd(&self.time0_posterior[v.index()], name)?);
            transition
                .push(block_point_cpd(&self.step_posterior[self.spec.step_id(v).index()], name)?);
        }
        let time0 = BayesianNetwork::new(self.spec.time0.dag().clone(), cpds0)?;
        DynamicBayesianNetwork::new(time0, self.spec.parents.clone(), transition)
    }
}

fn check_shapes(restored: &[Block], prior: &[Block]) -> Result<()> {
    if restored.len() != prior.len() {
        return Err(Error::Schema(format!(
            "{} posterior blocks for a model with {} variables",
            restored.len(),
            prior.len()
        )));
    }
    for (r, p) in restored.iter().zip(prior) {
        let ok = match (r, p) {
            (Block::Dirichlet(a), Block::Dirichlet(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.alphas.len() == y.alphas.len())
            }
            (Block::Gaussian(a), Block::Gaussian(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.coeffs.len() == y.coeffs.len())
            }
            (Block::Fixed(_), Block::Fixed(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::Schema("posterior blocks do not match the model structure".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;
    use approx::assert_relative_eq;

    fn binary_chain_spec() -> DynamicModelSpec {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let dag = Dag::new(reg);
        DynamicModelSpec::new(dag, vec![vec![TemporalParent::Previous(a)]]).unwrap()
    }

    fn observed_sequence(seq: u64, states: &[usize]) -> Vec<SequenceSlice> {
        states
            .iter()
            .map(|&s| {
                let mut values = Assignment::new(1);
                values.set_raw(VarId(0), Value::Index(s));
                SequenceSlice { sequence: seq, values }
            })
            .collect()
    }

    #[test]
    fn observed_transition_counts_are_added_exactly() {
        let mut learner = DynamicLearner::new(binary_chain_spec());
        let a = VarId(0);
        learner.update(&observed_sequence(0, &[0, 0, 1, 0, 1, 1])).unwrap();

        // One sequence start at state 0.
        let Block::Dirichlet(rows) = learner.time0_posterior(a) else { panic!() };
        assert_eq!(rows[0].alphas, vec![2.0, 1.0]);

        // Pairs: (0,0) (0,1) (1,0) (0,1) (1,1) on a flat prior.
        let Block::Dirichlet(rows) = learner.transition_posterior(a) else { panic!() };
        assert_eq!(rows[0].alphas, vec![2.0, 3.0]);
        assert_eq!(rows[1].alphas, vec![2.0, 2.0]);
        assert_eq!(learner.seen(), 6.0);
    }

    #[test]
    fn sequences_are_kept_apart_and_may_span_batches() {
        let mut learner = DynamicLearner::new(binary_chain_spec());
        let a = VarId(0);
        // Sequence 0 split across two batches, then sequence 1.
        let mut batch = observed_sequence(0, &[0, 1]);
        learner.update(&batch).unwrap();
        batch = observed_sequence(0, &[1]);
        batch.extend(observed_sequence(1, &[1, 0]));
        learner.update(&batch).unwrap();

        // Starts: state 0 once, state 1 once.
        let Block::Dirichlet(rows) = learner.time0_posterior(a) else { panic!() };
        assert_eq!(rows[0].alphas, vec![2.0, 2.0]);
        // Pairs: (0,1) (1,1) within sequence 0, (1,0) within sequence 1 --
        // no pair across the boundary.
        let Block::Dirichlet(rows) = learner.transition_posterior(a) else { panic!() };
        assert_eq!(rows[0].alphas, vec![1.0, 2.0]);
        assert_eq!(rows[1].alphas, vec![2.0, 2.0]);
    }

    #[test]
    fn a_sequence_cannot_resume_after_ending() {
        let mut learner = DynamicLearner::new(binary_chain_spec());
        learner.update(&observed_sequence(0, &[0])).unwrap();
        learner.update(&observed_sequence(1, &[1])).unwrap();
        let err = learner.update(&observed_sequence(0, &[0])).unwrap_err();
        assert!(matches!(err, Error::Order(_)));
    }

    #[test]
    fn failed_updates_change_nothing() {
        let mut learner = DynamicLearner::new(binary_chain_spec());
        learner.update(&observed_sequence(0, &[0, 1])).unwrap();
        let before = learner.clone();

        let mut bad = observed_sequence(1, &[1]);
        bad.push(SequenceSlice { sequence: 1, values: Assignment::new(3) });
        assert!(learner.update(&bad).is_err());
        assert_eq!(learner.seen(), before.seen());
        assert_eq!(learner.time0_blocks(), before.time0_blocks());
        assert_eq!(learner.step_blocks(), before.step_blocks());
    }

    #[test]
    fn transition_coefficient_is_recovered() {
        // x_t = 2 * x_{t-1}, noise-free, fully observed; +/- sequences keep
        // the intercept at zero.
        let mut reg = VariableRegistry::new();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let dag = Dag::new(reg);
        let spec = DynamicModelSpec::new(dag, vec![vec![TemporalParent::Previous(x)]]).unwrap();
        let mut learner = DynamicLearner::new(spec);

        let real_sequence = |seq: u64, xs: &[f64]| -> Vec<SequenceSlice> {
            xs.iter()
                .map(|&v| {
                    let mut values = Assignment::new(1);
                    values.set_raw(x, Value::Real(v));
                    SequenceSlice { sequence: seq, values }
                })
                .collect()
        };
        for pass in 0..40u64 {
            let mut batch = real_sequence(2 * pass, &[1.0, 2.0, 4.0]);
            batch.extend(real_sequence(2 * pass + 1, &[-1.0, -2.0, -4.0]));
            learner.update(&batch).unwrap();
        }
        let Block::Gaussian(configs) = learner.transition_posterior(x) else { panic!() };
        assert_relative_eq!(configs[0].coeffs[0].mean, 2.0, epsilon = 0.05);
        assert_relative_eq!(configs[0].base.mean, 0.0, epsilon = 0.05);

        let dbn = learner.point_estimate().unwrap();
        let lg = dbn.transition_cpd(x).as_gaussian().unwrap().configs()[0].clone();
        assert_relative_eq!(lg.coeffs[0], 2.0, epsilon = 0.05);
    }

    #[test]
    fn latent_chain_bound_improves_over_passes() {
        // Hidden binary regime drives an observed Gaussian; only the
        // observation is ever seen.
        let mut reg = VariableRegistry::new();
        let h = reg.add_latent("H", StateSpace::finite_states(2).unwrap()).unwrap();
        let y = reg.add_observable("Y", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(h, y).unwrap();
        let spec = DynamicModelSpec::new(
            dag,
            vec![vec![TemporalParent::Previous(h)], vec![TemporalParent::Current(h)]],
        )
        .unwrap();
        let mut learner = DynamicLearner::new(spec);

        let ys = [-3.0, -2.8, -3.2, 3.1, 2.9, 3.0, -3.1, -2.9];
        let mut first = f64::NAN;
        let mut last = f64::NAN;
        for pass in 0..5u64 {
            let batch: Vec<SequenceSlice> = ys
                .iter()
                .map(|&v| {
                    let mut values = Assignment::new(2);
                    values.set_raw(y, Value::Real(v));
                    SequenceSlice { sequence: pass, values }
                })
                .collect();
            let summary = learner.update(&batch).unwrap();
            if pass == 0 {
                first = summary.bound;
            }
            last = summary.bound;
        }
        assert!(last > first, "bound went from {first} to {last}");
    }
}
