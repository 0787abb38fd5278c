//! Factored-frontier filtering over a dynamic network.

use super::{
    fold_gaussian_parents, mix_rows, placeholder_root, step_skeleton, DynamicBayesianNetwork,
    TemporalParent,
};
use crate::error::{Error, Result};
use crate::inference::{
    importance_sampling_infer, EngineNet, InferenceConfig, Marginal, View, Views,
};
use crate::model::config::config_unrank;
use crate::model::{Assignment, BayesianNetwork, Cpd, Dag, VarId, Value, VariableRegistry};

/// Engine that turns one slice network plus evidence into per-variable
/// posterior marginals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SliceEngine {
    /// Mean-field coordinate ascent with barren-variable pruning; exact on
    /// chains, deterministic.
    #[default]
    Vmp,
    /// Likelihood-weighted sampling over the whole slice network; unbiased,
    /// reproducible for a fixed seed and sample count.
    ImportanceSampling,
}

/// Factored belief over one time slice: an independent marginal per
/// variable. `time` counts slices from zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    time: i64,
    marginals: Vec<Marginal>,
}

impl BeliefState {
    pub fn time(&self) -> i64 {
        self.time
    }

    pub fn marginal(&self, v: VarId) -> &Marginal {
        &self.marginals[v.index()]
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// Reads the marginals of variables `base..base + n` out of a
    /// converged set of views. Observed variables yield point marginals
    /// (a degenerate table or a zero-variance Gaussian).
    pub(crate) fn from_views(views: &Views, base: usize, n: usize, time: i64) -> BeliefState {
        let marginals = (0..n)
            .map(|i| match views.view(VarId(base + i)) {
                View::Probs(p) => Marginal::Discrete(p.clone()),
                View::Moments { m1, m2 } => {
                    Marginal::Gaussian { mean: *m1, variance: (m2 - m1 * m1).max(0.0) }
                }
            })
            .collect();
        BeliefState { time, marginals }
    }
}

/// One materialized filter step: kept previous copies as belief roots,
/// point beliefs pinned as evidence.
pub(crate) struct StepNet {
    pub(crate) net: BayesianNetwork,
    /// Step-net id offset of the current slice.
    pub(crate) base: usize,
    /// Values to pin on kept previous copies (zero-variance beliefs).
    pub(crate) point_evidence: Vec<(usize, Value)>,
}

impl DynamicBayesianNetwork {
    /// Builds the network for one transition step from `belief`. With
    /// `collapse`, previous copies whose only child has the same kind are
    /// marginalized into that child exactly instead of becoming roots.
    pub(crate) fn step_net(&self, belief: &BeliefState, collapse: bool) -> Result<StepNet> {
        let n = self.len();
        let mut drop = vec![false; n];
        if collapse {
            for p in self.registry().ids() {
                let children = self.prev_children(p);
                if children.len() != 1 {
                    continue;
                }
                let same_kind = self.registry().get(p).space().is_finite()
                    == self.registry().get(children[0]).space().is_finite();
                if same_kind {
                    drop[p.index()] = true;
                }
            }
        }
        let skeleton = step_skeleton(self.registry(), self.transition_parent_lists(), &drop)?;

        let mut cpds = Vec::with_capacity(skeleton.dag.len());
        let mut point_evidence = Vec::new();
        for (slot, &p) in skeleton.kept.iter().enumerate() {
            match belief.marginal(p) {
                Marginal::Discrete(probs) => cpds.push(Cpd::multinomial_root(probs.clone())),
                Marginal::Gaussian { mean, variance } if *variance > 0.0 => {
                    cpds.push(Cpd::gaussian_root(*mean, *variance))
                }
                Marginal::Gaussian { mean, .. } => {
                    // A point belief: any valid root works, the value is
                    // pinned as evidence.
                    cpds.push(placeholder_root(self.registry().get(p).space()));
                    point_evidence.push((slot, Value::Real(*mean)));
                }
            }
        }
        for v in self.registry().ids() {
            cpds.push(self.collapsed_cpd(v, belief, &drop));
        }
        let net = BayesianNetwork::new(skeleton.dag, cpds)?;
        Ok(StepNet { net, base: skeleton.base, point_evidence })
    }

    /// The transition distribution of `v` with dropped previous parents
    /// folded in.
    fn collapsed_cpd(&self, v: VarId, belief: &BeliefState, drop: &[bool]) -> Cpd {
        let parents = self.transition_parents(v);
        let dropped = |tp: &TemporalParent| matches!(tp, TemporalParent::Previous(p) if drop[p.index()]);
        if !parents.iter().any(dropped) {
            return self.transition_cpd(v).clone();
        }
        match self.transition_cpd(v) {
            Cpd::Multinomial(m) => {
                // Dimensions count *discrete* parents in declared order.
                let mut cards = Vec::new();
                let mut mix = Vec::new();
                for tp in parents {
                    let space = self.registry().get(tp.var()).space();
                    let Some(card) = space.cardinality() else { continue };
                    if dropped(tp) {
                        if let Marginal::Discrete(w) = belief.marginal(tp.var()) {
                            mix.push((cards.len(), w.clone()));
                        }
                    }
                    cards.push(card);
                }
                Cpd::multinomial(mix_rows(m.rows(), &cards, &mix))
            }
            Cpd::Gaussian(g) => {
                // Positions count *continuous* parents in declared order.
                let mut fold = Vec::new();
                let mut pos = 0;
                for tp in parents {
                    if self.registry().get(tp.var()).space().is_finite() {
                        continue;
                    }
                    if dropped(tp) {
                        if let Marginal::Gaussian { mean, variance } = belief.marginal(tp.var()) {
                            fold.push((pos, *mean, *variance));
                        }
                    }
                    pos += 1;
                }
                Cpd::gaussian(
                    g.configs().iter().map(|lg| fold_gaussian_parents(lg, &fold)).collect(),
                )
            }
        }
    }
}

/// Recursive one-slice-at-a-time state estimation.
///
/// Each [`FactoredFilter::step`] call advances to the next slice: the first
/// call conditions the first-slice network on its evidence, later calls
/// push the belief through the transition (prediction) and condition on
/// that slice's evidence (correction). Evidence is an [`Assignment`] over
/// the model's variables; unset variables are simply unobserved.
pub struct FactoredFilter<'a> {
    dbn: &'a DynamicBayesianNetwork,
    cfg: InferenceConfig,
    engine: SliceEngine,
    belief: Option<BeliefState>,
}

impl<'a> FactoredFilter<'a> {
    pub fn new(dbn: &'a DynamicBayesianNetwork, cfg: InferenceConfig) -> FactoredFilter<'a> {
        FactoredFilter::with_engine(dbn, cfg, SliceEngine::Vmp)
    }

    /// Like [`FactoredFilter::new`] but with an explicit per-slice engine.
    /// The sampling engine reads its sample count and seed from `cfg`.
    pub fn with_engine(
        dbn: &'a DynamicBayesianNetwork,
        cfg: InferenceConfig,
        engine: SliceEngine,
    ) -> FactoredFilter<'a> {
        FactoredFilter { dbn, cfg, engine, belief: None }
    }

    /// Slice index of the current belief; -1 before the first step.
    pub fn time(&self) -> i64 {
        self.belief.as_ref().map_or(-1, BeliefState::time)
    }

    /// The filtered posterior after the last step, if any step was taken.
    pub fn belief(&self) -> Option<&BeliefState> {
        self.belief.as_ref()
    }

    /// Absorbs the next slice of evidence and returns the new belief.
    pub fn step(&mut self, evidence: &Assignment) -> Result<&BeliefState> {
        let n = self.dbn.len();
        if evidence.n_vars() != n {
            return Err(Error::Schema(format!(
                "evidence covers {} variables, the model has {n}",
                evidence.n_vars()
            )));
        }
        let next = match &self.belief {
            None => {
                let marginals = self.marginals(self.dbn.time0(), evidence)?;
                BeliefState { time: 0, marginals }
            }
            Some(belief) => {
                let step = self.dbn.step_net(belief, true)?;
                let mut step_evidence = Assignment::new(step.net.len());
                for &(slot, value) in &step.point_evidence {
                    step_evidence.set_raw(VarId(slot), value);
                }
                for v in self.dbn.registry().ids() {
                    if let Some(value) = evidence.get(v) {
                        step_evidence.set_raw(VarId(step.base + v.index()), value);
                    }
                }
                let marginals = self.marginals(&step.net, &step_evidence)?;
                BeliefState {
                    time: belief.time() + 1,
                    marginals: marginals[step.base..step.base + n].to_vec(),
                }
            }
        };
        self.belief = Some(next);
        Ok(self.belief.as_ref().expect("just set"))
    }

    fn marginals(&self, net: &BayesianNetwork, evidence: &Assignment) -> Result<Vec<Marginal>> {
        match self.engine {
            SliceEngine::Vmp => slice_marginals(net, evidence, &self.cfg),
            SliceEngine::ImportanceSampling => sampled_marginals(net, evidence, &self.cfg),
        }
    }

    /// Pushes the current belief `horizon` slices into the future with no
    /// evidence, by propagating moments through the transition. Discrete
    /// marginals mix their parent configurations; Gaussian marginals
    /// moment-match the predictive mixture.
    pub fn predictive(&self, horizon: usize) -> Result<BeliefState> {
        let belief = self.belief.as_ref().ok_or_else(|| {
            Error::Config("no belief yet: call step() at least once before predicting".into())
        })?;
        if horizon == 0 {
            return Err(Error::Config("prediction horizon must be at least 1".into()));
        }
        let mut state = belief.clone();
        for _ in 0..horizon {
            state = self.dbn.propagate(&state);
        }
        Ok(state)
    }
}

impl DynamicBayesianNetwork {
    /// One evidence-free transition: each variable's marginal given
    /// independent parent marginals.
    fn propagate(&self, belief: &BeliefState) -> BeliefState {
        let mut marginals: Vec<Option<Marginal>> = vec![None; self.len()];
        for &v in self.transition_topo() {
            let parents: Vec<Marginal> = self
                .transition_parents(v)
                .iter()
                .map(|tp| match tp {
                    TemporalParent::Previous(p) => belief.marginal(*p).clone(),
                    TemporalParent::Current(c) => marginals[c.index()]
                        .clone()
                        .expect("transition order is topological"),
                })
                .collect();
            marginals[v.index()] = Some(mixture_marginal(self.transition_cpd(v), &parents));
        }
        BeliefState {
            time: belief.time + 1,
            marginals: marginals.into_iter().map(|m| m.expect("all propagated")).collect(),
        }
    }
}

/// Exact marginal of one variable given independent marginals of its
/// parents, in declared parent order. Real children moment-match the
/// resulting mixture.
pub(crate) fn mixture_marginal(cpd: &Cpd, parents: &[Marginal]) -> Marginal {
    let disc: Vec<&[f64]> = parents.iter().filter_map(Marginal::probabilities).collect();
    let cards: Vec<usize> = disc.iter().map(|p| p.len()).collect();
    // (E[x], E[x^2]) per continuous parent.
    let cont: Vec<(f64, f64)> = parents
        .iter()
        .filter_map(|m| m.mean_variance().map(|(mean, var)| (mean, mean * mean + var)))
        .collect();
    match cpd {
        Cpd::Multinomial(m) => {
            let width = m.rows().first().map_or(0, Vec::len);
            let mut probs = vec![0.0; width];
            for (idx, row) in m.rows().iter().enumerate() {
                let states = config_unrank(&cards, idx);
                let w: f64 = states.iter().zip(&disc).map(|(s, p)| p[*s]).product();
                if w == 0.0 {
                    continue;
                }
                for (acc, p) in probs.iter_mut().zip(row) {
                    *acc += w * p;
                }
            }
            Marginal::Discrete(probs)
        }
        Cpd::Gaussian(g) => {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for (idx, lg) in g.configs().iter().enumerate() {
                let states = config_unrank(&cards, idx);
                let w: f64 = states.iter().zip(&disc).map(|(s, p)| p[*s]).product();
                if w == 0.0 {
                    continue;
                }
                let ex: f64 = lg.coeffs.iter().zip(&cont).map(|(b, (pm, _))| b * pm).sum();
                let mean = lg.intercept + ex;
                // E[(alpha + sum b x)^2] over independent parents.
                let mut sq = lg.intercept * lg.intercept + 2.0 * lg.intercept * ex;
                for (i, (b, (pm, pm2))) in lg.coeffs.iter().zip(&cont).enumerate() {
                    sq += b * b * pm2;
                    for (b2, (qm, _)) in lg.coeffs.iter().zip(&cont).skip(i + 1) {
                        sq += 2.0 * b * b2 * pm * qm;
                    }
                }
                m1 += w * mean;
                m2 += w * (lg.variance + sq);
            }
            Marginal::Gaussian { mean: m1, variance: (m2 - m1 * m1).max(0.0) }
        }
    }
}

/// Posterior marginal of every variable of `net` given `evidence`, by
/// likelihood-weighted sampling. Observed variables keep their point
/// marginal, matching what the variational engine reports for them.
fn sampled_marginals(
    net: &BayesianNetwork,
    evidence: &Assignment,
    cfg: &InferenceConfig,
) -> Result<Vec<Marginal>> {
    let outcome = importance_sampling_infer(net, evidence, cfg)?;
    net.registry()
        .ids()
        .map(|v| match outcome.posterior.marginal(v) {
            Some(m) => Ok(m.clone()),
            None => match evidence.get(v) {
                Some(Value::Index(s)) => {
                    let card = net.var(v).space().cardinality().expect("indexed ⇒ finite");
                    let mut probs = vec![0.0; card];
                    probs[s] = 1.0;
                    Ok(Marginal::Discrete(probs))
                }
                Some(Value::Real(x)) => Ok(Marginal::Gaussian { mean: x, variance: 0.0 }),
                None => unreachable!("unobserved variables stay in the posterior"),
            },
        })
        .collect()
}

/// Posterior marginal of every variable of `net` given `evidence`.
///
/// Variables with no observed descendants cannot influence the posterior
/// of the rest, but mean-field inference would still couple them and
/// shrink their variance. They are therefore pruned first: coordinate
/// ascent runs on the sub-network spanned by the observed variables and
/// their ancestors, and the pruned variables get their exact predictive
/// marginals by moment propagation afterwards. On a chain this makes
/// filtering exact.
fn slice_marginals(
    net: &BayesianNetwork,
    evidence: &Assignment,
    cfg: &InferenceConfig,
) -> Result<Vec<Marginal>> {
    let n = net.len();
    let mut children: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for v in net.registry().ids() {
        for &p in net.parents(v) {
            children[p.index()].push(v);
        }
    }
    // Keep observed variables and all their ancestors; the keep set is
    // ancestrally closed, so it forms a valid sub-network.
    let mut keep = vec![false; n];
    for &v in net.topological_order().iter().rev() {
        keep[v.index()] = evidence.is_set(v)
            || children[v.index()].iter().any(|c| keep[c.index()]);
    }

    let mut marginals: Vec<Option<Marginal>> = vec![None; n];
    if keep.iter().any(|&k| k) {
        let mut reg = VariableRegistry::new();
        let mut sub_id = vec![usize::MAX; n];
        for v in net.registry().ids() {
            if keep[v.index()] {
                let var = net.var(v);
                sub_id[v.index()] = reg.len();
                reg.add(var.name().to_string(), var.space().clone(), var.role())?;
            }
        }
        let mut dag = Dag::new(reg);
        for v in net.registry().ids() {
            if keep[v.index()] {
                for &p in net.parents(v) {
                    dag.add_edge(VarId(sub_id[p.index()]), VarId(sub_id[v.index()]))?;
                }
            }
        }
        let cpds = net
            .registry()
            .ids()
            .filter(|v| keep[v.index()])
            .map(|v| net.cpd(v).clone())
            .collect();
        let sub = BayesianNetwork::new(dag, cpds)?;
        let mut sub_evidence = Assignment::new(sub.len());
        for v in net.registry().ids() {
            if keep[v.index()] {
                if let Some(value) = evidence.get(v) {
                    sub_evidence.set_raw(VarId(sub_id[v.index()]), value);
                }
            }
        }
        let engine = EngineNet::from_network(&sub);
        let outcome = engine.run(&sub_evidence, cfg.max_iterations, cfg.elbo_rel_tol)?;
        for v in net.registry().ids() {
            if keep[v.index()] {
                let marginal = match outcome.views.view(VarId(sub_id[v.index()])) {
                    View::Probs(p) => Marginal::Discrete(p.clone()),
                    View::Moments { m1, m2 } => {
                        Marginal::Gaussian { mean: *m1, variance: (m2 - m1 * m1).max(0.0) }
                    }
                };
                marginals[v.index()] = Some(marginal);
            }
        }
    }
    for &v in net.topological_order() {
        if marginals[v.index()].is_some() {
            continue;
        }
        let parents: Vec<Marginal> = net
            .parents(v)
            .iter()
            .map(|&p| marginals[p.index()].clone().expect("parents precede children"))
            .collect();
        marginals[v.index()] = Some(mixture_marginal(net.cpd(v), &parents));
    }
    Ok(marginals.into_iter().map(|m| m.expect("all filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::super::tests::state_space_model;
    use super::*;
    use crate::model::{Dag, LinearGaussian, StateSpace, VariableRegistry};
    use approx::assert_relative_eq;

    #[test]
    fn linear_chain_filter_is_exact() {
        let dbn = state_space_model();
        let x = dbn.registry().by_name("X").unwrap().id();
        let y = dbn.registry().by_name("Y").unwrap().id();
        let mut filter = FactoredFilter::new(&dbn, InferenceConfig::default());

        // No evidence at slice 0: the belief over X is its prior.
        let empty = Assignment::new(2);
        let b0 = filter.step(&empty).unwrap().clone();
        let (m, v) = b0.marginal(x).mean_variance().unwrap();
        assert_relative_eq!(m, 0.0, epsilon = 1e-9);
        assert_relative_eq!(v, 1.0, epsilon = 1e-9);

        // Predict one slice ahead: N(0, 1 + 1) before seeing Y.
        let pred = filter.predictive(1).unwrap();
        let (pm, pv) = pred.marginal(x).mean_variance().unwrap();
        assert_relative_eq!(pm, 0.0, epsilon = 1e-9);
        assert_relative_eq!(pv, 2.0, epsilon = 1e-9);

        // Observe Y=1 at slice 1: posterior N(2/3, 2/3), the standard
        // predict/correct answer for this model.
        let mut e1 = Assignment::new(2);
        e1.set_raw(y, Value::Real(1.0));
        let b1 = filter.step(&e1).unwrap();
        let (fm, fv) = b1.marginal(x).mean_variance().unwrap();
        assert_relative_eq!(fm, 2.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(fv, 2.0 / 3.0, epsilon = 1e-9);
        assert_eq!(filter.time(), 1);
    }

    #[test]
    fn hmm_filter_matches_forward_algorithm() {
        // Assembled inline to keep edge bookkeeping obvious.
        let mut reg = VariableRegistry::new();
        let h = reg.add_latent("H", StateSpace::finite_states(2).unwrap()).unwrap();
        let o = reg.add_observable("O", StateSpace::finite_states(2).unwrap()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(h, o).unwrap();
        let emission = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let time0 = BayesianNetwork::new(
            dag,
            vec![Cpd::multinomial_root(vec![0.6, 0.4]), Cpd::multinomial(emission.clone())],
        )
        .unwrap();
        let transition = vec![vec![0.7, 0.3], vec![0.1, 0.9]];
        let dbn = DynamicBayesianNetwork::new(
            time0,
            vec![vec![TemporalParent::Previous(h)], vec![TemporalParent::Current(h)]],
            vec![Cpd::multinomial(transition.clone()), Cpd::multinomial(emission.clone())],
        )
        .unwrap();

        // Hand-rolled forward recursion on the same observations.
        let obs = [0usize, 1, 1, 0];
        let mut alpha = [0.6 * emission[0][obs[0]], 0.4 * emission[1][obs[0]]];
        let z: f64 = alpha[0] + alpha[1];
        alpha = [alpha[0] / z, alpha[1] / z];
        let mut filter = FactoredFilter::new(&dbn, InferenceConfig::default());
        let mut e = Assignment::new(2);
        e.set_raw(o, Value::Index(obs[0]));
        let b = filter.step(&e).unwrap();
        let probs = b.marginal(h).probabilities().unwrap().to_vec();
        assert_relative_eq!(probs[0], alpha[0], epsilon = 1e-9);

        for &sym in &obs[1..] {
            let predicted = [
                alpha[0] * transition[0][0] + alpha[1] * transition[1][0],
                alpha[0] * transition[0][1] + alpha[1] * transition[1][1],
            ];
            let mut corrected =
                [predicted[0] * emission[0][sym], predicted[1] * emission[1][sym]];
            let z = corrected[0] + corrected[1];
            corrected = [corrected[0] / z, corrected[1] / z];
            alpha = corrected;

            let mut e = Assignment::new(2);
            e.set_raw(o, Value::Index(sym));
            let b = filter.step(&e).unwrap();
            let probs = b.marginal(h).probabilities().unwrap().to_vec();
            assert_relative_eq!(probs[0], alpha[0], epsilon = 1e-9);
            assert_relative_eq!(probs[1], alpha[1], epsilon = 1e-9);
        }
        assert_eq!(filter.time(), 3);
    }

    #[test]
    fn missing_evidence_slices_only_predict() {
        let dbn = state_space_model();
        let x = dbn.registry().by_name("X").unwrap().id();
        let mut filter = FactoredFilter::new(&dbn, InferenceConfig::default());
        let empty = Assignment::new(2);
        filter.step(&empty).unwrap();
        filter.step(&empty).unwrap();
        let (m, v) = filter.belief().unwrap().marginal(x).mean_variance().unwrap();
        assert_relative_eq!(m, 0.0, epsilon = 1e-9);
        assert_relative_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn predictive_requires_a_first_step() {
        let dbn = state_space_model();
        let filter = FactoredFilter::new(&dbn, InferenceConfig::default());
        assert!(matches!(filter.predictive(1), Err(Error::Config(_))));
    }

    #[test]
    fn observed_chain_variable_pins_the_next_step() {
        // X itself observable and observed: the next-step prediction is
        // centered exactly on the observed value.
        let mut reg = VariableRegistry::new();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let dag = Dag::new(reg);
        let time0 =
            BayesianNetwork::new(dag, vec![Cpd::gaussian_root(0.0, 1.0)]).unwrap();
        let dbn = DynamicBayesianNetwork::new(
            time0,
            vec![vec![TemporalParent::Previous(x)]],
            vec![Cpd::gaussian(vec![LinearGaussian::new(0.0, vec![1.0], 0.25)])],
        )
        .unwrap();
        let mut filter = FactoredFilter::new(&dbn, InferenceConfig::default());
        let mut e = Assignment::new(1);
        e.set_raw(x, Value::Real(4.0));
        filter.step(&e).unwrap();
        let empty = Assignment::new(1);
        let b = filter.step(&empty).unwrap();
        let (m, v) = b.marginal(x).mean_variance().unwrap();
        assert_relative_eq!(m, 4.0, epsilon = 1e-9);
        assert_relative_eq!(v, 0.25, epsilon = 1e-9);
    }
}
