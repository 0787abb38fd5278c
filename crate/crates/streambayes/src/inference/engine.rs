//! Coordinate-ascent engine for mean-field variational inference.
//!
//! The engine runs on an *expected network*: each conditional distribution
//! is summarized by the handful of parameter expectations the variational
//! objective needs. A concrete [`BayesianNetwork`] supplies exact values;
//! during learning the same quantities are posterior expectations of the
//! parameters, so single-model queries and learning share every line of the
//! update code.
//!
//! Each update maximizes the evidence lower bound over one factor while the
//! others stay fixed, so the bound never decreases. Both update kinds reduce
//! to one primitive: the expected log likelihood of a single family
//! ([`EngineNet::family_ell`]) with one variable pinned either to a state or
//! to a point value.

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::config::config_unrank;
use crate::model::{Assignment, BayesianNetwork, Cpd, StructureIndex, Value, VarId};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// What the rest of the network currently believes about one variable:
/// a state distribution for finite variables, first and second moments for
/// real ones. Observations are degenerate views.
#[derive(Clone, Debug)]
pub(crate) enum View {
    Probs(Vec<f64>),
    Moments { m1: f64, m2: f64 },
}

impl View {
    pub(crate) fn probs(&self) -> &[f64] {
        match self {
            View::Probs(p) => p,
            View::Moments { .. } => unreachable!("moment view of a finite variable"),
        }
    }

    pub(crate) fn m1(&self) -> f64 {
        match self {
            View::Moments { m1, .. } => *m1,
            View::Probs(_) => unreachable!("state view of a real variable"),
        }
    }

    pub(crate) fn m2(&self) -> f64 {
        match self {
            View::Moments { m2, .. } => *m2,
            View::Probs(_) => unreachable!("state view of a real variable"),
        }
    }
}

/// Per-variable views plus observation flags; the evolving state of a
/// variational fixed-point computation.
#[derive(Clone, Debug)]
pub(crate) struct Views {
    pub(crate) views: Vec<View>,
    pub(crate) observed: Vec<bool>,
}

impl Views {
    pub(crate) fn view(&self, v: VarId) -> &View {
        &self.views[v.index()]
    }

    pub(crate) fn is_observed(&self, v: VarId) -> bool {
        self.observed[v.index()]
    }

    /// Joint probability of one discrete-parent configuration under the
    /// mean-field product of the parents' views.
    pub(crate) fn config_probability(&self, parents: &[VarId], cards: &[usize], config: usize) -> f64 {
        let states = config_unrank(cards, config);
        parents
            .iter()
            .zip(&states)
            .map(|(p, s)| self.view(*p).probs()[*s])
            .product()
    }
}

/// Expected parameters of one Gaussian configuration. For a concrete model
/// these are deterministic transforms of `(intercept, coeffs, variance)`;
/// under a parameter posterior they are genuine expectations, including the
/// coupling between the intercept and the precision.
#[derive(Clone, Debug)]
pub(crate) struct GaussExpect {
    pub e_tau: f64,
    pub e_log_tau: f64,
    pub e_tau_alpha: f64,
    pub e_tau_alpha2: f64,
    pub e_beta: Vec<f64>,
    pub e_beta2: Vec<f64>,
}

impl GaussExpect {
    /// Expected intercept, recovered from the coupled moments.
    pub(crate) fn e_alpha(&self) -> f64 {
        self.e_tau_alpha / self.e_tau
    }
}

/// Expected conditional distribution of one variable.
#[derive(Clone, Debug)]
pub(crate) enum ExpCpd {
    /// `e_log[config][state]` is the expected log probability.
    Discrete { e_log: Vec<Vec<f64>> },
    Gaussian { configs: Vec<GaussExpect> },
}

impl ExpCpd {
    pub(crate) fn from_cpd(cpd: &Cpd) -> ExpCpd {
        match cpd {
            Cpd::Multinomial(m) => ExpCpd::Discrete {
                e_log: m
                    .rows()
                    .iter()
                    .map(|row| row.iter().map(|p| p.ln()).collect())
                    .collect(),
            },
            Cpd::Gaussian(g) => ExpCpd::Gaussian {
                configs: g
                    .configs()
                    .iter()
                    .map(|lg| {
                        let tau = 1.0 / lg.variance;
                        GaussExpect {
                            e_tau: tau,
                            e_log_tau: tau.ln(),
                            e_tau_alpha: tau * lg.intercept,
                            e_tau_alpha2: tau * lg.intercept * lg.intercept,
                            e_beta: lg.coeffs.clone(),
                            e_beta2: lg.coeffs.iter().map(|b| b * b).collect(),
                        }
                    })
                    .collect(),
            },
        }
    }
}

/// A network in expectation form, borrowing its structure.
pub(crate) struct EngineNet<'a> {
    pub(crate) structure: &'a StructureIndex,
    pub(crate) cpds: Vec<ExpCpd>,
    /// Cardinality for finite variables, `None` for real ones.
    pub(crate) cards: Vec<Option<usize>>,
}

/// Overrides one variable's view during a family evaluation.
type Pin<'p> = Option<(VarId, &'p View)>;

fn pinned<'v>(views: &'v Views, pin: Pin<'v>, v: VarId) -> &'v View {
    match pin {
        Some((pv, view)) if pv == v => view,
        _ => views.view(v),
    }
}

impl<'a> EngineNet<'a> {
    pub(crate) fn from_network(net: &'a BayesianNetwork) -> EngineNet<'a> {
        let cpds = net.cpds().iter().map(ExpCpd::from_cpd).collect();
        let cards = net
            .registry()
            .iter()
            .map(|v| v.space().cardinality())
            .collect();
        EngineNet { structure: net.structure(), cpds, cards }
    }

    pub(crate) fn new(
        structure: &'a StructureIndex,
        cpds: Vec<ExpCpd>,
        cards: Vec<Option<usize>>,
    ) -> EngineNet<'a> {
        EngineNet { structure, cpds, cards }
    }

    pub(crate) fn len(&self) -> usize {
        self.cpds.len()
    }

    fn card(&self, v: VarId) -> usize {
        self.cards[v.index()].expect("finite variable")
    }

    /// Expected log likelihood of the family rooted at `child` under the
    /// views, with at most one variable's view replaced by `pin`.
    pub(crate) fn family_ell(&self, child: VarId, views: &Views, pin: Pin<'_>) -> f64 {
        let dp = &self.structure.disc_parents[child.index()];
        let cards = &self.structure.disc_cards[child.index()];
        let mut total = 0.0;
        match &self.cpds[child.index()] {
            ExpCpd::Discrete { e_log } => {
                let child_probs = pinned(views, pin, child).probs();
                for (config, states) in
                    crate::model::config::configs(cards).enumerate()
                {
                    let w: f64 = dp
                        .iter()
                        .zip(&states)
                        .map(|(p, s)| pinned(views, pin, *p).probs()[*s])
                        .product();
                    if w <= 0.0 {
                        continue;
                    }
                    let row = &e_log[config];
                    for (t, &q) in child_probs.iter().enumerate() {
                        if q > 0.0 {
                            total += w * q * row[t];
                        }
                    }
                }
            }
            ExpCpd::Gaussian { configs } => {
                let cp = &self.structure.cont_parents[child.index()];
                let z = pinned(views, pin, child);
                let (z1, z2) = (z.m1(), z.m2());
                let xm: Vec<(f64, f64)> = cp
                    .iter()
                    .map(|p| {
                        let v = pinned(views, pin, *p);
                        (v.m1(), v.m2())
                    })
                    .collect();
                for (config, states) in
                    crate::model::config::configs(cards).enumerate()
                {
                    let w: f64 = dp
                        .iter()
                        .zip(&states)
                        .map(|(p, s)| pinned(views, pin, *p).probs()[*s])
                        .product();
                    if w <= 0.0 {
                        continue;
                    }
                    let g = &configs[config];
                    // E[tau (z - alpha - sum_c beta_c x_c)^2] under the
                    // mean-field product; cross terms factor.
                    let bx: f64 =
                        g.e_beta.iter().zip(&xm).map(|(b, (m1, _))| b * m1).sum();
                    let mut quad = g.e_tau * z2 - 2.0 * z1 * (g.e_tau_alpha + g.e_tau * bx)
                        + g.e_tau_alpha2
                        + 2.0 * g.e_tau_alpha * bx;
                    let sq: f64 =
                        g.e_beta2.iter().zip(&xm).map(|(b2, (_, m2))| b2 * m2).sum();
                    let mut cross = 0.0;
                    for c in 0..xm.len() {
                        for c2 in (c + 1)..xm.len() {
                            cross += g.e_beta[c] * g.e_beta[c2] * xm[c].0 * xm[c2].0;
                        }
                    }
                    quad += g.e_tau * (sq + 2.0 * cross);
                    total += w * (0.5 * g.e_log_tau - 0.5 * LN_2PI - 0.5 * quad);
                }
            }
        }
        total
    }

    /// Families whose expected log likelihood involves `v`: its own plus one
    /// per child.
    fn touched_ell(&self, v: VarId, views: &Views, pin: Pin<'_>) -> f64 {
        let mut total = self.family_ell(v, views, pin);
        for &c in &self.structure.children[v.index()] {
            total += self.family_ell(c, views, pin);
        }
        total
    }

    /// One coordinate update of a latent finite variable.
    fn update_discrete(&self, v: VarId, views: &mut Views) -> Result<()> {
        let k = self.card(v);
        let mut scores = vec![0.0; k];
        for s in 0..k {
            let mut delta = vec![0.0; k];
            delta[s] = 1.0;
            let pin = View::Probs(delta);
            scores[s] = self.touched_ell(v, views, Some((v, &pin)));
        }
        let z = log_sum_exp(&scores);
        if !z.is_finite() {
            return Err(Error::Numerical(format!(
                "all states of variable {} are ruled out",
                v.index()
            )));
        }
        let probs: Vec<f64> = scores.iter().map(|s| (s - z).exp()).collect();
        views.views[v.index()] = View::Probs(probs);
        Ok(())
    }

    /// One coordinate update of a latent real variable. The objective
    /// restricted to this variable is an exact quadratic, so three centered
    /// evaluations recover its coefficients.
    fn update_gaussian(&self, v: VarId, views: &mut Views) -> Result<()> {
        let center = views.view(v).m1();
        let g = |z: f64| {
            let pin = View::Moments { m1: z, m2: z * z };
            self.touched_ell(v, views, Some((v, &pin)))
        };
        let (lo, mid, hi) = (g(center - 1.0), g(center), g(center + 1.0));
        let a = 0.5 * (hi + lo) - mid;
        let b = 0.5 * (hi - lo);
        let precision = -2.0 * a;
        if !(precision > 0.0) || !precision.is_finite() {
            return Err(Error::Numerical(format!(
                "non-positive precision while updating variable {}",
                v.index()
            )));
        }
        let mean = (b + precision * center) / precision;
        let variance = 1.0 / precision;
        views.views[v.index()] =
            View::Moments { m1: mean, m2: mean * mean + variance };
        Ok(())
    }

    /// Entropy of the variational factor for one latent variable.
    fn factor_entropy(&self, v: VarId, views: &Views) -> f64 {
        match views.view(v) {
            View::Probs(p) => -p.iter().filter(|q| **q > 0.0).map(|q| q * q.ln()).sum::<f64>(),
            View::Moments { m1, m2 } => {
                let var = (m2 - m1 * m1).max(f64::MIN_POSITIVE);
                0.5 * ((2.0 * std::f64::consts::PI * var).ln() + 1.0)
            }
        }
    }

    /// Evidence lower bound of the current views: expected complete-data
    /// log likelihood plus the entropy of the latent factors.
    pub(crate) fn elbo(&self, views: &Views) -> f64 {
        let mut total = 0.0;
        for i in 0..self.len() {
            let v = VarId(i);
            total += self.family_ell(v, views, None);
            if !views.is_observed(v) {
                total += self.factor_entropy(v, views);
            }
        }
        total
    }

    /// Initial views: observed variables get degenerate views; latent finite
    /// variables start uniform; latent real variables start at the forward-
    /// propagated expected mean with unit variance.
    pub(crate) fn init_views(&self, evidence: &Assignment) -> Result<Views> {
        let n = self.len();
        let mut views = Views {
            views: vec![View::Moments { m1: 0.0, m2: 1.0 }; n],
            observed: vec![false; n],
        };
        for i in 0..n {
            if let Some(value) = evidence.get(VarId(i)) {
                views.observed[i] = true;
                views.views[i] = match value {
                    Value::Index(s) => {
                        let mut p = vec![0.0; self.card(VarId(i))];
                        p[s] = 1.0;
                        View::Probs(p)
                    }
                    Value::Real(x) => View::Moments { m1: x, m2: x * x },
                };
            }
        }
        for &v in &self.structure.topo {
            let i = v.index();
            if views.observed[i] {
                continue;
            }
            match &self.cpds[i] {
                ExpCpd::Discrete { .. } => {
                    let k = self.card(v);
                    views.views[i] = View::Probs(vec![1.0 / k as f64; k]);
                }
                ExpCpd::Gaussian { configs } => {
                    let dp = &self.structure.disc_parents[i];
                    let cards = &self.structure.disc_cards[i];
                    let cp = &self.structure.cont_parents[i];
                    let pm: Vec<f64> = cp.iter().map(|p| views.view(*p).m1()).collect();
                    let mut mean = 0.0;
                    for (config, _) in crate::model::config::configs(cards).enumerate() {
                        let w = views.config_probability(dp, cards, config);
                        if w <= 0.0 {
                            continue;
                        }
                        let g = &configs[config];
                        let bx: f64 =
                            g.e_beta.iter().zip(&pm).map(|(b, m)| b * m).sum();
                        mean += w * (g.e_alpha() + bx);
                    }
                    views.views[i] = View::Moments { m1: mean, m2: mean * mean + 1.0 };
                }
            }
        }
        Ok(views)
    }

    /// Runs coordinate ascent to convergence of the evidence lower bound.
    pub(crate) fn run(
        &self,
        evidence: &Assignment,
        max_iterations: usize,
        rel_tol: f64,
    ) -> Result<VmpOutcome> {
        let mut views = self.init_views(evidence)?;
        let mut trace: Vec<f64> = Vec::with_capacity(16);
        let mut converged = false;
        for _ in 0..max_iterations {
            for &v in &self.structure.topo {
                if views.is_observed(v) {
                    continue;
                }
                match &self.cpds[v.index()] {
                    ExpCpd::Discrete { .. } => self.update_discrete(v, &mut views)?,
                    ExpCpd::Gaussian { .. } => self.update_gaussian(v, &mut views)?,
                }
            }
            let elbo = self.elbo(&views);
            if !elbo.is_finite() {
                return Err(Error::Numerical(format!(
                    "evidence lower bound became non-finite ({elbo})"
                )));
            }
            if let Some(&prev) = trace.last() {
                let scale: f64 = prev.abs().max(elbo.abs()).max(1.0);
                if (elbo - prev).abs() / scale < rel_tol {
                    trace.push(elbo);
                    converged = true;
                    break;
                }
            }
            trace.push(elbo);
        }
        Ok(VmpOutcome { views, elbo_trace: trace, converged })
    }
}

/// Result of a coordinate-ascent run.
pub(crate) struct VmpOutcome {
    pub(crate) views: Views,
    pub(crate) elbo_trace: Vec<f64>,
    pub(crate) converged: bool,
}
