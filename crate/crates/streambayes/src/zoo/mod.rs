//! Ready-made latent-variable model families.
//!
//! Each constructor wires a classic structure over a data schema's
//! [`Attributes`] and returns it as a learnable spec: a mixture's latent
//! class above every attribute, a regression target under its covariates, a
//! hidden chain behind its per-slice emissions. Where latent components
//! would start out interchangeable, the priors are deterministically
//! staggered so mean-field learning can tell them apart.
//!
//! Structures outside the fixed list are assembled with a [`CustomBuilder`],
//! and [`Template`] maps the short command-line identifiers (`gmm`,
//! `kf:hidden=2`, `custom:model.json`) onto all of these.

mod builder;
mod id;

pub use builder::{custom_from_file, custom_from_json, new_builder, CustomBuilder, LatentKind};
pub use id::{Template, TemplateModel};

use crate::data::Attributes;
use crate::dynamic::{DynamicModelSpec, TemporalParent};
use crate::error::{Error, Result};
use crate::learning::{GaussianBlock, ModelSpec};
use crate::model::{Cpd, Dag, StateSpace, VarId, VariableRegistry};

/// Name of the latent class variable in mixture-shaped models.
pub const HIDDEN_VAR: &str = "HiddenVar";

/// A mixture of axis-aligned Gaussians: one latent class with `k` states,
/// parent of every attribute. All attributes must be real-valued.
///
/// The per-component intercept priors are spread over distinct means so the
/// components separate deterministically; see [`component_spread`].
pub fn gaussian_mixture(attrs: &Attributes, k: usize) -> Result<ModelSpec> {
    if k < 2 {
        return Err(Error::Config(format!("a mixture needs at least 2 components, got {k}")));
    }
    let mut reg = VariableRegistry::new();
    let mut obs = Vec::with_capacity(attrs.len());
    for a in attrs.iter() {
        if a.space.is_finite() {
            return Err(Error::TypeMismatch(format!(
                "`{}` is discrete; a Gaussian mixture takes real attributes only",
                a.name
            )));
        }
        obs.push(reg.add_observable(&a.name, a.space.clone())?);
    }
    let hidden = reg.add_latent(HIDDEN_VAR, StateSpace::finite_states(k)?)?;
    let mut dag = Dag::new(reg);
    for &v in &obs {
        dag.add_edge(hidden, v)?;
    }
    let mut spec = ModelSpec::new(dag)?;
    stagger_latent_mixtures(&mut spec)?;
    Ok(spec)
}

/// The classifier star: `class_attr` is the parent of every other attribute.
/// Discrete children get probability tables, real children one Gaussian per
/// class state.
pub fn naive_bayes(attrs: &Attributes, class_attr: &str) -> Result<ModelSpec> {
    let class_pos = attrs
        .position(class_attr)
        .ok_or_else(|| Error::Schema(format!("no attribute named `{class_attr}` for the class")))?;
    if !attrs.get(class_pos).expect("position is in range").space.is_finite() {
        return Err(Error::TypeMismatch(format!(
            "class `{class_attr}` must be a finite-state attribute"
        )));
    }
    let mut reg = VariableRegistry::new();
    let mut ids = Vec::with_capacity(attrs.len());
    for a in attrs.iter() {
        ids.push(reg.add_observable(&a.name, a.space.clone())?);
    }
    let class = ids[class_pos];
    let mut dag = Dag::new(reg);
    for (i, &v) in ids.iter().enumerate() {
        if i != class_pos {
            dag.add_edge(class, v)?;
        }
    }
    ModelSpec::new(dag)
}

/// Linear regression with conjugate priors: `target` is a Gaussian child of
/// every other attribute, with one coefficient per covariate. All columns
/// must be real-valued.
pub fn bayesian_linear_regression(attrs: &Attributes, target: &str) -> Result<ModelSpec> {
    let target_pos = attrs.position(target).ok_or_else(|| {
        Error::Schema(format!("no attribute named `{target}` for the regression target"))
    })?;
    for a in attrs.iter() {
        if a.space.is_finite() {
            return Err(Error::TypeMismatch(format!(
                "`{}` is discrete; linear regression takes real columns only",
                a.name
            )));
        }
    }
    let mut reg = VariableRegistry::new();
    let mut ids = Vec::with_capacity(attrs.len());
    for a in attrs.iter() {
        ids.push(reg.add_observable(&a.name, a.space.clone())?);
    }
    let mut dag = Dag::new(reg);
    for (i, &v) in ids.iter().enumerate() {
        if i != target_pos {
            dag.add_edge(v, ids[target_pos])?;
        }
    }
    ModelSpec::new(dag)
}

/// Factor analysis: `n_factors` latent standard-Gaussian factors, each
/// attribute a linear-Gaussian child of all of them. The factor
/// distributions are frozen at N(0, 1); only loadings, intercepts, and
/// noise variances are learned.
///
/// All-zero loading priors are a fixed point of mean-field learning (the
/// factor posterior never moves, so the loading statistics stay zero), so
/// each factor's loading priors are centered away from zero, at a
/// per-factor offset to keep the factors distinguishable.
pub fn factor_analysis(attrs: &Attributes, n_factors: usize) -> Result<ModelSpec> {
    if n_factors < 1 {
        return Err(Error::Config("factor analysis needs at least one factor".into()));
    }
    if n_factors >= attrs.len() {
        return Err(Error::Config(format!(
            "{n_factors} factors over {} attributes; factors must be fewer than attributes",
            attrs.len()
        )));
    }
    let mut reg = VariableRegistry::new();
    let mut obs = Vec::with_capacity(attrs.len());
    for a in attrs.iter() {
        if a.space.is_finite() {
            return Err(Error::TypeMismatch(format!(
                "`{}` is discrete; factor analysis takes real attributes only",
                a.name
            )));
        }
        obs.push(reg.add_observable(&a.name, a.space.clone())?);
    }
    let mut factors = Vec::with_capacity(n_factors);
    for j in 0..n_factors {
        factors.push(reg.add_latent(format!("Factor{j}"), StateSpace::real())?);
    }
    let mut dag = Dag::new(reg);
    for &v in &obs {
        for &f in &factors {
            dag.add_edge(f, v)?;
        }
    }
    let mut spec = ModelSpec::new(dag)?;
    for &f in &factors {
        spec.fix(f, Cpd::gaussian_root(0.0, 1.0))?;
    }
    for &v in &obs {
        let mut block = GaussianBlock::standard(n_factors);
        for (j, coeff) in block.coeffs.iter_mut().enumerate() {
            coeff.mean = (j + 1) as f64 / (n_factors + 1) as f64;
        }
        spec.set_gaussian_prior(v, vec![block])?;
    }
    Ok(spec)
}

/// A hidden Markov model: a latent `n_states` chain, with every attribute
/// emitted from the current state in each slice. The first slice is a plain
/// mixture.
pub fn hmm(attrs: &Attributes, n_states: usize) -> Result<DynamicModelSpec> {
    if n_states < 2 {
        return Err(Error::Config(format!(
            "a hidden Markov chain needs at least 2 states, got {n_states}"
        )));
    }
    let mut reg = VariableRegistry::new();
    let mut obs = Vec::with_capacity(attrs.len());
    for a in attrs.iter() {
        obs.push(reg.add_observable(&a.name, a.space.clone())?);
    }
    let hidden = reg.add_latent(HIDDEN_VAR, StateSpace::finite_states(n_states)?)?;
    let mut dag = Dag::new(reg);
    for &v in &obs {
        dag.add_edge(hidden, v)?;
    }
    let n = dag.len();
    let mut parents = vec![Vec::new(); n];
    parents[hidden.index()].push(TemporalParent::Previous(hidden));
    for &v in &obs {
        parents[v.index()].push(TemporalParent::Current(hidden));
    }
    let mut spec = DynamicModelSpec::new(dag, parents)?;
    for (&v, a) in obs.iter().zip(attrs.iter()) {
        if !a.space.is_finite() {
            spec.set_time0_gaussian_prior(v, component_spread(n_states, 0))?;
            spec.set_transition_gaussian_prior(v, component_spread(n_states, 0))?;
        }
    }
    Ok(spec)
}

/// A linear dynamical system: `n_hidden` latent Gaussian state variables
/// with a full linear transition from the previous slice, and every (real)
/// attribute a linear-Gaussian emission of the whole hidden vector.
pub fn kalman_filter(attrs: &Attributes, n_hidden: usize) -> Result<DynamicModelSpec> {
    if n_hidden < 1 {
        return Err(Error::Config("a state-space model needs at least 1 hidden dimension".into()));
    }
    let mut reg = VariableRegistry::new();
    let mut obs = Vec::with_capacity(attrs.len());
    for a in attrs.iter() {
        if a.space.is_finite() {
            return Err(Error::TypeMismatch(format!(
                "`{}` is discrete; a linear state-space model takes real attributes only",
                a.name
            )));
        }
        obs.push(reg.add_observable(&a.name, a.space.clone())?);
    }
    let mut hid = Vec::with_capacity(n_hidden);
    for i in 0..n_hidden {
        hid.push(reg.add_latent(format!("gaussianHiddenVar{i}"), StateSpace::real())?);
    }
    let mut dag = Dag::new(reg);
    for &v in &obs {
        for &h in &hid {
            dag.add_edge(h, v)?;
        }
    }
    let n = dag.len();
    let mut parents = vec![Vec::new(); n];
    for &h in &hid {
        for &hp in &hid {
            parents[h.index()].push(TemporalParent::Previous(hp));
        }
    }
    for &v in &obs {
        for &h in &hid {
            parents[v.index()].push(TemporalParent::Current(h));
        }
    }
    DynamicModelSpec::new(dag, parents)
}

/// `n_cfg` standard Gaussian blocks whose intercept prior means are spread
/// over `j - (n_cfg - 1) / 2`, one per configuration.
///
/// Identical blocks are a fixed point of mean-field learning for a latent
/// mixture: every component explains the data equally well, the
/// responsibilities stay uniform, and the components never separate.
/// Distinct prior means break the tie the same way on every run.
pub(crate) fn component_spread(n_cfg: usize, n_coeffs: usize) -> Vec<GaussianBlock> {
    (0..n_cfg)
        .map(|j| {
            let mut b = GaussianBlock::standard(n_coeffs);
            b.base.mean = j as f64 - (n_cfg as f64 - 1.0) / 2.0;
            b
        })
        .collect()
}

/// Applies [`component_spread`] to every real observable whose discrete
/// parents include a latent variable. Observed discrete parents need no
/// help: their data breaks the symmetry.
pub(crate) fn stagger_latent_mixtures(spec: &mut ModelSpec) -> Result<()> {
    let ids: Vec<VarId> = spec.registry().ids().collect();
    for v in ids {
        let var = spec.registry().get(v);
        if var.space().is_finite() || var.is_latent() {
            continue;
        }
        let mixes_over_latent = spec.structure().disc_parents[v.index()]
            .iter()
            .any(|&p| spec.registry().get(p).is_latent());
        let n_cfg = spec.structure().config_count(v);
        if mixes_over_latent && n_cfg > 1 {
            let n_coeffs = spec.structure().cont_parents[v.index()].len();
            spec.set_gaussian_prior(v, component_spread(n_cfg, n_coeffs))?;
        }
    }
    Ok(())
}
