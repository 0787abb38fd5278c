//! Learner state persistence.
//!
//! A saved learner is a regular model file (the posterior-mean network,
//! loadable by [`crate::deserialize_model`] as-is) with two extra top-level
//! keys: `priors` holds the per-variable prior blocks and `posterior` holds
//! the current blocks plus the absorbed-instance count, so a later process
//! can keep updating exactly where this one stopped.

use super::{Block, GaussianBlock, Learner, LearnerConfig, ModelSpec};
use crate::ef::{Dirichlet, Gaussian, NormalGamma};
use crate::error::{Error, Result};
use crate::model::{document_to_network, network_to_document, ModelDoc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Serialize, Deserialize)]
struct LearnerDoc {
    #[serde(flatten)]
    model: ModelDoc,
    priors: BTreeMap<String, BlockDoc>,
    posterior: PosteriorDoc,
}

#[derive(Serialize, Deserialize)]
struct PosteriorDoc {
    seen: f64,
    steps: usize,
    blocks: BTreeMap<String, BlockDoc>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct BlockDoc {
    /// `"dirichlet"`, `"gaussian"`, or `"fixed"`.
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    configs: Option<Vec<GaussBlockDoc>>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct GaussBlockDoc {
    mean: f64,
    scale: f64,
    shape: f64,
    rate: f64,
    coeffs: Vec<CoeffDoc>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct CoeffDoc {
    mean: f64,
    variance: f64,
}

pub(crate) fn block_to_doc(block: &Block) -> BlockDoc {
    match block {
        Block::Fixed(_) => BlockDoc { kind: "fixed".into(), rows: None, configs: None },
        Block::Dirichlet(rows) => BlockDoc {
            kind: "dirichlet".into(),
            rows: Some(rows.iter().map(|d| d.alphas.clone()).collect()),
            configs: None,
        },
        Block::Gaussian(configs) => BlockDoc {
            kind: "gaussian".into(),
            rows: None,
            configs: Some(
                configs
                    .iter()
                    .map(|c| GaussBlockDoc {
                        mean: c.base.mean,
                        scale: c.base.scale,
                        shape: c.base.shape,
                        rate: c.base.rate,
                        coeffs: c
                            .coeffs
                            .iter()
                            .map(|g| CoeffDoc { mean: g.mean, variance: g.variance })
                            .collect(),
                    })
                    .collect(),
            ),
        },
    }
}

/// `fixed` is resolved from the stored network distribution for `name`.
pub(crate) fn doc_to_block(doc: &BlockDoc, name: &str, fixed: impl FnOnce() -> Block) -> Result<Block> {
    match doc.kind.as_str() {
        "fixed" => Ok(fixed()),
        "dirichlet" => {
            let rows = doc.rows.as_ref().ok_or_else(|| {
                Error::Schema(format!("dirichlet block for `{name}` is missing `rows`"))
            })?;
            Ok(Block::Dirichlet(
                rows.iter().map(|r| Dirichlet { alphas: r.clone() }).collect(),
            ))
        }
        "gaussian" => {
            let configs = doc.configs.as_ref().ok_or_else(|| {
                Error::Schema(format!("gaussian block for `{name}` is missing `configs`"))
            })?;
            Ok(Block::Gaussian(
                configs
                    .iter()
                    .map(|c| GaussianBlock {
                        base: NormalGamma {
                            mean: c.mean,
                            scale: c.scale,
                            shape: c.shape,
                            rate: c.rate,
                        },
                        coeffs: c
                            .coeffs
                            .iter()
                            .map(|g| Gaussian { mean: g.mean, variance: g.variance })
                            .collect(),
                    })
                    .collect(),
            ))
        }
        other => Err(Error::Schema(format!(
            "block for `{name}` has unknown kind `{other}`"
        ))),
    }
}

/// Serializes a learner to pretty-printed JSON. The file doubles as a plain
/// model file carrying the posterior-mean network, so saving requires the
/// point estimate to exist (every Gamma shape > 1).
pub fn learner_to_json(learner: &Learner) -> Result<String> {
    let net = learner.point_estimate()?;
    let model = network_to_document(&net);
    let mut priors = BTreeMap::new();
    let mut blocks = BTreeMap::new();
    for v in learner.spec().registry().ids() {
        let name = learner.spec().dag().var(v).name().to_string();
        priors.insert(name.clone(), block_to_doc(learner.spec().block(v)));
        blocks.insert(name, block_to_doc(learner.posterior(v)));
    }
    let doc = LearnerDoc {
        model,
        priors,
        posterior: PosteriorDoc {
            seen: learner.seen(),
            steps: learner.svi_steps(),
            blocks,
        },
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Restores a learner saved by [`learner_to_json`]. The runtime settings
/// (`cfg`) are not part of the file and come from the caller.
pub fn learner_from_json(text: &str, cfg: LearnerConfig) -> Result<Learner> {
    let doc: LearnerDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let net = document_to_network(doc.model)?;
    let mut spec = ModelSpec::new(net.dag().clone())?;
    for v in net.registry().ids() {
        let name = net.var(v).name();
        let prior = doc
            .priors
            .get(name)
            .ok_or_else(|| Error::Schema(format!("no prior block for `{name}`")))?;
        match doc_to_block(prior, name, || Block::Fixed(net.cpd(v).clone()))? {
            Block::Fixed(cpd) => {
                spec.fix(v, cpd)?;
            }
            Block::Dirichlet(rows) => {
                spec.set_dirichlet_prior(v, rows)?;
            }
            Block::Gaussian(configs) => {
                spec.set_gaussian_prior(v, configs)?;
            }
        }
    }
    let mut posterior = Vec::with_capacity(net.len());
    for v in net.registry().ids() {
        let name = net.var(v).name();
        let block = doc
            .posterior
            .blocks
            .get(name)
            .ok_or_else(|| Error::Schema(format!("no posterior block for `{name}`")))?;
        posterior.push(doc_to_block(block, name, || Block::Fixed(net.cpd(v).clone()))?);
    }
    Learner::from_parts(spec, cfg, posterior, doc.posterior.seen, doc.posterior.steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deserialize_model;
    use crate::model::{Assignment, Dag, StateSpace, Value, VarId, VariableRegistry};

    fn trained_learner() -> Learner {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, x).unwrap();
        let spec = ModelSpec::new(dag).unwrap();
        let mut learner = Learner::new(spec);
        let mut batch = Vec::new();
        for i in 0..12 {
            let mut row = Assignment::new(2);
            row.set_raw(VarId(0), Value::Index(i % 2));
            row.set_raw(VarId(1), Value::Real((i % 2) as f64 * 3.0 + 0.25 * (i % 4) as f64));
            batch.push(row);
        }
        learner.update(&batch).unwrap();
        learner
    }

    #[test]
    fn saved_state_round_trips_and_resumes() {
        let learner = trained_learner();
        let text = learner_to_json(&learner).unwrap();
        let back = learner_from_json(&text, LearnerConfig::default()).unwrap();
        assert_eq!(back.seen(), learner.seen());
        for v in learner.spec().registry().ids() {
            assert_eq!(back.posterior(v), learner.posterior(v));
            assert_eq!(back.spec().block(v), learner.spec().block(v));
        }
        // Resumed learning behaves as if the process never stopped.
        let mut row = Assignment::new(2);
        row.set_raw(VarId(0), Value::Index(0));
        row.set_raw(VarId(1), Value::Real(0.5));
        let mut a = learner;
        let mut b = back;
        a.update(std::slice::from_ref(&row)).unwrap();
        b.update(std::slice::from_ref(&row)).unwrap();
        let id = a.spec().registry().by_name("X").unwrap().id();
        assert_eq!(a.posterior(id), b.posterior(id));
    }

    #[test]
    fn saved_learner_loads_as_a_plain_model() {
        let learner = trained_learner();
        let text = learner_to_json(&learner).unwrap();
        let net = deserialize_model(text.as_bytes()).unwrap();
        let expected = learner.point_estimate().unwrap();
        assert_eq!(net.cpds(), expected.cpds());
    }

    #[test]
    fn bad_block_kinds_are_rejected() {
        let learner = trained_learner();
        let text = learner_to_json(&learner).unwrap().replace("\"dirichlet\"", "\"mystery\"");
        assert!(matches!(
            learner_from_json(&text, LearnerConfig::default()),
            Err(Error::Schema(_))
        ));
    }
}
