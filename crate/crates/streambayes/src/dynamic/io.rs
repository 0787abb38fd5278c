//! JSON serialization for dynamic models and dynamic learner state.
//!
//! Format `streambayes-dbn-1`: one JSON object with keys `format`,
//! `variables`, `time0`, and `transition`. The two slice sections each hold
//! `parents` and `cpds` maps exactly like a static model file; transition
//! parent names carry the `@prev` suffix when they refer to the previous
//! slice. Dynamic learner files add `priors` and `posterior` keys on top,
//! mirroring the static learner format, and still load as plain dynamic
//! models. Saving a learner finalizes any sequence that is still open.

use super::learner::{DynamicLearner, DynamicModelSpec};
use super::{DynamicBayesianNetwork, TemporalParent, PREVIOUS_SUFFIX};
use crate::error::{Error, Result};
use crate::learning::{block_to_doc, doc_to_block, Block, BlockDoc, LearnerConfig};
use crate::model::{
    cpd_from_doc, cpd_to_doc, registry_from_docs, var_to_doc, BayesianNetwork, CpdDoc, CpdKind,
    Dag, VarDoc,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

/// Version tag written to and required from every dynamic model file.
pub const DYNAMIC_MODEL_FORMAT: &str = "streambayes-dbn-1";

#[derive(Serialize, Deserialize)]
struct DynamicModelDoc {
    format: String,
    variables: Vec<VarDoc>,
    time0: SliceDoc,
    transition: SliceDoc,
}

/// Parent lists and distributions of one slice, keyed by variable name.
#[derive(Serialize, Deserialize)]
struct SliceDoc {
    parents: BTreeMap<String, Vec<String>>,
    cpds: BTreeMap<String, CpdDoc>,
}

#[derive(Serialize, Deserialize)]
struct DynamicLearnerDoc {
    #[serde(flatten)]
    model: DynamicModelDoc,
    priors: SliceBlocks,
    posterior: DynamicPosteriorDoc,
}

#[derive(Serialize, Deserialize)]
struct SliceBlocks {
    time0: BTreeMap<String, BlockDoc>,
    transition: BTreeMap<String, BlockDoc>,
}

#[derive(Serialize, Deserialize)]
struct DynamicPosteriorDoc {
    seen: f64,
    #[serde(flatten)]
    blocks: SliceBlocks,
}

fn dbn_to_document(dbn: &DynamicBayesianNetwork) -> DynamicModelDoc {
    let net = dbn.time0();
    let mut variables = Vec::new();
    let mut time0 = SliceDoc { parents: BTreeMap::new(), cpds: BTreeMap::new() };
    let mut transition = SliceDoc { parents: BTreeMap::new(), cpds: BTreeMap::new() };
    for v in net.registry().ids() {
        let var = net.var(v);
        let name = var.name().to_string();
        variables.push(var_to_doc(var));
        time0.parents.insert(
            name.clone(),
            net.parents(v).iter().map(|&p| net.var(p).name().to_string()).collect(),
        );
        time0.cpds.insert(name.clone(), cpd_to_doc(net.cpd(v), net.kind(v).tag()));

        let tps = dbn.transition_parents(v);
        transition.parents.insert(
            name.clone(),
            tps.iter()
                .map(|tp| match tp {
                    TemporalParent::Current(c) => net.var(*c).name().to_string(),
                    TemporalParent::Previous(p) => {
                        format!("{}{PREVIOUS_SUFFIX}", net.var(*p).name())
                    }
                })
                .collect(),
        );
        let kind = CpdKind::derive(
            var.space().is_finite(),
            tps.iter().any(|tp| net.var(tp.var()).space().is_finite()),
            tps.iter().any(|tp| !net.var(tp.var()).space().is_finite()),
        );
        transition.cpds.insert(name, cpd_to_doc(dbn.transition_cpd(v), kind.tag()));
    }
    DynamicModelDoc { format: DYNAMIC_MODEL_FORMAT.to_string(), variables, time0, transition }
}

fn document_to_dbn(doc: DynamicModelDoc) -> Result<DynamicBayesianNetwork> {
    if doc.format != DYNAMIC_MODEL_FORMAT {
        return Err(Error::Schema(format!(
            "unsupported model format `{}`, expected `{DYNAMIC_MODEL_FORMAT}`",
            doc.format
        )));
    }
    let mut dag = Dag::new(registry_from_docs(&doc.variables)?);
    for v in &doc.variables {
        let child = dag.registry().by_name(&v.name)?.id();
        let plist = doc
            .time0
            .parents
            .get(&v.name)
            .ok_or_else(|| Error::Schema(format!("no first-slice parent list for `{}`", v.name)))?;
        for pname in plist {
            let parent = dag.registry().by_name(pname)?.id();
            dag.add_edge(parent, child)?;
        }
    }
    let mut cpds0 = Vec::with_capacity(doc.variables.len());
    for v in &doc.variables {
        let c = doc
            .time0
            .cpds
            .get(&v.name)
            .ok_or_else(|| Error::Schema(format!("no first-slice distribution for `{}`", v.name)))?;
        cpds0.push(cpd_from_doc(c, &v.name)?);
    }
    let time0 = BayesianNetwork::new(dag, cpds0)?;

    let mut parents = Vec::with_capacity(doc.variables.len());
    let mut cpds = Vec::with_capacity(doc.variables.len());
    for v in &doc.variables {
        let plist = doc
            .transition
            .parents
            .get(&v.name)
            .ok_or_else(|| Error::Schema(format!("no transition parent list for `{}`", v.name)))?;
        let mut list = Vec::with_capacity(plist.len());
        for pname in plist {
            list.push(match pname.strip_suffix(PREVIOUS_SUFFIX) {
                Some(stripped) => {
                    TemporalParent::Previous(time0.registry().by_name(stripped)?.id())
                }
                None => TemporalParent::Current(time0.registry().by_name(pname)?.id()),
            });
        }
        parents.push(list);
        let c = doc
            .transition
            .cpds
            .get(&v.name)
            .ok_or_else(|| Error::Schema(format!("no transition distribution for `{}`", v.name)))?;
        cpds.push(cpd_from_doc(c, &v.name)?);
    }
    let dbn = DynamicBayesianNetwork::new(time0, parents, cpds)?;
    for v in dbn.registry().ids() {
        let name = dbn.registry().get(v).name();
        let declared = &doc.transition.cpds[name].kind;
        let derived = CpdKind::derive(
            dbn.registry().get(v).space().is_finite(),
            dbn.transition_parents(v)
                .iter()
                .any(|tp| dbn.registry().get(tp.var()).space().is_finite()),
            dbn.transition_parents(v)
                .iter()
                .any(|tp| !dbn.registry().get(tp.var()).space().is_finite()),
        );
        match CpdKind::from_tag(declared) {
            Some(k) if k == derived => {}
            _ => {
                return Err(Error::Validation {
                    variable: name.to_string(),
                    rule: format!(
                        "declared transition kind `{declared}` does not match structure `{}`",
                        derived.tag()
                    ),
                })
            }
        }
    }
    Ok(dbn)
}

/// Writes a dynamic network as pretty-printed JSON; output bytes are
/// deterministic for a given model.
pub fn serialize_dynamic_model<W: Write>(dbn: &DynamicBayesianNetwork, mut sink: W) -> Result<()> {
    let doc = dbn_to_document(dbn);
    serde_json::to_writer_pretty(&mut sink, &doc)?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// In-memory variant of [`serialize_dynamic_model`].
pub fn serialize_dynamic_model_to_string(dbn: &DynamicBayesianNetwork) -> Result<String> {
    let mut buf = Vec::new();
    serialize_dynamic_model(dbn, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Reads and validates a dynamic model written by
/// [`serialize_dynamic_model`].
pub fn deserialize_dynamic_model<R: Read>(source: R) -> Result<DynamicBayesianNetwork> {
    let doc: DynamicModelDoc = serde_json::from_reader(source).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    document_to_dbn(doc)
}

/// Serializes a dynamic learner to pretty-printed JSON. The file doubles as
/// a plain dynamic model file carrying the posterior-mean network. The
/// carried belief of an open sequence is not stored: a restored learner
/// starts fresh sequences only.
pub fn dynamic_learner_to_json(learner: &DynamicLearner) -> Result<String> {
    let dbn = learner.point_estimate()?;
    let model = dbn_to_document(&dbn);
    let mut priors = SliceBlocks { time0: BTreeMap::new(), transition: BTreeMap::new() };
    let mut blocks = SliceBlocks { time0: BTreeMap::new(), transition: BTreeMap::new() };
    for v in learner.spec().registry().ids() {
        let name = learner.spec().registry().get(v).name().to_string();
        priors.time0.insert(name.clone(), block_to_doc(learner.spec().time0_block(v)));
        priors.transition.insert(name.clone(), block_to_doc(learner.spec().transition_block(v)));
        blocks.time0.insert(name.clone(), block_to_doc(learner.time0_posterior(v)));
        blocks.transition.insert(name, block_to_doc(learner.transition_posterior(v)));
    }
    let doc = DynamicLearnerDoc {
        model,
        priors,
        posterior: DynamicPosteriorDoc { seen: learner.seen(), blocks },
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Restores a dynamic learner saved by [`dynamic_learner_to_json`]. Runtime
/// settings (`cfg`) are not part of the file and come from the caller.
pub fn dynamic_learner_from_json(text: &str, cfg: LearnerConfig) -> Result<DynamicLearner> {
    let doc: DynamicLearnerDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let dbn = document_to_dbn(doc.model)?;
    let mut spec = DynamicModelSpec::new(
        dbn.time0().dag().clone(),
        dbn.transition_parent_lists().to_vec(),
    )?;
    for v in dbn.registry().ids() {
        let name = dbn.registry().get(v).name();
        let prior = doc
            .priors
            .time0
            .get(name)
            .ok_or_else(|| Error::Schema(format!("no first-slice prior block for `{name}`")))?;
        match doc_to_block(prior, name, || Block::Fixed(dbn.time0().cpd(v).clone()))? {
            Block::Fixed(cpd) => {
                spec.fix_time0(v, cpd)?;
            }
            Block::Dirichlet(rows) => {
                spec.set_time0_dirichlet_prior(v, rows)?;
            }
            Block::Gaussian(configs) => {
                spec.set_time0_gaussian_prior(v, configs)?;
            }
        }
        let prior = doc
            .priors
            .transition
            .get(name)
            .ok_or_else(|| Error::Schema(format!("no transition prior block for `{name}`")))?;
        match doc_to_block(prior, name, || Block::Fixed(dbn.transition_cpd(v).clone()))? {
            Block::Fixed(cpd) => {
                spec.fix_transition(v, cpd)?;
            }
            Block::Dirichlet(rows) => {
                spec.set_transition_dirichlet_prior(v, rows)?;
            }
            Block::Gaussian(configs) => {
                spec.set_transition_gaussian_prior(v, configs)?;
            }
        }
    }

    let mut time0_posterior = Vec::with_capacity(dbn.len());
    let mut step_posterior = spec.step_spec().blocks().to_vec();
    let base = spec.base();
    for v in dbn.registry().ids() {
        let name = dbn.registry().get(v).name();
        let block = doc
            .posterior
            .blocks
            .time0
            .get(name)
            .ok_or_else(|| Error::Schema(format!("no first-slice posterior block for `{name}`")))?;
        time0_posterior.push(doc_to_block(block, name, || {
            Block::Fixed(dbn.time0().cpd(v).clone())
        })?);
        let block = doc
            .posterior
            .blocks
            .transition
            .get(name)
            .ok_or_else(|| Error::Schema(format!("no transition posterior block for `{name}`")))?;
        step_posterior[base + v.index()] =
            doc_to_block(block, name, || Block::Fixed(dbn.transition_cpd(v).clone()))?;
    }
    DynamicLearner::from_parts(spec, cfg, time0_posterior, step_posterior, doc.posterior.seen)
}

#[cfg(test)]
mod tests {
    use super::super::learner::SequenceSlice;
    use super::super::tests::state_space_model;
    use super::*;
    use crate::model::{Assignment, StateSpace, Value, VarId, VariableRegistry};

    #[test]
    fn dynamic_model_round_trips_bitwise() {
        let dbn = state_space_model();
        let text = serialize_dynamic_model_to_string(&dbn).unwrap();
        let back = deserialize_dynamic_model(text.as_bytes()).unwrap();
        assert_eq!(serialize_dynamic_model_to_string(&back).unwrap(), text);
        assert_eq!(back.transition_parents(VarId(0)), dbn.transition_parents(VarId(0)));
        assert_eq!(back.transition_cpd(VarId(0)), dbn.transition_cpd(VarId(0)));
        assert!(text.contains("X@prev"));
    }

    #[test]
    fn wrong_format_tags_are_rejected() {
        let dbn = state_space_model();
        let text = serialize_dynamic_model_to_string(&dbn)
            .unwrap()
            .replace(DYNAMIC_MODEL_FORMAT, "streambayes-dbn-0");
        assert!(matches!(
            deserialize_dynamic_model(text.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    fn trained_dynamic_learner() -> DynamicLearner {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let spec =
            DynamicModelSpec::new(Dag::new(reg), vec![vec![TemporalParent::Previous(a)]]).unwrap();
        let mut learner = DynamicLearner::new(spec);
        let batch: Vec<SequenceSlice> = [0usize, 1, 1, 0, 1]
            .iter()
            .map(|&s| {
                let mut values = Assignment::new(1);
                values.set_raw(VarId(0), Value::Index(s));
                SequenceSlice { sequence: 0, values }
            })
            .collect();
        learner.update(&batch).unwrap();
        learner
    }

    #[test]
    fn saved_dynamic_learner_round_trips_and_resumes() {
        let learner = trained_dynamic_learner();
        let text = dynamic_learner_to_json(&learner).unwrap();
        let back = dynamic_learner_from_json(&text, LearnerConfig::default()).unwrap();
        assert_eq!(back.seen(), learner.seen());
        let a = VarId(0);
        assert_eq!(back.time0_posterior(a), learner.time0_posterior(a));
        assert_eq!(back.transition_posterior(a), learner.transition_posterior(a));

        // Both continue identically on a fresh sequence.
        let batch: Vec<SequenceSlice> = [1usize, 0]
            .iter()
            .map(|&s| {
                let mut values = Assignment::new(1);
                values.set_raw(a, Value::Index(s));
                SequenceSlice { sequence: 9, values }
            })
            .collect();
        let mut x = learner;
        let mut y = back;
        x.update(&batch).unwrap();
        y.update(&batch).unwrap();
        assert_eq!(x.transition_posterior(a), y.transition_posterior(a));
        assert_eq!(x.time0_posterior(a), y.time0_posterior(a));
    }

    #[test]
    fn saved_dynamic_learner_loads_as_a_plain_dynamic_model() {
        let learner = trained_dynamic_learner();
        let text = dynamic_learner_to_json(&learner).unwrap();
        let dbn = deserialize_dynamic_model(text.as_bytes()).unwrap();
        let expected = learner.point_estimate().unwrap();
        assert_eq!(dbn.transition_cpd(VarId(0)), expected.transition_cpd(VarId(0)));
        assert_eq!(dbn.time0().cpds(), expected.time0().cpds());
    }
}
