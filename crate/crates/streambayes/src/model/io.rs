//! JSON model serialization.
//!
//! Format `streambayes-bn-1`: a single JSON object with keys
//! `format`, `variables`, `parents`, and `cpds`. Gaussian parameters are
//! `{intercept, coeffs, variance}` triples listed by row-major
//! discrete-parent configuration index; probability tables are listed as
//! rows in the same order. Unknown top-level keys are ignored on read so
//! that files carrying extra material (e.g. posterior hyperparameters
//! written by the learner) still load as plain networks.

use crate::error::{Error, Result};
use crate::model::cpd::{Cpd, CpdKind, GaussianCpd, LinearGaussian, MultinomialCpd};
use crate::model::dag::Dag;
use crate::model::network::BayesianNetwork;
use crate::model::variable::{Role, StateSpace, VariableRegistry};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

/// Version tag written to and required from every model file.
pub const MODEL_FORMAT: &str = "streambayes-bn-1";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ModelDoc {
    pub format: String,
    pub variables: Vec<VarDoc>,
    pub parents: BTreeMap<String, Vec<String>>,
    pub cpds: BTreeMap<String, CpdDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct VarDoc {
    pub name: String,
    /// `"finite"` or `"real"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default = "default_role")]
    pub role: String,
}

fn default_role() -> String {
    "observable".into()
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CpdDoc {
    pub kind: String,
    /// Probability rows for multinomial kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    /// Gaussian triples for normal kinds, by configuration index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configs: Option<Vec<GaussDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct GaussDoc {
    pub intercept: f64,
    pub coeffs: Vec<f64>,
    pub variance: f64,
}

pub(crate) fn var_to_doc(var: &crate::model::variable::Variable) -> VarDoc {
    let (kind, labels) = match var.space() {
        StateSpace::Finite { labels } => ("finite".to_string(), labels.clone()),
        StateSpace::Real => ("real".to_string(), Vec::new()),
    };
    let role = match var.role() {
        Role::Observable => "observable",
        Role::Latent => "latent",
    };
    VarDoc { name: var.name().to_string(), kind, labels, role: role.into() }
}

/// Builds a registry from variable documents, in order.
pub(crate) fn registry_from_docs(docs: &[VarDoc]) -> Result<VariableRegistry> {
    let mut reg = VariableRegistry::new();
    for v in docs {
        let space = match v.kind.as_str() {
            "finite" => StateSpace::finite(v.labels.clone())?,
            "real" => StateSpace::real(),
            other => {
                return Err(Error::Schema(format!(
                    "variable `{}` has unknown kind `{other}`",
                    v.name
                )))
            }
        };
        let role = match v.role.as_str() {
            "observable" => Role::Observable,
            "latent" => Role::Latent,
            other => {
                return Err(Error::Schema(format!(
                    "variable `{}` has unknown role `{other}`",
                    v.name
                )))
            }
        };
        reg.add(v.name.clone(), space, role)?;
    }
    Ok(reg)
}

pub(crate) fn cpd_to_doc(cpd: &Cpd, kind_tag: &str) -> CpdDoc {
    match cpd {
        Cpd::Multinomial(m) => CpdDoc {
            kind: kind_tag.to_string(),
            rows: Some(m.rows().to_vec()),
            configs: None,
        },
        Cpd::Gaussian(g) => CpdDoc {
            kind: kind_tag.to_string(),
            rows: None,
            configs: Some(
                g.configs()
                    .iter()
                    .map(|lg| GaussDoc {
                        intercept: lg.intercept,
                        coeffs: lg.coeffs.clone(),
                        variance: lg.variance,
                    })
                    .collect(),
            ),
        },
    }
}

pub(crate) fn cpd_from_doc(doc: &CpdDoc, name: &str) -> Result<Cpd> {
    match (&doc.rows, &doc.configs) {
        (Some(rows), None) => Ok(Cpd::Multinomial(MultinomialCpd::new(rows.clone()))),
        (None, Some(configs)) => Ok(Cpd::Gaussian(GaussianCpd::new(
            configs
                .iter()
                .map(|g| LinearGaussian::new(g.intercept, g.coeffs.clone(), g.variance))
                .collect(),
        ))),
        _ => Err(Error::Schema(format!(
            "distribution for `{name}` must have exactly one of `rows` / `configs`"
        ))),
    }
}

pub(crate) fn network_to_document(net: &BayesianNetwork) -> ModelDoc {
    let mut variables = Vec::new();
    let mut parents = BTreeMap::new();
    let mut cpds = BTreeMap::new();
    for v in net.registry().ids() {
        let var = net.var(v);
        variables.push(var_to_doc(var));
        parents.insert(
            var.name().to_string(),
            net.parents(v).iter().map(|&p| net.var(p).name().to_string()).collect(),
        );
        cpds.insert(var.name().to_string(), cpd_to_doc(net.cpd(v), net.kind(v).tag()));
    }
    ModelDoc { format: MODEL_FORMAT.to_string(), variables, parents, cpds }
}

pub(crate) fn document_to_network(doc: ModelDoc) -> Result<BayesianNetwork> {
    if doc.format != MODEL_FORMAT {
        return Err(Error::Schema(format!(
            "unsupported model format `{}`, expected `{MODEL_FORMAT}`",
            doc.format
        )));
    }
    let mut dag = Dag::new(registry_from_docs(&doc.variables)?);
    for v in &doc.variables {
        let child = dag.registry().by_name(&v.name)?.id();
        let plist = doc
            .parents
            .get(&v.name)
            .ok_or_else(|| Error::Schema(format!("no parent list for `{}`", v.name)))?;
        for pname in plist {
            let parent = dag.registry().by_name(pname)?.id();
            dag.add_edge(parent, child)?;
        }
    }
    let mut cpds = Vec::with_capacity(doc.variables.len());
    for v in &doc.variables {
        let c = doc
            .cpds
            .get(&v.name)
            .ok_or_else(|| Error::Schema(format!("no distribution for `{}`", v.name)))?;
        cpds.push(cpd_from_doc(c, &v.name)?);
    }
    let net = BayesianNetwork::new(dag, cpds)?;
    // Cross-check the declared kind tags against the assembled structure.
    for v in net.registry().ids() {
        let name = net.var(v).name();
        let declared = &doc.cpds[name].kind;
        match CpdKind::from_tag(declared) {
            Some(k) if k == net.kind(v) => {}
            _ => {
                return Err(Error::Validation {
                    variable: name.to_string(),
                    rule: format!(
                        "declared kind `{declared}` does not match structure `{}`",
                        net.kind(v).tag()
                    ),
                })
            }
        }
    }
    Ok(net)
}

/// Writes a network as pretty-printed JSON. Output bytes are deterministic
/// for a given model, and finite parameters survive a round trip exactly.
pub fn serialize_model<W: Write>(net: &BayesianNetwork, mut sink: W) -> Result<()> {
    let doc = network_to_document(net);
    serde_json::to_writer_pretty(&mut sink, &doc)?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// In-memory variant of [`serialize_model`].
pub fn serialize_model_to_string(net: &BayesianNetwork) -> Result<String> {
    let mut buf = Vec::new();
    serialize_model(net, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Reads and validates a model written by [`serialize_model`]. Malformed
/// JSON reports the line/column of the failure; a well-formed document that
/// violates a model invariant reports the variable and rule.
pub fn deserialize_model<R: Read>(source: R) -> Result<BayesianNetwork> {
    let doc: ModelDoc = serde_json::from_reader(source).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    document_to_network(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::variable::StateSpace;

    fn example_net() -> BayesianNetwork {
        let mut reg = VariableRegistry::new();
        let h = reg.add_latent("HiddenVar", StateSpace::finite_states(2).unwrap()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let z = reg.add_observable("Z", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(h, z).unwrap();
        dag.add_edge(x, z).unwrap();
        BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.25, 0.75]),
                Cpd::gaussian_root(0.1, 1.5),
                Cpd::gaussian(vec![
                    LinearGaussian::new(1.0 / 3.0, vec![0.7], 2.5),
                    LinearGaussian::new(-0.2, vec![-1.1], 0.01),
                ]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_every_parameter_exactly() {
        let net = example_net();
        let text = serialize_model_to_string(&net).unwrap();
        let back = deserialize_model(text.as_bytes()).unwrap();
        assert_eq!(net.cpds(), back.cpds());
        assert_eq!(net.registry().len(), back.registry().len());
        for v in net.registry().ids() {
            assert_eq!(net.var(v).name(), back.var(v).name());
            assert_eq!(net.var(v).space(), back.var(v).space());
            assert_eq!(net.var(v).role(), back.var(v).role());
            assert_eq!(net.parents(v), back.parents(v));
        }
        // Serialization is deterministic byte-for-byte.
        assert_eq!(text, serialize_model_to_string(&back).unwrap());
    }

    #[test]
    fn format_tag_is_required() {
        let net = example_net();
        let text = serialize_model_to_string(&net).unwrap().replace(MODEL_FORMAT, "other-format");
        assert!(matches!(deserialize_model(text.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn malformed_json_reports_a_location() {
        let garbled = "{ \"format\": \"streambayes-bn-1\", \n  \"variables\": [ oops ]";
        match deserialize_model(garbled.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_row_sum_is_rejected_on_load() {
        let net = example_net();
        let text = serialize_model_to_string(&net).unwrap().replace("0.25", "0.35");
        assert!(matches!(
            deserialize_model(text.as_bytes()),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn kind_tag_mismatch_is_rejected() {
        let net = example_net();
        let text = serialize_model_to_string(&net)
            .unwrap()
            .replace("\"Normal|MultinomialNormal\"", "\"Normal|Normal\"");
        assert!(matches!(
            deserialize_model(text.as_bytes()),
            Err(Error::Validation { .. })
        ));
    }
}
