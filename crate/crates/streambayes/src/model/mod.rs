//! Static model representation: variables, DAG structure, conditional
//! distributions, and the validated Bayesian network.
//!
//! Networks follow the conditional linear Gaussian (CLG) restriction:
//! finite-state variables are multinomial with finite-state parents only,
//! while real variables are Gaussian with a mean that is linear in their
//! continuous parents, switched by the joint configuration of their
//! discrete parents. The `variance` field of a [`LinearGaussian`] is a
//! variance, not a standard deviation.

mod assignment;
mod cpd;
pub(crate) mod config;
mod dag;
mod display;
mod io;
mod network;
mod sample;
mod variable;

pub use assignment::{Assignment, Value};
pub use cpd::{Cpd, CpdKind, GaussianCpd, LinearGaussian, MultinomialCpd};
pub use dag::Dag;
pub use io::{deserialize_model, serialize_model, serialize_model_to_string, MODEL_FORMAT};
pub(crate) use io::{
    cpd_from_doc, cpd_to_doc, document_to_network, network_to_document, registry_from_docs,
    var_to_doc, CpdDoc, ModelDoc, VarDoc,
};
pub use network::BayesianNetwork;
pub(crate) use network::StructureIndex;
pub use sample::{ancestral_sample, sample_with};
pub(crate) use sample::sample_row;
pub use variable::{Role, StateSpace, VarId, Variable, VariableRegistry};
