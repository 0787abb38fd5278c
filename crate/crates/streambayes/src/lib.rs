//! Streaming Bayesian learning and inference for conditional linear
//! Gaussian (CLG) networks.
//!
//! The crate models joint distributions over mixed discrete/continuous
//! variables as Bayesian networks whose continuous conditionals are linear
//! Gaussians switched by discrete parents. On top of that representation it
//! provides:
//!
//! - lazy, batched ARFF data streams ([`data`]);
//! - an exponential-family toolkit with conjugate updates ([`ef`]);
//! - variational message passing and importance sampling ([`inference`]);
//! - streaming Bayesian parameter learning, where the posterior after one
//!   batch becomes the prior for the next ([`learning`]);
//! - two-slice dynamic networks with factored-frontier filtering
//!   ([`dynamic`]);
//! - ready-made model templates ([`zoo`]) and a small CLI ([`cli`]).
//!
//! The `examples/` directory is the guided tour; each file is a runnable
//! walk-through of one capability (`cargo run --example gaussian_mixture`,
//! `cargo run --example kalman_filter`, ...).

pub mod cli;
pub mod data;
pub mod dynamic;
pub mod ef;
pub mod error;
pub mod inference;
pub mod learning;
pub mod math;
pub mod model;
pub mod zoo;

pub use error::{Error, Result};
pub use model::{
    ancestral_sample, deserialize_model, sample_with, serialize_model, serialize_model_to_string,
    Assignment, BayesianNetwork, Cpd, CpdKind, Dag, GaussianCpd, LinearGaussian, MultinomialCpd,
    Role, StateSpace, Value, VarId, Variable, VariableRegistry, MODEL_FORMAT,
};
