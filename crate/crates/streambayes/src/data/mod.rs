//! Data schemas, streaming ARFF input, and batching.
//!
//! A [`DataStream`] reads rows lazily, one line at a time, so files far
//! larger than memory can be consumed; the [`batches`] adaptor groups rows
//! into fixed-size [`Batch`]es for the learners. Temporal data carries two
//! extra integer-valued columns, `SEQUENCE_ID` and `TIME_ID`, which
//! [`DynamicDataStream`] strips and validates.

mod arff;
mod batch;
mod dynamic;
mod write;

pub use arff::{open_arff, read_arff, DataStream};
pub use batch::{batches, Batch, Batches};
pub use dynamic::{
    open_dynamic_arff, DynamicDataInstance, DynamicDataStream, SEQUENCE_COLUMN, TIME_COLUMN,
};
pub use write::{write_arff, write_arff_file, write_dynamic_arff, write_dynamic_arff_file};

use crate::error::{Error, Result};
use crate::model::{Assignment, StateSpace, Value, VarId, VariableRegistry};

/// One named column of a data set.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub space: StateSpace,
}

impl Attribute {
    pub fn real(name: impl Into<String>) -> Self {
        Attribute { name: name.into(), space: StateSpace::real() }
    }

    pub fn finite(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        Ok(Attribute { name: name.into(), space: StateSpace::finite(labels)? })
    }
}

/// An ordered attribute list plus the relation name.
#[derive(Clone, Debug, PartialEq)]
pub struct Attributes {
    relation: String,
    attrs: Vec<Attribute>,
}

impl Attributes {
    pub fn new(relation: impl Into<String>, attrs: Vec<Attribute>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for a in &attrs {
            if !seen.insert(a.name.clone()) {
                return Err(Error::DuplicateName(a.name.clone()));
            }
        }
        Ok(Attributes { relation: relation.into(), attrs })
    }

    /// Columns for every variable of a network, in declaration order.
    pub fn from_network(net: &crate::model::BayesianNetwork) -> Self {
        let attrs = net
            .registry()
            .iter()
            .map(|v| Attribute { name: v.name().to_string(), space: v.space().clone() })
            .collect();
        Attributes { relation: "stream".into(), attrs }
    }

    /// Columns for the observable variables only, the natural schema for
    /// data sampled from a model with latent structure.
    pub fn observables_from_network(net: &crate::model::BayesianNetwork) -> Self {
        let attrs = net
            .registry()
            .iter()
            .filter(|v| !v.is_latent())
            .map(|v| Attribute { name: v.name().to_string(), space: v.space().clone() })
            .collect();
        Attributes { relation: "stream".into(), attrs }
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Attribute> {
        self.attrs.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attrs.iter()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    /// Drops the columns at the given (sorted or not) indices.
    fn without(&self, drop: &[usize]) -> Attributes {
        let attrs = self
            .attrs
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        Attributes { relation: self.relation.clone(), attrs }
    }
}

/// One data row; `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DataInstance {
    values: Vec<Option<Value>>,
}

impl DataInstance {
    pub fn new(values: Vec<Option<Value>>) -> Self {
        DataInstance { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Value> {
        self.values.get(index).and_then(|v| v.as_ref())
    }

    pub fn values(&self) -> &[Option<Value>] {
        &self.values
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    fn without(&self, drop: &[usize]) -> DataInstance {
        DataInstance {
            values: self
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, v)| v.clone())
                .collect(),
        }
    }
}

/// Maps data columns onto network variables by name.
///
/// Every column must name a known variable with the same state space;
/// variables without a column are simply never observed.
#[derive(Clone, Debug)]
pub struct Binding {
    var_for_attr: Vec<VarId>,
    n_vars: usize,
}

impl Binding {
    pub fn new(attrs: &Attributes, registry: &VariableRegistry) -> Result<Self> {
        let mut var_for_attr = Vec::with_capacity(attrs.len());
        for a in attrs.iter() {
            let var = registry.by_name(&a.name)?;
            if var.space() != &a.space {
                return Err(Error::TypeMismatch(format!(
                    "column `{}` does not match the variable's state space",
                    a.name
                )));
            }
            var_for_attr.push(var.id());
        }
        Ok(Binding { var_for_attr, n_vars: registry.len() })
    }

    pub fn var_for_attr(&self, index: usize) -> Option<VarId> {
        self.var_for_attr.get(index).copied()
    }

    /// Converts a row into an assignment over the network's variables.
    pub fn to_assignment(&self, instance: &DataInstance) -> Result<Assignment> {
        if instance.len() != self.var_for_attr.len() {
            return Err(Error::Schema(format!(
                "row has {} cells for {} columns",
                instance.len(),
                self.var_for_attr.len()
            )));
        }
        let mut a = Assignment::new(self.n_vars);
        for (i, value) in instance.values().iter().enumerate() {
            if let Some(v) = value {
                a.set_raw(self.var_for_attr[i], *v);
            }
        }
        Ok(a)
    }
}
