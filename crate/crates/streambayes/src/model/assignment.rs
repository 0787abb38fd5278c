//! Partial joint assignments of values to variables.

use crate::error::{Error, Result};
use crate::model::variable::{StateSpace, VarId, Variable};

/// A single observed value: a finite-state index or a real number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    /// 0-based state index of a finite variable.
    Index(usize),
    /// Finite real value of a continuous variable.
    Real(f64),
}

impl Value {
    pub fn as_index(&self) -> Option<usize> {
        match self {
            Value::Index(i) => Some(*i),
            Value::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Index(_) => None,
        }
    }
}

/// Partial map from variables to values, used both for evidence and for
/// complete samples. Indexed by dense variable id.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    values: Vec<Option<Value>>,
}

impl Assignment {
    /// Empty assignment over `n_vars` variables.
    pub fn new(n_vars: usize) -> Self {
        Assignment { values: vec![None; n_vars] }
    }

    /// Sets a value after checking it against the variable's state space:
    /// finite indices must be in range, reals must be finite.
    pub fn set(&mut self, var: &Variable, value: Value) -> Result<()> {
        match (var.space(), value) {
            (StateSpace::Finite { labels }, Value::Index(i)) => {
                if i >= labels.len() {
                    return Err(Error::InvalidParameter(format!(
                        "state index {i} out of range for `{}` (cardinality {})",
                        var.name(),
                        labels.len()
                    )));
                }
            }
            (StateSpace::Real, Value::Real(x)) => {
                if !x.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite value {x} for `{}`",
                        var.name()
                    )));
                }
            }
            (StateSpace::Finite { .. }, Value::Real(_)) => {
                return Err(Error::TypeMismatch(format!(
                    "`{}` is finite-state but got a real value",
                    var.name()
                )))
            }
            (StateSpace::Real, Value::Index(_)) => {
                return Err(Error::TypeMismatch(format!(
                    "`{}` is real-valued but got a state index",
                    var.name()
                )))
            }
        }
        self.values[var.id().index()] = Some(value);
        Ok(())
    }

    /// Unchecked set used by samplers that already know the domains.
    pub(crate) fn set_raw(&mut self, id: VarId, value: Value) {
        self.values[id.index()] = Some(value);
    }

    pub fn clear(&mut self, id: VarId) {
        self.values[id.index()] = None;
    }

    /// Unassigns every variable, keeping the capacity.
    pub fn clear_all(&mut self) {
        self.values.iter_mut().for_each(|v| *v = None);
    }

    pub fn get(&self, id: VarId) -> Option<Value> {
        self.values[id.index()]
    }

    pub fn is_set(&self, id: VarId) -> bool {
        self.values[id.index()].is_some()
    }

    /// Number of assigned variables.
    pub fn len_set(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn n_vars(&self) -> usize {
        self.values.len()
    }

    /// Value of `id`, or a `MissingValue` error naming the variable.
    pub fn require(&self, var: &Variable) -> Result<Value> {
        self.get(var.id()).ok_or_else(|| Error::MissingValue(var.name().to_string()))
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (VarId, Value)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (VarId(i), v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::variable::{StateSpace, VariableRegistry};

    #[test]
    fn set_checks_domain_and_type() {
        let mut reg = VariableRegistry::new();
        let d = reg.add_observable("D", StateSpace::finite_states(2).unwrap()).unwrap();
        let x = reg.add_observable("X", StateSpace::real()).unwrap();
        let mut a = Assignment::new(reg.len());

        a.set(reg.get(d), Value::Index(1)).unwrap();
        assert!(a.set(reg.get(d), Value::Index(2)).is_err()); // out of range
        assert!(a.set(reg.get(d), Value::Real(0.5)).is_err()); // wrong type
        assert!(a.set(reg.get(x), Value::Real(f64::NAN)).is_err()); // not finite
        a.set(reg.get(x), Value::Real(-2.5)).unwrap();

        assert_eq!(a.get(d), Some(Value::Index(1)));
        assert_eq!(a.get(x), Some(Value::Real(-2.5)));
        assert_eq!(a.len_set(), 2);
    }

    #[test]
    fn require_names_the_missing_variable() {
        let mut reg = VariableRegistry::new();
        let d = reg.add_observable("Weather", StateSpace::finite_states(2).unwrap()).unwrap();
        let a = Assignment::new(reg.len());
        match a.require(reg.get(d)) {
            Err(Error::MissingValue(name)) => assert_eq!(name, "Weather"),
            other => panic!("expected MissingValue, got {other:?}"),
        }
    }
}
