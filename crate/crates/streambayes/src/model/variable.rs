//! Variables, their state spaces, and the name registry.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Dense index of a variable inside a registry / network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// Position of the variable in registry order.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Domain of a variable: a finite label set or the real line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateSpace {
    /// Finite categorical domain; `labels` are unique and len >= 2.
    Finite { labels: Vec<String> },
    /// Unbounded continuous domain.
    Real,
}

impl StateSpace {
    /// Finite space with explicit labels. At least two distinct labels.
    pub fn finite<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "finite state space needs >= 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::DuplicateName(l.clone()));
            }
        }
        Ok(StateSpace::Finite { labels })
    }

    /// Finite space with labels `"0" .. "k-1"`.
    pub fn finite_states(k: usize) -> Result<Self> {
        StateSpace::finite((0..k).map(|i| i.to_string()))
    }

    pub fn real() -> Self {
        StateSpace::Real
    }

    /// Number of states for finite spaces, `None` for real ones.
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            StateSpace::Finite { labels } => Some(labels.len()),
            StateSpace::Real => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, StateSpace::Finite { .. })
    }

    /// Index of `label`, if this is a finite space containing it.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        match self {
            StateSpace::Finite { labels } => labels.iter().position(|l| l == label),
            StateSpace::Real => None,
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            StateSpace::Finite { labels } => labels,
            StateSpace::Real => &[],
        }
    }
}

/// Whether a variable is expected in the data or is hidden.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Observable,
    Latent,
}

/// A named variable with a state space and a role.
#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    id: VarId,
    name: String,
    space: StateSpace,
    role: Role,
}

impl Variable {
    pub fn id(&self) -> VarId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_latent(&self) -> bool {
        self.role == Role::Latent
    }
}

/// Ordered collection of variables with unique names and dense ids.
#[derive(Clone, Debug, Default)]
pub struct VariableRegistry {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarId>,
}

impl VariableRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a variable; ids are assigned in insertion order.
    pub fn add(&mut self, name: impl Into<String>, space: StateSpace, role: Role) -> Result<VarId> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidParameter("variable name must be non-empty".into()));
        }
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        let id = VarId(self.vars.len());
        self.by_name.insert(name.clone(), id);
        self.vars.push(Variable { id, name, space, role });
        Ok(id)
    }

    pub fn add_observable(&mut self, name: impl Into<String>, space: StateSpace) -> Result<VarId> {
        self.add(name, space, Role::Observable)
    }

    pub fn add_latent(&mut self, name: impl Into<String>, space: StateSpace) -> Result<VarId> {
        self.add(name, space, Role::Latent)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn by_name(&self, name: &str) -> Result<&Variable> {
        self.by_name
            .get(name)
            .map(|id| &self.vars[id.0])
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variable> {
        self.vars.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }
}
