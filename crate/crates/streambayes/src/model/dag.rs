//! Directed acyclic structure over a variable registry.

use crate::error::{Error, Result};
use crate::model::variable::{VarId, Variable, VariableRegistry};

/// Parent sets over a registry. Edges can be added freely; acyclicity is
/// checked by [`Dag::topological_order`], which network validation calls.
#[derive(Clone, Debug)]
pub struct Dag {
    registry: VariableRegistry,
    parents: Vec<Vec<VarId>>,
}

impl Dag {
    pub fn new(registry: VariableRegistry) -> Self {
        let parents = vec![Vec::new(); registry.len()];
        Dag { registry, parents }
    }

    pub fn registry(&self) -> &VariableRegistry {
        &self.registry
    }

    pub fn var(&self, id: VarId) -> &Variable {
        self.registry.get(id)
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    /// Adds `parent -> child`. Self-loops and duplicate parents are rejected
    /// immediately; cycles are only caught at validation time.
    pub fn add_edge(&mut self, parent: VarId, child: VarId) -> Result<()> {
        if parent == child {
            return Err(Error::Validation {
                variable: self.registry.get(child).name().to_string(),
                rule: "self-loop".into(),
            });
        }
        if self.parents[child.index()].contains(&parent) {
            return Err(Error::Validation {
                variable: self.registry.get(child).name().to_string(),
                rule: format!("duplicate parent `{}`", self.registry.get(parent).name()),
            });
        }
        self.parents[child.index()].push(parent);
        Ok(())
    }

    /// Parents of `child` in insertion order.
    pub fn parents(&self, child: VarId) -> &[VarId] {
        &self.parents[child.index()]
    }

    /// Kahn topological sort. On a cycle, reports the lowest-id variable
    /// still stuck in it.
    pub fn topological_order(&self) -> Result<Vec<VarId>> {
        let n = self.registry.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (child, ps) in self.parents.iter().enumerate() {
            indegree[child] = ps.len();
            for p in ps {
                children[p.index()].push(child);
            }
        }
        let mut queue: std::collections::VecDeque<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(VarId(i));
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(Error::Validation {
                variable: self.registry.get(VarId(stuck)).name().to_string(),
                rule: "cycle".into(),
            });
        }
        Ok(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::variable::StateSpace;

    fn three_vars() -> (VariableRegistry, VarId, VarId, VarId) {
        let mut reg = VariableRegistry::new();
        let a = reg.add_observable("A", StateSpace::finite_states(2).unwrap()).unwrap();
        let b = reg.add_observable("B", StateSpace::finite_states(2).unwrap()).unwrap();
        let c = reg.add_observable("C", StateSpace::finite_states(2).unwrap()).unwrap();
        (reg, a, b, c)
    }

    #[test]
    fn topological_order_respects_edges() {
        let (reg, a, b, c) = three_vars();
        let mut dag = Dag::new(reg);
        dag.add_edge(b, a).unwrap();
        dag.add_edge(a, c).unwrap();
        let order = dag.topological_order().unwrap();
        let pos = |v: VarId| order.iter().position(|&x| x == v).unwrap();
        assert!(pos(b) < pos(a));
        assert!(pos(a) < pos(c));
    }

    #[test]
    fn two_cycle_is_reported_with_variable_and_rule() {
        let (reg, a, b, _c) = three_vars();
        let mut dag = Dag::new(reg);
        dag.add_edge(a, b).unwrap();
        dag.add_edge(b, a).unwrap();
        match dag.topological_order() {
            Err(Error::Validation { variable, rule }) => {
                assert_eq!(rule, "cycle");
                assert_eq!(variable, "A"); // lowest id in the cycle
            }
            other => panic!("expected cycle violation, got {other:?}"),
        }
    }

    #[test]
    fn self_loops_and_duplicate_parents_are_rejected() {
        let (reg, a, b, _c) = three_vars();
        let mut dag = Dag::new(reg);
        assert!(dag.add_edge(a, a).is_err());
        dag.add_edge(a, b).unwrap();
        assert!(dag.add_edge(a, b).is_err());
    }
}
