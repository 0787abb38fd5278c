//! Free-form model assembly over a fixed attribute list.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::stagger_latent_mixtures;
use crate::data::Attributes;
use crate::error::{Error, Result};
use crate::learning::ModelSpec;
use crate::model::{Dag, StateSpace, VarId, VariableRegistry};

/// State space of a declared latent variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentKind {
    /// Finite with the given number of states.
    Finite(usize),
    /// Real-valued.
    Real,
}

impl LatentKind {
    fn space(self) -> Result<StateSpace> {
        match self {
            LatentKind::Finite(k) => StateSpace::finite_states(k),
            LatentKind::Real => Ok(StateSpace::real()),
        }
    }
}

/// Starts a [`CustomBuilder`] over the given attribute list.
pub fn new_builder(attrs: &Attributes) -> CustomBuilder {
    CustomBuilder { attrs: attrs.clone(), latents: Vec::new(), links: Vec::new() }
}

/// Collects latent declarations and links, then assembles and validates a
/// [`ModelSpec`] in one step.
///
/// A link endpoint is a name: an attribute, a declared latent, a local
/// family's prefix, or `"*"` for "every attribute". A per-attribute side
/// (`"*"` or a family prefix) facing another per-attribute side pairs
/// index-wise — family member `i` with attribute `i` — while facing a
/// single variable it broadcasts. Nothing is checked until [`build`], where
/// cycles, duplicate links, and discrete-under-continuous violations all
/// surface as [`Error::Structure`].
///
/// [`build`]: CustomBuilder::build
pub struct CustomBuilder {
    attrs: Attributes,
    latents: Vec<Latent>,
    links: Vec<(String, String)>,
}

struct Latent {
    name: String,
    kind: LatentKind,
    per_attribute: bool,
}

enum Side {
    One(VarId),
    PerAttribute(Vec<VarId>),
}

impl CustomBuilder {
    /// Declares a single latent variable.
    pub fn add_global_latent(mut self, name: impl Into<String>, kind: LatentKind) -> Self {
        self.latents.push(Latent { name: name.into(), kind, per_attribute: false });
        self
    }

    /// Declares one latent per attribute, named `{prefix}{i}`.
    pub fn add_local_latent_per_attribute(
        mut self,
        prefix: impl Into<String>,
        kind: LatentKind,
    ) -> Self {
        self.latents.push(Latent { name: prefix.into(), kind, per_attribute: true });
        self
    }

    /// Requests an edge (or an index-paired/broadcast bundle of edges).
    pub fn link(mut self, parent: impl Into<String>, child: impl Into<String>) -> Self {
        self.links.push((parent.into(), child.into()));
        self
    }

    /// Resolves names, wires the graph, and validates the result.
    pub fn build(self) -> Result<ModelSpec> {
        let mut reg = VariableRegistry::new();
        let mut attr_ids = Vec::with_capacity(self.attrs.len());
        for a in self.attrs.iter() {
            attr_ids.push(reg.add_observable(&a.name, a.space.clone())?);
        }
        let mut families: Vec<(String, Vec<VarId>)> = Vec::new();
        for latent in &self.latents {
            if latent.per_attribute {
                let mut members = Vec::with_capacity(self.attrs.len());
                for i in 0..self.attrs.len() {
                    members.push(reg.add_latent(format!("{}{i}", latent.name), latent.kind.space()?)?);
                }
                families.push((latent.name.clone(), members));
            } else {
                reg.add_latent(&latent.name, latent.kind.space()?)?;
            }
        }

        let resolve = |name: &str| -> Result<Side> {
            if name == "*" {
                return Ok(Side::PerAttribute(attr_ids.clone()));
            }
            match reg.by_name(name) {
                Ok(var) => Ok(Side::One(var.id())),
                Err(e) => families
                    .iter()
                    .find(|(prefix, _)| prefix == name)
                    .map(|(_, members)| Side::PerAttribute(members.clone()))
                    .ok_or(e),
            }
        };
        let mut edges = Vec::new();
        for (parent, child) in &self.links {
            match (resolve(parent)?, resolve(child)?) {
                (Side::One(p), Side::One(c)) => edges.push((p, c)),
                (Side::One(p), Side::PerAttribute(cs)) => edges.extend(cs.into_iter().map(|c| (p, c))),
                (Side::PerAttribute(ps), Side::One(c)) => edges.extend(ps.into_iter().map(|p| (p, c))),
                (Side::PerAttribute(ps), Side::PerAttribute(cs)) => {
                    edges.extend(ps.into_iter().zip(cs))
                }
            }
        }

        let mut dag = Dag::new(reg);
        for (p, c) in edges {
            dag.add_edge(p, c).map_err(as_structure)?;
        }
        let mut spec = ModelSpec::new(dag).map_err(as_structure)?;
        stagger_latent_mixtures(&mut spec)?;
        Ok(spec)
    }
}

/// Builder callers see one error kind for every way a link set can go wrong.
fn as_structure(e: Error) -> Error {
    match e {
        Error::Validation { variable, rule } => Error::Structure(format!("`{variable}`: {rule}")),
        other => other,
    }
}

/// On-disk description of builder calls.
///
/// ```json
/// {
///   "globals": [ { "name": "GlobalHidden", "kind": "finite", "states": 2 } ],
///   "locals":  [ { "prefix": "LocalHidden", "kind": "real" } ],
///   "links":   [ { "parent": "GlobalHidden", "child": "*" },
///                { "parent": "LocalHidden",  "child": "*" } ]
/// }
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomDoc {
    #[serde(default)]
    globals: Vec<GlobalDoc>,
    #[serde(default)]
    locals: Vec<LocalDoc>,
    #[serde(default)]
    links: Vec<LinkDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlobalDoc {
    name: String,
    kind: String,
    #[serde(default)]
    states: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalDoc {
    prefix: String,
    kind: String,
    #[serde(default)]
    states: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    parent: String,
    child: String,
}

fn parse_kind(kind: &str, states: Option<usize>, who: &str) -> Result<LatentKind> {
    match kind {
        "finite" => {
            let k = states.ok_or_else(|| {
                Error::Config(format!("latent `{who}` is finite but gives no `states`"))
            })?;
            Ok(LatentKind::Finite(k))
        }
        "real" => {
            if states.is_some() {
                return Err(Error::Config(format!("latent `{who}` is real and takes no `states`")));
            }
            Ok(LatentKind::Real)
        }
        other => Err(Error::Config(format!(
            "latent `{who}` has unknown kind `{other}`; expected `finite` or `real`"
        ))),
    }
}

/// Replays a JSON description of builder calls (see [`CustomBuilder`]) over
/// the given attributes.
pub fn custom_from_json(text: &str, attrs: &Attributes) -> Result<ModelSpec> {
    let doc: CustomDoc = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let mut builder = new_builder(attrs);
    for g in &doc.globals {
        builder = builder.add_global_latent(&g.name, parse_kind(&g.kind, g.states, &g.name)?);
    }
    for l in &doc.locals {
        builder =
            builder.add_local_latent_per_attribute(&l.prefix, parse_kind(&l.kind, l.states, &l.prefix)?);
    }
    for l in &doc.links {
        builder = builder.link(&l.parent, &l.child);
    }
    builder.build()
}

/// [`custom_from_json`] for a description stored in a file.
pub fn custom_from_file(path: impl AsRef<Path>, attrs: &Attributes) -> Result<ModelSpec> {
    custom_from_json(&fs::read_to_string(path)?, attrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;
    use crate::learning::Block;

    fn attrs(n: usize) -> Attributes {
        let list = (0..n).map(|i| Attribute::real(format!("GaussianVar{i}"))).collect();
        Attributes::new("stream", list).unwrap()
    }

    fn mixture_with_local_factors(n: usize) -> ModelSpec {
        new_builder(&attrs(n))
            .add_global_latent("GlobalHidden", LatentKind::Finite(2))
            .add_local_latent_per_attribute("LocalHidden", LatentKind::Real)
            .link("GlobalHidden", "*")
            .link("LocalHidden", "*")
            .build()
            .unwrap()
    }

    #[test]
    fn global_and_paired_local_latents_cover_every_attribute() {
        let spec = mixture_with_local_factors(10);
        assert_eq!(spec.registry().len(), 21);
        let global = spec.registry().by_name("GlobalHidden").unwrap();
        assert!(global.is_latent());
        assert_eq!(global.space().cardinality(), Some(2));
        let mut edges = 0;
        for i in 0..10 {
            let v = spec.registry().by_name(&format!("GaussianVar{i}")).unwrap().id();
            let local = spec.registry().by_name(&format!("LocalHidden{i}")).unwrap();
            assert!(local.is_latent());
            assert_eq!(spec.dag().parents(v), &[global.id(), local.id()]);
            edges += spec.dag().parents(v).len();
        }
        assert_eq!(edges, 20);
    }

    #[test]
    fn latent_mixture_children_get_staggered_priors() {
        let spec = mixture_with_local_factors(3);
        let v = spec.registry().by_name("GaussianVar1").unwrap().id();
        match spec.block(v) {
            Block::Gaussian(configs) => {
                assert_eq!(configs.len(), 2);
                assert_eq!(configs[0].coeffs.len(), 1);
                assert_eq!((configs[0].base.mean, configs[1].base.mean), (-0.5, 0.5));
            }
            other => panic!("expected Gaussian blocks, got {other:?}"),
        }
    }

    #[test]
    fn empty_builder_gives_independent_marginals() {
        let spec = new_builder(&attrs(3)).build().unwrap();
        assert_eq!(spec.registry().len(), 3);
        for v in spec.registry().ids() {
            assert_eq!(spec.dag().parents(v), &[]);
        }
    }

    #[test]
    fn reversed_link_cycle_is_a_structure_error() {
        let err = new_builder(&attrs(2))
            .add_global_latent("GlobalHidden", LatentKind::Finite(2))
            .link("GlobalHidden", "*")
            .link("GaussianVar0", "GlobalHidden")
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "got {err:?}");
    }

    #[test]
    fn real_parent_under_finite_latent_is_a_structure_error() {
        let err = new_builder(&attrs(2))
            .add_global_latent("GlobalHidden", LatentKind::Finite(2))
            .link("GaussianVar0", "GlobalHidden")
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "got {err:?}");
    }

    #[test]
    fn duplicate_links_are_a_structure_error() {
        let err = new_builder(&attrs(2))
            .add_global_latent("H", LatentKind::Finite(2))
            .link("H", "GaussianVar0")
            .link("H", "GaussianVar0")
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "got {err:?}");
    }

    #[test]
    fn unknown_link_names_are_rejected() {
        let err = new_builder(&attrs(2)).link("Nope", "*").build().unwrap_err();
        assert!(matches!(err, Error::UnknownVariable(_)), "got {err:?}");
    }

    #[test]
    fn broadcast_lets_every_attribute_feed_one_child() {
        let spec = new_builder(&attrs(3))
            .add_global_latent("Score", LatentKind::Real)
            .link("*", "Score")
            .build()
            .unwrap();
        let score = spec.registry().by_name("Score").unwrap().id();
        assert_eq!(spec.dag().parents(score).len(), 3);
    }

    #[test]
    fn json_description_replays_the_builder_calls() {
        let text = r#"{
            "globals": [ { "name": "GlobalHidden", "kind": "finite", "states": 2 } ],
            "locals":  [ { "prefix": "LocalHidden", "kind": "real" } ],
            "links":   [ { "parent": "GlobalHidden", "child": "*" },
                         { "parent": "LocalHidden",  "child": "*" } ]
        }"#;
        let from_json = custom_from_json(text, &attrs(10)).unwrap();
        let from_calls = mixture_with_local_factors(10);
        for v in from_calls.registry().ids() {
            assert_eq!(from_json.registry().get(v).name(), from_calls.registry().get(v).name());
            assert_eq!(from_json.dag().parents(v), from_calls.dag().parents(v));
            assert_eq!(from_json.block(v), from_calls.block(v));
        }
    }

    #[test]
    fn malformed_and_inconsistent_descriptions_are_rejected() {
        let attrs = attrs(2);
        assert!(matches!(
            custom_from_json("{ not json", &attrs),
            Err(Error::Parse { .. })
        ));
        let bad_kind = r#"{ "globals": [ { "name": "H", "kind": "fuzzy" } ] }"#;
        assert!(matches!(custom_from_json(bad_kind, &attrs), Err(Error::Config(_))));
        let no_states = r#"{ "globals": [ { "name": "H", "kind": "finite" } ] }"#;
        assert!(matches!(custom_from_json(no_states, &attrs), Err(Error::Config(_))));
        let unknown_field = r#"{ "latents": [] }"#;
        assert!(matches!(custom_from_json(unknown_field, &attrs), Err(Error::Parse { .. })));
    }
}
