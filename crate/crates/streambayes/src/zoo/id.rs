//! Short command-line identifiers for the template zoo.

use std::path::PathBuf;

use super::{
    bayesian_linear_regression, custom_from_file, factor_analysis, gaussian_mixture, hmm,
    kalman_filter, naive_bayes,
};
use crate::data::Attributes;
use crate::dynamic::DynamicModelSpec;
use crate::error::{Error, Result};
use crate::learning::ModelSpec;

/// A parsed template identifier with its knobs.
///
/// The grammar is `id` or `id:key=value,...`: `gmm` (knob `k`), `nb`
/// (`class`), `blr` (`target`), `fa` (`factors`), `hmm` (`states`), `kf`
/// (`hidden`), plus `custom:<file>` whose payload is the path of a JSON
/// builder description (see [`custom_from_json`]). Missing knobs take the
/// defaults below; `class` and `target` default to the last column, the
/// usual spot for a label.
///
/// [`custom_from_json`]: super::custom_from_json
#[derive(Clone, Debug, PartialEq)]
pub enum Template {
    GaussianMixture { components: usize },
    NaiveBayes { class: Option<String> },
    LinearRegression { target: Option<String> },
    FactorAnalysis { factors: usize },
    HiddenMarkov { states: usize },
    KalmanFilter { hidden: usize },
    Custom { description: PathBuf },
}

/// A built template, ready to wrap in the matching learner.
#[derive(Clone, Debug)]
pub enum TemplateModel {
    /// Learns from plain rows.
    Static(ModelSpec),
    /// Learns from sequence slices.
    Dynamic(DynamicModelSpec),
}

impl Template {
    pub fn parse(text: &str) -> Result<Template> {
        let (id, payload) = match text.split_once(':') {
            Some((id, rest)) => (id, Some(rest)),
            None => (text, None),
        };
        if id == "custom" {
            let path = payload.filter(|p| !p.is_empty()).ok_or_else(|| {
                Error::Config("the custom template needs a description file: `custom:<file>`".into())
            })?;
            return Ok(Template::Custom { description: PathBuf::from(path) });
        }
        let mut knobs = KnobSet::parse(id, payload)?;
        let template = match id {
            "gmm" => Template::GaussianMixture { components: knobs.take_usize("k")?.unwrap_or(2) },
            "nb" => Template::NaiveBayes { class: knobs.take("class") },
            "blr" => Template::LinearRegression { target: knobs.take("target") },
            "fa" => Template::FactorAnalysis { factors: knobs.take_usize("factors")?.unwrap_or(1) },
            "hmm" => Template::HiddenMarkov { states: knobs.take_usize("states")?.unwrap_or(2) },
            "kf" => Template::KalmanFilter { hidden: knobs.take_usize("hidden")?.unwrap_or(2) },
            other => {
                return Err(Error::Config(format!(
                    "unknown template `{other}`; expected gmm, nb, blr, fa, hmm, kf, or custom:<file>"
                )))
            }
        };
        knobs.finish(id)?;
        Ok(template)
    }

    /// Whether the built model learns from sequences rather than rows.
    pub fn is_dynamic(&self) -> bool {
        matches!(self, Template::HiddenMarkov { .. } | Template::KalmanFilter { .. })
    }

    /// Instantiates the template over a schema. `Custom` reads its
    /// description file here.
    pub fn build(&self, attrs: &Attributes) -> Result<TemplateModel> {
        Ok(match self {
            Template::GaussianMixture { components } => {
                TemplateModel::Static(gaussian_mixture(attrs, *components)?)
            }
            Template::NaiveBayes { class } => {
                let class = named_or_last(attrs, class.as_deref(), "class")?;
                TemplateModel::Static(naive_bayes(attrs, &class)?)
            }
            Template::LinearRegression { target } => {
                let target = named_or_last(attrs, target.as_deref(), "target")?;
                TemplateModel::Static(bayesian_linear_regression(attrs, &target)?)
            }
            Template::FactorAnalysis { factors } => {
                TemplateModel::Static(factor_analysis(attrs, *factors)?)
            }
            Template::HiddenMarkov { states } => TemplateModel::Dynamic(hmm(attrs, *states)?),
            Template::KalmanFilter { hidden } => {
                TemplateModel::Dynamic(kalman_filter(attrs, *hidden)?)
            }
            Template::Custom { description } => {
                TemplateModel::Static(custom_from_file(description, attrs)?)
            }
        })
    }
}

fn named_or_last(attrs: &Attributes, name: Option<&str>, what: &str) -> Result<String> {
    match name {
        Some(n) => Ok(n.to_string()),
        None => attrs
            .len()
            .checked_sub(1)
            .and_then(|i| attrs.get(i))
            .map(|a| a.name.clone())
            .ok_or_else(|| Error::Config(format!("no attributes to pick a default {what} from"))),
    }
}

/// `key=value` pairs of one identifier; every key must be consumed.
struct KnobSet {
    pairs: Vec<(String, String)>,
}

impl KnobSet {
    fn parse(id: &str, payload: Option<&str>) -> Result<KnobSet> {
        let mut pairs = Vec::new();
        if let Some(p) = payload.filter(|p| !p.is_empty()) {
            for item in p.split(',') {
                let (k, v) = item.split_once('=').ok_or_else(|| {
                    Error::Config(format!("template `{id}`: knob `{item}` is not `key=value`"))
                })?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        Ok(KnobSet { pairs })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.pairs.iter().position(|(k, _)| k == key).map(|i| self.pairs.remove(i).1)
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("knob `{key}` needs a whole number, got `{v}`"))
            }),
        }
    }

    fn finish(self, id: &str) -> Result<()> {
        match self.pairs.first() {
            None => Ok(()),
            Some((k, _)) => Err(Error::Config(format!("template `{id}` has no knob `{k}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;
    use crate::zoo::HIDDEN_VAR;
    use std::io::Write;

    #[test]
    fn bare_identifiers_use_their_defaults() {
        assert_eq!(Template::parse("gmm").unwrap(), Template::GaussianMixture { components: 2 });
        assert_eq!(Template::parse("nb").unwrap(), Template::NaiveBayes { class: None });
        assert_eq!(Template::parse("blr").unwrap(), Template::LinearRegression { target: None });
        assert_eq!(Template::parse("fa").unwrap(), Template::FactorAnalysis { factors: 1 });
        assert_eq!(Template::parse("hmm").unwrap(), Template::HiddenMarkov { states: 2 });
        assert_eq!(Template::parse("kf").unwrap(), Template::KalmanFilter { hidden: 2 });
    }

    #[test]
    fn knobs_override_the_defaults() {
        assert_eq!(
            Template::parse("gmm:k=5").unwrap(),
            Template::GaussianMixture { components: 5 }
        );
        assert_eq!(Template::parse("kf:hidden=3").unwrap(), Template::KalmanFilter { hidden: 3 });
        assert_eq!(
            Template::parse("nb:class=Label").unwrap(),
            Template::NaiveBayes { class: Some("Label".into()) }
        );
        assert_eq!(Template::parse("hmm:states=4").unwrap(), Template::HiddenMarkov { states: 4 });
    }

    #[test]
    fn custom_carries_its_description_path() {
        assert_eq!(
            Template::parse("custom:models/mine.json").unwrap(),
            Template::Custom { description: PathBuf::from("models/mine.json") }
        );
    }

    #[test]
    fn bad_identifiers_are_usage_errors() {
        for text in ["boost", "gmm:states=2", "gmm:k=two", "gmm:k", "custom", "custom:"] {
            let err = Template::parse(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "`{text}` gave {err:?}");
            assert_eq!(err.exit_code(), 1);
        }
    }

    #[test]
    fn only_the_temporal_templates_are_dynamic() {
        assert!(Template::parse("hmm").unwrap().is_dynamic());
        assert!(Template::parse("kf").unwrap().is_dynamic());
        assert!(!Template::parse("gmm").unwrap().is_dynamic());
        assert!(!Template::parse("fa").unwrap().is_dynamic());
    }

    #[test]
    fn building_dispatches_on_the_identifier() {
        let attrs = Attributes::new(
            "stream",
            vec![
                Attribute::real("A"),
                Attribute::real("B"),
                Attribute::finite("Label", vec!["n".into(), "y".into()]).unwrap(),
            ],
        )
        .unwrap();
        match Template::parse("nb").unwrap().build(&attrs).unwrap() {
            // The default class is the last column.
            TemplateModel::Static(spec) => {
                let label = spec.registry().by_name("Label").unwrap().id();
                let a = spec.registry().by_name("A").unwrap().id();
                assert_eq!(spec.dag().parents(a), &[label]);
            }
            other => panic!("expected a static model, got {other:?}"),
        }
        let reals =
            Attributes::new("stream", vec![Attribute::real("A"), Attribute::real("B")]).unwrap();
        match Template::parse("gmm").unwrap().build(&reals).unwrap() {
            TemplateModel::Static(spec) => {
                assert!(spec.registry().by_name(HIDDEN_VAR).is_ok());
            }
            other => panic!("expected a static model, got {other:?}"),
        }
        match Template::parse("kf:hidden=1").unwrap().build(&reals).unwrap() {
            TemplateModel::Dynamic(spec) => {
                assert!(spec.registry().by_name("gaussianHiddenVar0").is_ok());
            }
            other => panic!("expected a dynamic model, got {other:?}"),
        }
    }

    #[test]
    fn custom_build_reads_its_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{ "globals": [ {{ "name": "H", "kind": "finite", "states": 2 }} ],
                 "links": [ {{ "parent": "H", "child": "*" }} ] }}"#
        )
        .unwrap();
        let attrs =
            Attributes::new("stream", vec![Attribute::real("A"), Attribute::real("B")]).unwrap();
        let template = Template::Custom { description: file.path().to_path_buf() };
        match template.build(&attrs).unwrap() {
            TemplateModel::Static(spec) => {
                let h = spec.registry().by_name("H").unwrap().id();
                for name in ["A", "B"] {
                    let v = spec.registry().by_name(name).unwrap().id();
                    assert_eq!(spec.dag().parents(v), &[h]);
                }
            }
            other => panic!("expected a static model, got {other:?}"),
        }
    }
}
