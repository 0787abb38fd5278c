//! `infer`: posterior marginals of a saved model given evidence.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use crate::error::{Error, Result};
use crate::inference::{importance_sampling_infer, vmp_infer, InferenceConfig, Marginal};
use crate::model::{deserialize_model, Assignment, BayesianNetwork};

use super::{Algo, OutputFormat};

#[derive(Args, Debug)]
pub(crate) struct InferArgs {
    /// Model file; learner files also load, carrying their point estimate.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated `name=value` observations, e.g. `A=on,X=-0.5`.
    #[arg(long)]
    pub evidence: Option<String>,
    /// Comma-separated query variables.
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = Algo::Vmp)]
    pub algo: Algo,
    /// Draw count for `--algo is`.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Seed for `--algo is`; identical seeds give identical output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

pub(crate) fn run(args: &InferArgs) -> Result<()> {
    let net = deserialize_model(fs::File::open(&args.model)?)?;
    let (evidence, condition) = parse_evidence(&net, args.evidence.as_deref())?;
    let targets = parse_targets(&net, &args.target)?;

    let cfg = InferenceConfig {
        sample_count: args.samples,
        seed: args.seed,
        ..InferenceConfig::default()
    };
    let posterior = match args.algo {
        Algo::Vmp => {
            let outcome = vmp_infer(&net, &evidence, &cfg)?;
            if !outcome.converged {
                eprintln!("warning: coordinate ascent hit the sweep limit before converging");
            }
            outcome.posterior
        }
        Algo::Is => {
            let outcome = importance_sampling_infer(&net, &evidence, &cfg)?;
            eprintln!(
                "effective sample size {:.1} of {}",
                outcome.effective_sample_size, args.samples
            );
            outcome.posterior
        }
    };

    for v in targets {
        let var = net.var(v);
        // An observed target has a delta posterior rather than an entry.
        let marginal = match posterior.marginal(v) {
            Some(m) => m.clone(),
            None => super::point_marginal(var, evidence.get(v).expect("observed")),
        };
        print_marginal(args, var.name(), &condition, &marginal);
    }
    Ok(())
}

/// Builds the evidence assignment and the query text shown after `|`.
fn parse_evidence(
    net: &BayesianNetwork,
    text: Option<&str>,
) -> Result<(Assignment, String)> {
    let mut evidence = Assignment::new(net.len());
    let mut shown = Vec::new();
    for pair in text.unwrap_or("").split(',').filter(|p| !p.trim().is_empty()) {
        let (name, value) = pair.split_once('=').ok_or_else(|| {
            Error::Config(format!("evidence `{pair}` is not a `name=value` pair"))
        })?;
        let (name, value) = (name.trim(), value.trim());
        let var = net.registry().by_name(name)?;
        evidence.set(var, super::parse_value(var, value)?)?;
        shown.push(format!("{name}={value}"));
    }
    Ok((evidence, shown.join(", ")))
}

fn parse_targets(net: &BayesianNetwork, text: &str) -> Result<Vec<crate::model::VarId>> {
    let names: Vec<&str> = text.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if names.is_empty() {
        return Err(Error::Config("--target needs at least one variable name".into()));
    }
    names.iter().map(|n| Ok(net.registry().by_name(n)?.id())).collect()
}

fn print_marginal(args: &InferArgs, target: &str, condition: &str, marginal: &Marginal) {
    match args.format {
        OutputFormat::Text => {
            if condition.is_empty() {
                println!("P({target}) = {marginal}");
            } else {
                println!("P({target}|{condition}) = {marginal}");
            }
        }
        OutputFormat::Json => {
            let line = serde_json::json!({
                "target": target,
                "posterior": super::marginal_json(marginal),
            });
            println!("{line}");
        }
    }
}
