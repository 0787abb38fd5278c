//! Command-line front end: `learn`, `infer`, `filter`, and `sample`.
//!
//! Every subcommand is a thin composition of library calls; no numeric
//! logic lives here. Results go to stdout, diagnostics to stderr, and the
//! exit code classifies failures: `0` success, `1` usage (bad flags, bad
//! template ids), `2` data or model problems, `3` numeric failures such as
//! zero-probability evidence.
//!
//! ```text
//! streambayes learn  --model gmm:k=3 --data rows.arff --out mix.json
//! streambayes infer  --model mix.json --evidence GaussianVar0=1.5 --target HiddenVar
//! streambayes filter --model lds.json --data seq.arff --target HiddenVar --horizon 1
//! streambayes sample --model mix.json --n 1000 --seed 7 --out fresh.arff
//! ```

mod filter;
mod infer;
mod learn;
mod sample;

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{read_arff, DataStream};
use crate::error::{Error, Result};
use crate::inference::Marginal;
use crate::model::{StateSpace, Value, Variable};

/// Top-level argument grammar; `run` owns the exit-code mapping.
#[derive(Debug, Parser)]
#[command(
    name = "streambayes",
    version,
    about = "Streaming Bayesian learning and inference for hybrid networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model template to an ARFF stream and write the posterior.
    Learn(learn::LearnArgs),
    /// Query posterior marginals of a saved model.
    Infer(infer::InferArgs),
    /// Track a temporal stream through a dynamic model, slice by slice.
    Filter(filter::FilterArgs),
    /// Draw ancestral samples from a model into an ARFF file.
    Sample(sample::SampleArgs),
}

/// Inference engine selector shared by `infer` and `filter`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    /// Variational message passing: deterministic coordinate ascent.
    Vmp,
    /// Importance sampling: seeded likelihood weighting.
    Is,
}

/// Encoding of result lines on stdout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// Human-oriented lines.
    Text,
    /// One JSON object per line.
    Json,
}

/// Runs the CLI against the process arguments and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point: parses `args` (program name first) and executes
/// one subcommand.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // `--help` and `--version` print to stdout and succeed; real
            // argument problems are usage errors.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Learn(args) => learn::run(args),
        Command::Infer(args) => infer::run(args),
        Command::Filter(args) => filter::run(args),
        Command::Sample(args) => sample::run(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Opens an ARFF source; the path `-` reads standard input.
fn open_rows(path: &Path) -> Result<DataStream<Box<dyn BufRead>>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(std::io::BufReader::new(std::io::stdin()))
    } else {
        Box::new(std::io::BufReader::new(fs::File::open(path)?))
    };
    read_arff(reader)
}

/// Sibling path used while an output file is being produced.
fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".partial");
    PathBuf::from(name)
}

/// Parses the value half of a `name=value` token against the variable's
/// state space: labels (or in-range state indices) for finite variables,
/// finite numbers for real ones.
fn parse_value(var: &Variable, text: &str) -> Result<Value> {
    match var.space() {
        StateSpace::Real => {
            let x: f64 = text.parse().map_err(|_| {
                Error::Domain(format!("`{text}` is not a number for `{}`", var.name()))
            })?;
            if !x.is_finite() {
                return Err(Error::Domain(format!("non-finite value for `{}`", var.name())));
            }
            Ok(Value::Real(x))
        }
        StateSpace::Finite { labels } => {
            if let Some(i) = labels.iter().position(|l| l == text) {
                return Ok(Value::Index(i));
            }
            if let Ok(i) = text.parse::<usize>() {
                if i < labels.len() {
                    return Ok(Value::Index(i));
                }
            }
            Err(Error::Domain(format!("`{text}` is not a state of `{}`", var.name())))
        }
    }
}

/// The delta marginal of an observed value, mirroring what the filtering
/// belief reports for evidence variables.
fn point_marginal(var: &Variable, value: Value) -> Marginal {
    match (var.space().cardinality(), value) {
        (Some(card), Value::Index(i)) => {
            let mut probs = vec![0.0; card];
            probs[i] = 1.0;
            Marginal::Discrete(probs)
        }
        (_, Value::Real(x)) => Marginal::Gaussian { mean: x, variance: 0.0 },
        (None, Value::Index(i)) => Marginal::Gaussian { mean: i as f64, variance: 0.0 },
    }
}

/// JSON rendering of a marginal for `--format json` lines.
fn marginal_json(m: &Marginal) -> serde_json::Value {
    match m {
        Marginal::Discrete(p) => serde_json::json!({ "probabilities": p }),
        Marginal::Gaussian { mean, variance } => {
            serde_json::json!({ "mean": mean, "variance": variance })
        }
    }
}
