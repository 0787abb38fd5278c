//! `filter`: slice-by-slice state estimation over a temporal stream.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use crate::data::{Binding, DynamicDataStream};
use crate::dynamic::{deserialize_dynamic_model, FactoredFilter, SliceEngine};
use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::model::{deserialize_model, Assignment};

use super::{Algo, OutputFormat};

#[derive(Args, Debug)]
pub(crate) struct FilterArgs {
    /// Dynamic model file (written by `learn` with a temporal template).
    #[arg(long)]
    pub model: PathBuf,
    /// Temporal ARFF with SEQUENCE_ID and TIME_ID columns; `-` reads
    /// standard input.
    #[arg(long)]
    pub data: PathBuf,
    /// Variable whose filtered posterior is printed.
    #[arg(long)]
    pub target: String,
    /// Look-ahead per step: also print the posterior `h` slices into the
    /// future (0 = filtered lines only).
    #[arg(long, default_value_t = 0)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = Algo::Vmp)]
    pub algo: Algo,
    /// Draw count per slice for `--algo is`.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Seed for `--algo is`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

pub(crate) fn run(args: &FilterArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model)?;
    let dbn = match deserialize_dynamic_model(text.as_bytes()) {
        Ok(dbn) => dbn,
        // A static file would fail with a missing-key message; say what is
        // actually wrong with it.
        Err(_) if deserialize_model(text.as_bytes()).is_ok() => {
            return Err(Error::Schema(
                "the model file is static; `filter` needs a dynamic model (use `infer` instead)"
                    .into(),
            ))
        }
        Err(e) => return Err(e),
    };
    let target = dbn.registry().by_name(&args.target)?.id();

    let stream = DynamicDataStream::new(super::open_rows(&args.data)?)?;
    let attrs = stream.attributes().clone();
    let binding = Binding::new(&attrs, dbn.registry())?;
    let cfg = InferenceConfig {
        sample_count: args.samples,
        seed: args.seed,
        ..InferenceConfig::default()
    };
    let engine = match args.algo {
        Algo::Vmp => SliceEngine::Vmp,
        Algo::Is => SliceEngine::ImportanceSampling,
    };

    let empty = Assignment::new(dbn.len());
    let mut filter = FactoredFilter::with_engine(&dbn, cfg.clone(), engine);
    let mut sequence: Option<u64> = None;
    let mut origin = 0;
    for row in stream {
        let row = row?;
        if sequence != Some(row.sequence) {
            // Each sequence is a fresh realization of the process.
            filter = FactoredFilter::with_engine(&dbn, cfg.clone(), engine);
            sequence = Some(row.sequence);
            origin = row.time;
        }
        // Skipped TIME_IDs are slices with no observations.
        while origin + (filter.time() + 1) as u64 < row.time {
            filter.step(&empty)?;
        }
        let evidence = binding.to_assignment(&row.values)?;
        let filtered = filter.step(&evidence)?.marginal(target).clone();
        let predicted = if args.horizon > 0 {
            Some(filter.predictive(args.horizon)?.marginal(target).clone())
        } else {
            None
        };

        let t = row.time;
        match args.format {
            OutputFormat::Text => {
                println!("t={t} {filtered}");
                if let Some(ahead) = &predicted {
                    println!("t={t}+{} {ahead}", args.horizon);
                }
            }
            OutputFormat::Json => {
                let mut line = serde_json::json!({
                    "sequence": row.sequence,
                    "time": t,
                    "target": args.target,
                    "filtered": super::marginal_json(&filtered),
                });
                if let Some(ahead) = &predicted {
                    line["horizon"] = serde_json::json!(args.horizon);
                    line["predictive"] = super::marginal_json(ahead);
                }
                println!("{line}");
            }
        }
    }
    Ok(())
}
