//! `learn`: stream an ARFF file through a model template's learner.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use crate::data::{batches, Binding, DynamicDataStream};
use crate::dynamic::{dynamic_learner_to_json, DynamicLearner, SequenceSlice};
use crate::error::{Error, Result};
use crate::learning::{learner_to_json, Learner, LearnerConfig, UpdateSummary};
use crate::model::Assignment;
use crate::zoo::{Template, TemplateModel};

#[derive(Args, Debug)]
pub(crate) struct LearnArgs {
    /// Template id with optional knobs: gmm:k=3, nb:class=Label, blr, fa:factors=2,
    /// hmm:states=4, kf:hidden=2, or custom:<description-file>.
    #[arg(long)]
    pub model: String,
    /// ARFF input; `-` reads standard input. Temporal templates expect
    /// SEQUENCE_ID and TIME_ID columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file: point-estimate network plus posterior
    /// hyperparameters, loadable by `infer` and `filter`.
    #[arg(long)]
    pub out: PathBuf,
    /// Rows (or sequence slices) folded into the posterior per update.
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Worker threads per batch; the result does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Stochastic schedule `kappa,tau`: decaying-weight updates that treat
    /// each batch as a fresh draw from the stream (static templates only).
    #[arg(long)]
    pub svi: Option<String>,
    /// Recorded in the run diagnostics; learning itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Appends one tab-separated `batch size bound` line per update.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub(crate) fn run(args: &LearnArgs) -> Result<()> {
    let template = Template::parse(&args.model)?;
    if args.batch_size == 0 {
        return Err(Error::Config("--batch-size must be at least 1".into()));
    }
    let svi = args.svi.as_deref().map(parse_svi).transpose()?;
    let mut cfg = LearnerConfig::default();
    if let Some((kappa, tau)) = svi {
        cfg.svi_forgetting = kappa;
        cfg.svi_delay = tau;
    }
    let mut log = match &args.log {
        Some(path) => Some(fs::OpenOptions::new().create(true).append(true).open(path)?),
        None => None,
    };

    // Claim the output path up front, so a bad path fails before any data
    // is read and a failed run leaves nothing behind.
    let tmp = super::partial_path(&args.out);
    fs::File::create(&tmp)?;
    let fitted = if template.is_dynamic() {
        if svi.is_some() {
            Err(Error::Config(
                "--svi applies to static templates only; sequence learning is exact".into(),
            ))
        } else {
            learn_dynamic(args, &template, cfg, &mut log)
        }
    } else {
        learn_static(args, &template, cfg, svi.is_some(), &mut log)
    };
    let written = fitted.and_then(|text| {
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &args.out)?;
        Ok(())
    });
    if written.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    written
}

fn learn_static(
    args: &LearnArgs,
    template: &Template,
    cfg: LearnerConfig,
    svi: bool,
    log: &mut Option<fs::File>,
) -> Result<String> {
    let stream = super::open_rows(&args.data)?;
    let attrs = stream.attributes().clone();
    let TemplateModel::Static(spec) = template.build(&attrs)? else {
        unreachable!("static templates build static models")
    };
    let mut learner = Learner::with_config(spec, cfg);
    let binding = Binding::new(&attrs, learner.spec().registry())?;
    let rows = stream.map(|row| row.and_then(|r| binding.to_assignment(&r)));
    for batch in batches(rows, args.batch_size) {
        let batch = batch?;
        let summary = if svi {
            learner.svi_step(&batch.instances, batch.instances.len() as f64)?
        } else {
            learner.update_parallel(&batch.instances, args.workers)?
        };
        log_line(log, &summary)?;
    }
    eprintln!(
        "fitted {} on {} instances in {} batches (seed {})",
        args.model,
        learner.seen(),
        learner.log().len(),
        args.seed
    );
    learner_to_json(&learner)
}

fn learn_dynamic(
    args: &LearnArgs,
    template: &Template,
    cfg: LearnerConfig,
    log: &mut Option<fs::File>,
) -> Result<String> {
    let stream = DynamicDataStream::new(super::open_rows(&args.data)?)?;
    let attrs = stream.attributes().clone();
    let TemplateModel::Dynamic(spec) = template.build(&attrs)? else {
        unreachable!("temporal templates build dynamic models")
    };
    let mut learner = DynamicLearner::with_config(spec, cfg);
    let n_vars = learner.spec().registry().len();
    let binding = Binding::new(&attrs, learner.spec().registry())?;
    // Skipped TIME_IDs become fully unobserved slices, so transitions keep
    // their true temporal distance.
    let mut last: Option<(u64, u64)> = None;
    let slices = stream.flat_map(|row| -> Vec<Result<SequenceSlice>> {
        let inst = match row {
            Ok(inst) => inst,
            Err(e) => return vec![Err(e)],
        };
        let gap = match last {
            Some((seq, t)) if seq == inst.sequence => inst.time - t - 1,
            _ => 0,
        };
        last = Some((inst.sequence, inst.time));
        let mut out: Vec<Result<SequenceSlice>> = (0..gap)
            .map(|_| {
                Ok(SequenceSlice { sequence: inst.sequence, values: Assignment::new(n_vars) })
            })
            .collect();
        out.push(
            binding
                .to_assignment(&inst.values)
                .map(|values| SequenceSlice { sequence: inst.sequence, values }),
        );
        out
    });
    for batch in batches(slices, args.batch_size) {
        let batch = batch?;
        let summary = learner.update(&batch.instances)?;
        log_line(log, &summary)?;
    }
    eprintln!(
        "fitted {} on {} slices in {} batches (seed {})",
        args.model,
        learner.seen(),
        learner.log().len(),
        args.seed
    );
    dynamic_learner_to_json(&learner)
}

fn log_line(log: &mut Option<fs::File>, summary: &UpdateSummary) -> Result<()> {
    if let Some(f) = log {
        writeln!(f, "{}\t{}\t{}", summary.batch, summary.size, summary.bound)?;
    }
    Ok(())
}

/// Parses `kappa,tau`; convergence needs `kappa` in (0.5, 1] and a
/// non-negative delay.
fn parse_svi(text: &str) -> Result<(f64, f64)> {
    let mut parts = text.split(',');
    let (Some(kappa), Some(tau), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Config(format!("--svi takes `kappa,tau`, got `{text}`")));
    };
    let number = |s: &str, what: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("--svi {what} `{s}` is not a number")))
    };
    let (kappa, tau) = (number(kappa, "forgetting exponent")?, number(tau, "delay")?);
    if !(0.5 < kappa && kappa <= 1.0) {
        return Err(Error::Config(format!(
            "forgetting exponent {kappa} is outside (0.5, 1]"
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("delay {tau} must be non-negative")));
    }
    Ok((kappa, tau))
}
