//! `sample`: seeded ancestral draws from a static model into ARFF.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{write_arff_file, Attributes, DataInstance};
use crate::dynamic::deserialize_dynamic_model;
use crate::error::{Error, Result};
use crate::model::{deserialize_model, sample_with, VarId, Variable};

#[derive(Args, Debug)]
pub(crate) struct SampleArgs {
    /// Static model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of rows to draw.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Identical seeds give byte-identical files.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output ARFF; latent variables get no column.
    #[arg(long)]
    pub out: PathBuf,
}

pub(crate) fn run(args: &SampleArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model)?;
    let net = match deserialize_model(text.as_bytes()) {
        Ok(net) => net,
        Err(_) if deserialize_dynamic_model(text.as_bytes()).is_ok() => {
            return Err(Error::Schema(
                "the model file is dynamic; `sample` draws rows from static models".into(),
            ))
        }
        Err(e) => return Err(e),
    };
    let attrs = Attributes::observables_from_network(&net);
    let columns: Vec<VarId> =
        net.registry().iter().filter(|v| !v.is_latent()).map(Variable::id).collect();

    // Rows are drawn lazily while the writer consumes them, so memory use
    // is independent of `n`; a draw failure stops the iterator and is
    // re-raised after the file is cleaned up.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failure: Option<Error> = None;
    let rows = (0..args.n).map_while(|_| match sample_with(&net, &mut rng) {
        Ok(a) => Some(DataInstance::new(columns.iter().map(|&v| a.get(v)).collect())),
        Err(e) => {
            failure = Some(e);
            None
        }
    });

    let tmp = super::partial_path(&args.out);
    let written = write_arff_file(&tmp, &attrs, rows);
    let outcome = match failure {
        Some(e) => Err(e),
        None => written.and_then(|()| Ok(fs::rename(&tmp, &args.out)?)),
    };
    if outcome.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    outcome
}
