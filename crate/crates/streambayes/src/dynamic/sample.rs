//! Forward sampling of whole sequences from a dynamic network.

use super::{DynamicBayesianNetwork, TemporalParent};
use crate::error::{Error, Result};
use crate::model::config::config_index;
use crate::model::{sample_row, sample_with, Assignment, Cpd, Value};
use rand::Rng;
use rand_distr::StandardNormal;

/// Draws `n_sequences` independent sequences of `length` slices each by
/// ancestral sampling: the first slice from the first-slice network, every
/// later slice from the transition given the one before it.
pub fn sample_sequences<R: Rng + ?Sized>(
    dbn: &DynamicBayesianNetwork,
    rng: &mut R,
    n_sequences: usize,
    length: usize,
) -> Result<Vec<Vec<Assignment>>> {
    if length == 0 {
        return Err(Error::Config("sequence length must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n_sequences);
    for _ in 0..n_sequences {
        let mut seq = Vec::with_capacity(length);
        seq.push(sample_with(dbn.time0(), rng)?);
        for _ in 1..length {
            let prev = seq.last().expect("first slice sampled above");
            let mut cur = Assignment::new(dbn.len());
            for &v in dbn.transition_topo() {
                // Parent values in declared order, split by kind.
                let mut cards = Vec::new();
                let mut states = Vec::new();
                let mut xs = Vec::new();
                for tp in dbn.transition_parents(v) {
                    let value = match tp {
                        TemporalParent::Previous(p) => prev.get(*p),
                        TemporalParent::Current(c) => cur.get(*c),
                    }
                    .expect("parents precede children in transition order");
                    match value {
                        Value::Index(s) => {
                            let space = dbn.registry().get(tp.var()).space();
                            cards.push(space.cardinality().expect("index value"));
                            states.push(s);
                        }
                        Value::Real(x) => xs.push(x),
                    }
                }
                let cfg = config_index(&cards, &states);
                match dbn.transition_cpd(v) {
                    Cpd::Multinomial(m) => {
                        cur.set_raw(v, Value::Index(sample_row(m.row(cfg), rng)));
                    }
                    Cpd::Gaussian(g) => {
                        let lg = g.config(cfg);
                        let z = lg.mean(&xs)
                            + lg.variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
                        cur.set_raw(v, Value::Real(z));
                    }
                }
            }
            seq.push(cur);
        }
        out.push(seq);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::state_space_model;
    use super::*;
    use crate::model::{BayesianNetwork, Dag, StateSpace, VarId, VariableRegistry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_sequences() {
        let dbn = state_space_model();
        let a = sample_sequences(&dbn, &mut ChaCha8Rng::seed_from_u64(7), 3, 5).unwrap();
        let b = sample_sequences(&dbn, &mut ChaCha8Rng::seed_from_u64(7), 3, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|seq| seq.len() == 5));
        assert!(a
            .iter()
            .flatten()
            .all(|slice| slice.is_set(VarId(0)) && slice.is_set(VarId(1))));
    }

    #[test]
    fn chain_increments_follow_the_transition() {
        // Sticky two-state chain: long-run transition frequencies should
        // match the rows.
        let mut reg = VariableRegistry::new();
        let s = reg.add_observable("S", StateSpace::finite_states(2).unwrap()).unwrap();
        let time0 = BayesianNetwork::new(
            Dag::new(reg),
            vec![Cpd::multinomial_root(vec![0.5, 0.5])],
        )
        .unwrap();
        let dbn = DynamicBayesianNetwork::new(
            time0,
            vec![vec![TemporalParent::Previous(s)]],
            vec![Cpd::multinomial(vec![vec![0.9, 0.1], vec![0.2, 0.8]])],
        )
        .unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seqs = sample_sequences(&dbn, &mut rng, 40, 120).unwrap();
        let mut stay0 = 0.0f64;
        let mut from0 = 0.0f64;
        for seq in &seqs {
            for w in seq.windows(2) {
                if w[0].get(s) == Some(Value::Index(0)) {
                    from0 += 1.0;
                    if w[1].get(s) == Some(Value::Index(0)) {
                        stay0 += 1.0;
                    }
                }
            }
        }
        let rate = stay0 / from0;
        assert!((rate - 0.9).abs() < 0.02, "stay rate {rate}");
    }
}
