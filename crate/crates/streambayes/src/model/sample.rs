//! Ancestral (forward) sampling from a network.

use crate::error::Result;
use crate::model::assignment::{Assignment, Value};
use crate::model::cpd::Cpd;
use crate::model::network::BayesianNetwork;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Draws one complete assignment by sampling each variable in topological
/// order, conditioning on the already-sampled parents.
pub fn sample_with<R: Rng + ?Sized>(net: &BayesianNetwork, rng: &mut R) -> Result<Assignment> {
    let mut a = Assignment::new(net.len());
    for &v in net.topological_order() {
        let cfg = net.parent_config(v, &a)?;
        match net.cpd(v) {
            Cpd::Multinomial(m) => {
                a.set_raw(v, Value::Index(sample_row(m.row(cfg), rng)));
            }
            Cpd::Gaussian(g) => {
                let x = net.cont_parent_values(v, &a)?;
                let lg = g.config(cfg);
                let z: f64 = lg.mean(&x) + lg.variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
                a.set_raw(v, Value::Real(z));
            }
        }
    }
    Ok(a)
}

/// Seeded convenience wrapper around [`sample_with`]; the same seed always
/// yields the same assignment.
pub fn ancestral_sample(net: &BayesianNetwork, seed: u64) -> Result<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(net, &mut rng)
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1 // guard against accumulated rounding
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cpd::LinearGaussian;
    use crate::model::variable::{StateSpace, VariableRegistry};
    use crate::model::Dag;

    fn bernoulli_chain() -> BayesianNetwork {
        let mut reg = VariableRegistry::new();
        let d = reg.add_observable("D", StateSpace::finite_states(2).unwrap()).unwrap();
        let z = reg.add_observable("Z", StateSpace::real()).unwrap();
        let mut dag = Dag::new(reg);
        dag.add_edge(d, z).unwrap();
        BayesianNetwork::new(
            dag,
            vec![
                Cpd::multinomial_root(vec![0.7, 0.3]),
                Cpd::gaussian(vec![
                    LinearGaussian::isolated(-2.0, 1.0),
                    LinearGaussian::isolated(2.0, 1.0),
                ]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn same_seed_gives_identical_samples() {
        let net = bernoulli_chain();
        let a = ancestral_sample(&net, 42).unwrap();
        let b = ancestral_sample(&net, 42).unwrap();
        assert_eq!(a, b);
        let c = ancestral_sample(&net, 43).unwrap();
        assert_ne!(a, c); // overwhelmingly likely for a continuous variable
    }

    #[test]
    fn empirical_frequency_approaches_the_root_probability() {
        let net = bernoulli_chain();
        let d = net.var_by_name("D").unwrap().id();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut ones = 0;
        for _ in 0..n {
            let a = sample_with(&net, &mut rng).unwrap();
            if a.get(d) == Some(Value::Index(1)) {
                ones += 1;
            }
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "frequency {freq} strayed from 0.3");
    }

    #[test]
    fn continuous_child_tracks_its_configuration_mean() {
        let net = bernoulli_chain();
        let d = net.var_by_name("D").unwrap().id();
        let z = net.var_by_name("Z").unwrap().id();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut sum0, mut n0) = (0.0, 0);
        for _ in 0..20_000 {
            let a = sample_with(&net, &mut rng).unwrap();
            if a.get(d) == Some(Value::Index(0)) {
                sum0 += a.get(z).unwrap().as_real().unwrap();
                n0 += 1;
            }
        }
        let mean0 = sum0 / n0 as f64;
        assert!((mean0 + 2.0).abs() < 0.05, "conditional mean {mean0} strayed from -2");
    }
}
