//! Human-readable rendering of a network, one block per variable:
//!
//! ```text
//! P(GaussianVar0 | HiddenVar) follows a Normal|Multinomial
//! Normal [ mu = 15.4386, var = 2.4076 ] | {HiddenVar = 0}
//! Normal [ mu = 15.8262, var = 2.5964 ] | {HiddenVar = 1}
//! ```

use crate::model::config::config_unrank;
use crate::model::cpd::{Cpd, LinearGaussian};
use crate::model::network::BayesianNetwork;
use crate::model::variable::VarId;
use std::fmt;

impl fmt::Display for BayesianNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Bayesian Network:")?;
        for v in self.registry().ids() {
            write_variable_block(self, v, f)?;
        }
        Ok(())
    }
}

fn write_variable_block(net: &BayesianNetwork, v: VarId, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let var = net.var(v);
    let parent_names: Vec<&str> = net.parents(v).iter().map(|&p| net.var(p).name()).collect();
    if parent_names.is_empty() {
        writeln!(f, "P({}) follows a {}", var.name(), net.kind(v).tag())?;
    } else {
        writeln!(
            f,
            "P({} | {}) follows a {}",
            var.name(),
            parent_names.join(", "),
            net.kind(v).tag()
        )?;
    }
    let disc = &net.structure().disc_parents[v.index()];
    let cards = &net.structure().disc_cards[v.index()];
    let n_cfg = net.cpd(v).config_count();
    for cfg in 0..n_cfg {
        let suffix = if disc.is_empty() {
            String::new()
        } else {
            let states = config_unrank(cards, cfg);
            let parts: Vec<String> = disc
                .iter()
                .zip(&states)
                .map(|(&p, &s)| {
                    let pv = net.var(p);
                    format!("{} = {}", pv.name(), pv.space().labels()[s])
                })
                .collect();
            format!(" | {{{}}}", parts.join(", "))
        };
        match net.cpd(v) {
            Cpd::Multinomial(m) => {
                let probs: Vec<String> = m.row(cfg).iter().map(|p| p.to_string()).collect();
                writeln!(f, "[ {} ]{}", probs.join(", "), suffix)?;
            }
            Cpd::Gaussian(g) => {
                writeln!(f, "{}{}", gaussian_line(g.config(cfg)), suffix)?;
            }
        }
    }
    writeln!(f)
}

fn gaussian_line(lg: &LinearGaussian) -> String {
    if lg.coeffs.is_empty() {
        format!("Normal [ mu = {}, var = {} ]", lg.intercept, lg.variance)
    } else {
        let betas: Vec<String> = lg.coeffs.iter().map(|b| b.to_string()).collect();
        format!(
            "Normal [ alpha = {}, beta = [ {} ], var = {} ]",
            lg.intercept,
            betas.join(", "),
            lg.variance
        )
    }
}
