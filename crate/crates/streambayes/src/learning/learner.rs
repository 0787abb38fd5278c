//! The streaming learner: sequential, parallel, and stochastic updates.

use super::{block_expectations, Block, GaussianBlock, LearnerConfig, ModelSpec};
use crate::ef::{Dirichlet, EfDistribution, SufficientStatistics};
use crate::error::{Error, Result};
use crate::inference::{EngineNet, ExpCpd, Views};
use crate::model::{Assignment, BayesianNetwork, Cpd, LinearGaussian, StructureIndex, VarId};
use rayon::prelude::*;
use std::ops::Range;

/// Chunk count used by [`Learner::update_parallel`] when `worker_count` is
/// zero. Fixing it (instead of asking the thread pool) keeps results
/// independent of the machine the code happens to run on.
const DEFAULT_PARALLEL_CHUNKS: usize = 8;

/// What one update absorbed and how well the model explained it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateSummary {
    /// 0-based position of this update in the learner's history.
    pub batch: usize,
    /// Number of instances absorbed.
    pub size: usize,
    /// Sum over the batch of each instance's evidence lower bound, scored
    /// under the parameter expectations in force *before* the update; a
    /// running predictive score of the stream.
    pub bound: f64,
}

/// Accumulated expected sufficient statistics, shaped like the blocks.
#[derive(Clone, Debug)]
pub(crate) enum BlockStats {
    Dirichlet { rows: Vec<Vec<f64>> },
    Gaussian { configs: Vec<GaussStats> },
    Fixed,
}

#[derive(Clone, Debug)]
pub(crate) struct GaussStats {
    /// Total configuration responsibility.
    weight: f64,
    /// Weighted expected residual `z - sum_c E[beta_c] x_c`.
    sum: f64,
    /// Weighted expected squared residual.
    sum_sq: f64,
    /// Per-coefficient linear natural increment (already times `E[tau]`).
    coeff_lin: Vec<f64>,
    /// Per-coefficient precision increment `E[tau] E[x_c^2]`.
    coeff_prec: Vec<f64>,
}

impl GaussStats {
    fn zero(n_coeffs: usize) -> GaussStats {
        GaussStats {
            weight: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
            coeff_lin: vec![0.0; n_coeffs],
            coeff_prec: vec![0.0; n_coeffs],
        }
    }
}

/// Streaming Bayesian learner over a [`ModelSpec`].
///
/// Holds one conjugate posterior block per variable, initialized to the
/// prior. [`Learner::update`] folds a batch into the posterior, which then
/// acts as the prior for the next batch; the data itself is never kept.
#[derive(Clone, Debug)]
pub struct Learner {
    spec: ModelSpec,
    cfg: LearnerConfig,
    posterior: Vec<Block>,
    seen: f64,
    svi_steps: usize,
    log: Vec<UpdateSummary>,
}

impl Learner {
    pub fn new(spec: ModelSpec) -> Learner {
        Learner::with_config(spec, LearnerConfig::default())
    }

    pub fn with_config(spec: ModelSpec, cfg: LearnerConfig) -> Learner {
        let posterior = spec.blocks().to_vec();
        Learner { spec, cfg, posterior, seen: 0.0, svi_steps: 0, log: Vec::new() }
    }

    /// Restores a learner from externally stored posterior blocks.
    pub(crate) fn from_parts(
        spec: ModelSpec,
        cfg: LearnerConfig,
        posterior: Vec<Block>,
        seen: f64,
        svi_steps: usize,
    ) -> Result<Learner> {
        if posterior.len() != spec.blocks().len() {
            return Err(Error::Schema(format!(
                "{} posterior blocks for a model with {} variables",
                posterior.len(),
                spec.blocks().len()
            )));
        }
        for (restored, prior) in posterior.iter().zip(spec.blocks()) {
            let ok = match (restored, prior) {
                (Block::Dirichlet(a), Block::Dirichlet(b)) => {
                    a.len() == b.len()
                        && a.iter().zip(b).all(|(x, y)| x.alphas.len() == y.alphas.len())
                }
                (Block::Gaussian(a), Block::Gaussian(b)) => {
                    a.len() == b.len()
                        && a.iter().zip(b).all(|(x, y)| x.coeffs.len() == y.coeffs.len())
                }
                (Block::Fixed(_), Block::Fixed(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Schema(
                    "posterior blocks do not match the model structure".into(),
                ));
            }
        }
        Ok(Learner { spec, cfg, posterior, seen, svi_steps, log: Vec::new() })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    /// Current posterior block of one variable.
    pub fn posterior(&self, v: VarId) -> &Block {
        &self.posterior[v.index()]
    }

    /// Total number of instances absorbed so far.
    pub fn seen(&self) -> f64 {
        self.seen
    }

    /// Number of stochastic steps taken (drives the step-size schedule).
    pub fn svi_steps(&self) -> usize {
        self.svi_steps
    }

    /// One summary per update, in order.
    pub fn log(&self) -> &[UpdateSummary] {
        &self.log
    }

    /// Absorbs a batch: posterior += expected sufficient statistics.
    pub fn update(&mut self, batch: &[Assignment]) -> Result<UpdateSummary> {
        self.absorb(batch, 1)
    }

    /// Like [`Learner::update`], but computes the batch statistics on
    /// `worker_count` parallel chunks (0 picks a fixed default). The chunk
    /// layout depends only on `worker_count` and the batch length, so the
    /// result is reproducible on any machine; it agrees with the
    /// sequential update up to floating-point summation order.
    pub fn update_parallel(
        &mut self,
        batch: &[Assignment],
        worker_count: usize,
    ) -> Result<UpdateSummary> {
        let chunks = if worker_count == 0 { DEFAULT_PARALLEL_CHUNKS } else { worker_count };
        self.absorb(batch, chunks)
    }

    /// One stochastic-approximation step from a minibatch of a stream with
    /// `total_n` instances overall. Blends the natural parameters toward
    /// `prior + (total_n / minibatch) * stats` with step size
    /// `rho_t = (t + delay)^-forgetting`; with the default delay the first
    /// step replaces the posterior outright.
    pub fn svi_step(&mut self, minibatch: &[Assignment], total_n: f64) -> Result<UpdateSummary> {
        self.check_batch(minibatch)?;
        if !(total_n >= minibatch.len() as f64) {
            return Err(Error::Config(format!(
                "stream size {total_n} is smaller than the minibatch ({} instances)",
                minibatch.len()
            )));
        }
        let rho = (self.svi_steps as f64 + self.cfg.svi_delay).powf(-self.cfg.svi_forgetting);
        let (stats, bound) = self.batch_stats(minibatch, 1)?;
        let scale = total_n / minibatch.len() as f64;
        let target = absorbed(self.spec.blocks(), &stats, scale)?;
        self.posterior = blended(&self.posterior, &target, rho)?;
        self.svi_steps += 1;
        self.seen += minibatch.len() as f64;
        let summary = UpdateSummary { batch: self.log.len(), size: minibatch.len(), bound };
        self.log.push(summary);
        Ok(summary)
    }

    /// Posterior-mean parameters as a concrete network: Dirichlet rows
    /// become their mean probabilities, each Gaussian configuration takes
    /// the intercept and coefficient means and the variance posterior mean
    /// `rate / (shape - 1)`. Fails with [`Error::UndefinedVarianceMean`]
    /// when any Gamma shape is still <= 1 (e.g. an untouched default
    /// prior).
    pub fn point_estimate(&self) -> Result<BayesianNetwork> {
        let mut cpds = Vec::with_capacity(self.posterior.len());
        for v in self.spec.registry().ids() {
            cpds.push(block_point_cpd(
                &self.posterior[v.index()],
                self.spec.dag().var(v).name(),
            )?);
        }
        BayesianNetwork::new(self.spec.dag().clone(), cpds)
    }

    fn absorb(&mut self, batch: &[Assignment], chunks: usize) -> Result<UpdateSummary> {
        self.check_batch(batch)?;
        let (stats, bound) = self.batch_stats(batch, chunks)?;
        self.posterior = absorbed(&self.posterior, &stats, 1.0)?;
        self.seen += batch.len() as f64;
        let summary = UpdateSummary { batch: self.log.len(), size: batch.len(), bound };
        self.log.push(summary);
        Ok(summary)
    }

    fn check_batch(&self, batch: &[Assignment]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Config("batch is empty".into()));
        }
        for inst in batch {
            if inst.n_vars() != self.spec.dag().len() {
                return Err(Error::Schema(format!(
                    "instance covers {} variables, the model has {}",
                    inst.n_vars(),
                    self.spec.dag().len()
                )));
            }
        }
        Ok(())
    }

    /// Expected sufficient statistics of a batch under the *current*
    /// (frozen) parameter expectations, plus the summed per-instance bound.
    fn batch_stats(&self, batch: &[Assignment], chunks: usize) -> Result<(Vec<BlockStats>, f64)> {
        let cpds: Vec<ExpCpd> = self.posterior.iter().map(block_expectations).collect();
        let cards = self
            .spec
            .registry()
            .iter()
            .map(|v| v.space().cardinality())
            .collect();
        let net = EngineNet::new(self.spec.structure(), cpds, cards);
        let ranges = chunk_ranges(batch.len(), chunks);
        let parts: Vec<Result<(Vec<BlockStats>, f64)>> = if ranges.len() == 1 {
            vec![self.chunk_stats(&net, batch)]
        } else {
            ranges
                .par_iter()
                .map(|r| self.chunk_stats(&net, &batch[r.clone()]))
                .collect()
        };
        let mut total = zero_stats(self.spec.blocks());
        let mut bound = 0.0;
        for part in parts {
            let (stats, b) = part?;
            merge_stats(&mut total, &stats);
            bound += b;
        }
        Ok((total, bound))
    }

    fn chunk_stats(&self, net: &EngineNet, instances: &[Assignment]) -> Result<(Vec<BlockStats>, f64)> {
        let mut stats = zero_stats(self.spec.blocks());
        let mut bound = 0.0;
        for inst in instances {
            let complete = (0..net.len()).all(|i| inst.is_set(VarId(i)));
            let views = if complete {
                net.init_views(inst)?
            } else {
                net.run(inst, self.cfg.max_iterations, self.cfg.elbo_rel_tol)?.views
            };
            bound += net.elbo(&views);
            accumulate(self.spec.structure(), net, &views, &mut stats);
        }
        Ok((stats, bound))
    }
}

/// Posterior-mean distribution of one block; `name` is for error reports.
pub(crate) fn block_point_cpd(block: &Block, name: &str) -> Result<Cpd> {
    Ok(match block {
        Block::Fixed(c) => c.clone(),
        Block::Dirichlet(rows) => Cpd::multinomial(
            rows.iter()
                .map(|d| {
                    let total: f64 = d.alphas.iter().sum();
                    d.alphas.iter().map(|a| a / total).collect()
                })
                .collect(),
        ),
        Block::Gaussian(configs) => {
            let mut lgs = Vec::with_capacity(configs.len());
            for c in configs {
                let variance = c.base.variance_mean().ok_or_else(|| {
                    Error::UndefinedVarianceMean { variable: name.to_string() }
                })?;
                lgs.push(LinearGaussian::new(
                    c.base.mean,
                    c.coeffs.iter().map(|g| g.mean).collect(),
                    variance,
                ));
            }
            Cpd::gaussian(lgs)
        }
    })
}

/// Splits `0..n` into `chunks` contiguous near-equal ranges.
fn chunk_ranges(n: usize, chunks: usize) -> Vec<Range<usize>> {
    let k = chunks.clamp(1, n.max(1));
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

pub(crate) fn zero_stats(blocks: &[Block]) -> Vec<BlockStats> {
    blocks
        .iter()
        .map(|b| match b {
            Block::Dirichlet(rows) => BlockStats::Dirichlet {
                rows: rows.iter().map(|d| vec![0.0; d.alphas.len()]).collect(),
            },
            Block::Gaussian(cfgs) => BlockStats::Gaussian {
                configs: cfgs.iter().map(|c| GaussStats::zero(c.coeffs.len())).collect(),
            },
            Block::Fixed(_) => BlockStats::Fixed,
        })
        .collect()
}

fn merge_stats(into: &mut [BlockStats], from: &[BlockStats]) {
    for (a, b) in into.iter_mut().zip(from) {
        match (a, b) {
            (BlockStats::Fixed, BlockStats::Fixed) => {}
            (BlockStats::Dirichlet { rows: a }, BlockStats::Dirichlet { rows: b }) => {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
            }
            (BlockStats::Gaussian { configs: a }, BlockStats::Gaussian { configs: b }) => {
                for (ca, cb) in a.iter_mut().zip(b) {
                    ca.weight += cb.weight;
                    ca.sum += cb.sum;
                    ca.sum_sq += cb.sum_sq;
                    for (x, y) in ca.coeff_lin.iter_mut().zip(&cb.coeff_lin) {
                        *x += y;
                    }
                    for (x, y) in ca.coeff_prec.iter_mut().zip(&cb.coeff_prec) {
                        *x += y;
                    }
                }
            }
            _ => unreachable!("statistics shaped from the same spec"),
        }
    }
}

/// Adds one instance's expected sufficient statistics under its posterior
/// views. Copies of the observed instance flow through unchanged: observed
/// views are point masses, so the expectations reduce to the raw values.
pub(crate) fn accumulate(structure: &StructureIndex, net: &EngineNet, views: &Views, stats: &mut [BlockStats]) {
    for (idx, slot) in stats.iter_mut().enumerate() {
        let v = VarId(idx);
        let dp = &structure.disc_parents[idx];
        let cards = &structure.disc_cards[idx];
        match slot {
            BlockStats::Fixed => {}
            BlockStats::Dirichlet { rows } => {
                let child = views.view(v).probs();
                for (config, row) in rows.iter_mut().enumerate() {
                    let w = views.config_probability(dp, cards, config);
                    if w <= 0.0 {
                        continue;
                    }
                    for (cell, q) in row.iter_mut().zip(child) {
                        *cell += w * q;
                    }
                }
            }
            BlockStats::Gaussian { configs } => {
                let (z1, z2) = {
                    let view = views.view(v);
                    (view.m1(), view.m2())
                };
                let cps = &structure.cont_parents[idx];
                let xm: Vec<(f64, f64)> = cps
                    .iter()
                    .map(|p| {
                        let pv = views.view(*p);
                        (pv.m1(), pv.m2())
                    })
                    .collect();
                let ExpCpd::Gaussian { configs: gexp } = &net.cpds[idx] else {
                    unreachable!("real variable has a Gaussian expected form")
                };
                for (config, st) in configs.iter_mut().enumerate() {
                    let w = views.config_probability(dp, cards, config);
                    if w <= 0.0 {
                        continue;
                    }
                    let g = &gexp[config];
                    let bx: f64 = g.e_beta.iter().zip(&xm).map(|(b, m)| b * m.0).sum();
                    let mut e_r2 = z2 - 2.0 * z1 * bx;
                    for c in 0..xm.len() {
                        e_r2 += g.e_beta2[c] * xm[c].1;
                        for c2 in c + 1..xm.len() {
                            e_r2 += 2.0 * g.e_beta[c] * g.e_beta[c2] * xm[c].0 * xm[c2].0;
                        }
                    }
                    st.weight += w;
                    st.sum += w * (z1 - bx);
                    st.sum_sq += w * e_r2;
                    for c in 0..xm.len() {
                        let others: f64 = (0..xm.len())
                            .filter(|&c2| c2 != c)
                            .map(|c2| g.e_beta[c2] * xm[c2].0)
                            .sum();
                        st.coeff_lin[c] +=
                            w * xm[c].0 * (g.e_tau * z1 - g.e_tau_alpha - g.e_tau * others);
                        st.coeff_prec[c] += w * g.e_tau * xm[c].1;
                    }
                }
            }
        }
    }
}

/// `base + scale * stats` in natural coordinates, block by block.
pub(crate) fn absorbed(base: &[Block], stats: &[BlockStats], scale: f64) -> Result<Vec<Block>> {
    let mut out = Vec::with_capacity(base.len());
    for (block, stat) in base.iter().zip(stats) {
        out.push(match (block, stat) {
            (Block::Fixed(c), _) => Block::Fixed(c.clone()),
            (Block::Dirichlet(rows), BlockStats::Dirichlet { rows: counts }) => {
                let mut new_rows = Vec::with_capacity(rows.len());
                for (d, c) in rows.iter().zip(counts) {
                    let scaled: Vec<f64> = c.iter().map(|x| x * scale).collect();
                    let updated = EfDistribution::Dirichlet(d.clone())
                        .posterior_update(&SufficientStatistics::Categorical { counts: scaled })?;
                    new_rows.push(updated.as_dirichlet().expect("family preserved").clone());
                }
                Block::Dirichlet(new_rows)
            }
            (Block::Gaussian(cfgs), BlockStats::Gaussian { configs }) => {
                let mut new_cfgs = Vec::with_capacity(cfgs.len());
                for (c, st) in cfgs.iter().zip(configs) {
                    let base_updated = EfDistribution::NormalGamma(c.base)
                        .posterior_update(&SufficientStatistics::GaussianObservations {
                            weight: st.weight * scale,
                            sum: st.sum * scale,
                            sum_sq: st.sum_sq * scale,
                        })?;
                    let mut coeffs = Vec::with_capacity(c.coeffs.len());
                    for (g, (lin, prec)) in c
                        .coeffs
                        .iter()
                        .zip(st.coeff_lin.iter().zip(&st.coeff_prec))
                    {
                        let updated = EfDistribution::Gaussian(*g).posterior_update(
                            &SufficientStatistics::GaussianKnownPrecision {
                                weighted_sum: lin * scale,
                                weighted_precision: prec * scale,
                            },
                        )?;
                        coeffs.push(*updated.as_gaussian().expect("family preserved"));
                    }
                    new_cfgs.push(GaussianBlock {
                        base: *base_updated.as_normal_gamma().expect("family preserved"),
                        coeffs,
                    });
                }
                Block::Gaussian(new_cfgs)
            }
            _ => unreachable!("statistics shaped from the same spec"),
        });
    }
    Ok(out)
}

/// `(1 - rho) * current + rho * target` in natural coordinates.
fn blended(current: &[Block], target: &[Block], rho: f64) -> Result<Vec<Block>> {
    current
        .iter()
        .zip(target)
        .map(|(cur, tgt)| match (cur, tgt) {
            (Block::Fixed(c), _) => Ok(Block::Fixed(c.clone())),
            (Block::Dirichlet(a), Block::Dirichlet(b)) => Ok(Block::Dirichlet(
                // The Dirichlet natural parameter is `alpha - 1`, so
                // blending the concentrations blends the naturals.
                a.iter()
                    .zip(b)
                    .map(|(x, y)| Dirichlet {
                        alphas: x
                            .alphas
                            .iter()
                            .zip(&y.alphas)
                            .map(|(p, q)| (1.0 - rho) * p + rho * q)
                            .collect(),
                    })
                    .collect(),
            )),
            (Block::Gaussian(a), Block::Gaussian(b)) => {
                let mut cfgs = Vec::with_capacity(a.len());
                for (x, y) in a.iter().zip(b) {
                    let base = blend_ef(
                        EfDistribution::NormalGamma(x.base),
                        EfDistribution::NormalGamma(y.base),
                        rho,
                    )?;
                    let mut coeffs = Vec::with_capacity(x.coeffs.len());
                    for (g, h) in x.coeffs.iter().zip(&y.coeffs) {
                        let mixed =
                            blend_ef(EfDistribution::Gaussian(*g), EfDistribution::Gaussian(*h), rho)?;
                        coeffs.push(*mixed.as_gaussian().expect("family preserved"));
                    }
                    cfgs.push(GaussianBlock {
                        base: *base.as_normal_gamma().expect("family preserved"),
                        coeffs,
                    });
                }
                Ok(Block::Gaussian(cfgs))
            }
            _ => unreachable!("posterior shaped from the same spec"),
        })
        .collect()
}

fn blend_ef(cur: EfDistribution, tgt: EfDistribution, rho: f64) -> Result<EfDistribution> {
    let family = cur.family();
    let a = cur.natural();
    let b = tgt.natural();
    let eta: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (1.0 - rho) * x + rho * y)
        .collect();
    EfDistribution::from_natural(family, &eta)
}
