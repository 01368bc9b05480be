//! Perturb-and-max-product sampling and Gibbs baselines.
//!
//! A [`Sampler`] is a model prepared for repeated sampling. PMP draws a
//! fresh Gumbel vector, clamps the evidence, runs damped max-product from
//! zero messages and decodes. Gibbs sweeps resample every free variable
//! from its exact conditional in ascending order.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Evidence, FactorGraph, CLAMP_SCORE};
use crate::max_product::{argmax, Engine, SweepConfig};
use crate::perturbation::{fill_gumbel, persistent_step, PersistentPerturbationState};
use crate::rng::{ChainRng, Streams};

/// A model prepared for sampling.
pub trait Sampler: Send + Sync {
    fn cardinalities(&self) -> &[usize];

    fn num_vars(&self) -> usize {
        self.cardinalities().len()
    }

    /// Length of a perturbation vector, `Σ_i |x_i|`.
    fn unary_len(&self) -> usize {
        self.cardinalities().iter().sum()
    }

    /// Max-product decode of the model with unaries perturbed by `eps` and
    /// the evidence clamped. The result always agrees with the evidence.
    fn perturbed_map(&self, eps: &[f64], evidence: &Evidence, cfg: &SweepConfig) -> Assignment;

    /// One full sweep of exact conditional updates over the free variables.
    fn gibbs_sweep(&self, x: &mut [usize], evidence: &Evidence, rng: &mut ChainRng);
}

/// Which procedure produces samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Pmp,
    /// Single-site Gibbs in ascending variable order.
    Gibbs,
    /// Hidden layer given visible, then visible given hidden. For an RBM in
    /// visible-then-hidden variable order this coincides with `Gibbs`.
    BlockGibbsRbm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub sweeps: usize,
    pub damping: f64,
    pub persistent: bool,
    pub chains: usize,
}

impl SamplerSpec {
    pub fn pmp(sweeps: usize, chains: usize) -> Self {
        Self {
            kind: SamplerKind::Pmp,
            sweeps,
            damping: 0.5,
            persistent: false,
            chains,
        }
    }

    pub fn gibbs(sweeps: usize, chains: usize) -> Self {
        Self {
            kind: SamplerKind::Gibbs,
            sweeps,
            damping: 0.5,
            persistent: false,
            chains,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::parameter("sweep count must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::parameter("chain count must be at least 1"));
        }
        self.sweep_config().validate()
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            damping: self.damping,
            sweeps: self.sweeps,
        }
    }
}

/// One PMP sample without evidence.
pub fn pmp_sample<S: Sampler + ?Sized>(sampler: &S, cfg: &SweepConfig, rng: &mut ChainRng) -> Assignment {
    let eps = fill_gumbel(sampler.unary_len(), rng);
    sampler.perturbed_map(&eps, &Evidence::none(), cfg)
}

/// One PMP sample from the posterior given `evidence`. Fully observed
/// evidence is returned as is, without touching the generator.
pub fn pmp_posterior_sample<S: Sampler + ?Sized>(
    sampler: &S,
    evidence: &Evidence,
    cfg: &SweepConfig,
    rng: &mut ChainRng,
) -> Assignment {
    let n = sampler.num_vars();
    if evidence.covers_all(n) {
        return Assignment(evidence.iter().map(|(_, s)| s).collect());
    }
    let eps = fill_gumbel(sampler.unary_len(), rng);
    sampler.perturbed_map(&eps, evidence, cfg)
}

/// Uniformly random assignment respecting the evidence.
pub fn random_assignment(cards: &[usize], evidence: &Evidence, rng: &mut ChainRng) -> Assignment {
    let mut x: Vec<usize> = cards.iter().map(|&c| rng.random_range(0..c)).collect();
    for (v, s) in evidence.iter() {
        x[v] = s;
    }
    Assignment(x)
}

/// `sweeps` Gibbs sweeps from a uniformly random start.
pub fn gibbs_sample<S: Sampler + ?Sized>(
    sampler: &S,
    evidence: &Evidence,
    sweeps: usize,
    rng: &mut ChainRng,
) -> Assignment {
    let mut x = random_assignment(sampler.cardinalities(), evidence, rng);
    for _ in 0..sweeps {
        sampler.gibbs_sweep(&mut x, evidence, rng);
    }
    x
}

/// Independent chains; chain `k` draws from stream `k` of `streams`, so
/// results do not depend on thread scheduling.
pub fn sample_chains<S: Sampler + ?Sized>(
    sampler: &S,
    spec: &SamplerSpec,
    evidence: &Evidence,
    streams: Streams,
) -> Result<Vec<Assignment>> {
    spec.validate()?;
    let cfg = spec.sweep_config();
    Ok((0..spec.chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = streams.rng(k as u64, 0);
            match spec.kind {
                SamplerKind::Pmp => pmp_posterior_sample(sampler, evidence, &cfg, &mut rng),
                SamplerKind::Gibbs | SamplerKind::BlockGibbsRbm => {
                    gibbs_sample(sampler, evidence, spec.sweeps, &mut rng)
                }
            }
        })
        .collect())
}

/// PMP with a persistent, correlated perturbation per chain.
#[derive(Debug, Clone)]
pub struct PersistentPmpChain {
    pub perturbation: PersistentPerturbationState,
}

impl PersistentPmpChain {
    pub fn new(unary_len: usize, rho: f64, rng: &mut ChainRng) -> Result<Self> {
        Ok(Self {
            perturbation: PersistentPerturbationState::new(unary_len, rho, rng)?,
        })
    }

    /// Advances the perturbation one step and decodes.
    pub fn sample<S: Sampler + ?Sized>(
        &mut self,
        sampler: &S,
        evidence: &Evidence,
        cfg: &SweepConfig,
        rng: &mut ChainRng,
    ) -> Result<Assignment> {
        let eps = persistent_step(&mut self.perturbation, rng)?;
        Ok(sampler.perturbed_map(&eps, evidence, cfg))
    }
}

/// Draws an index from unnormalized log-weights.
pub(crate) fn sample_log_weights(logw: &[f64], rng: &mut ChainRng) -> usize {
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logw.iter().map(|l| (l - m).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, l) in logw.iter().enumerate() {
        u -= (l - m).exp();
        if u < 0.0 {
            return k;
        }
    }
    argmax(logw)
}

#[inline]
pub(crate) fn bernoulli_logit(logit: f64, rng: &mut ChainRng) -> usize {
    let p = 1.0 / (1.0 + (-logit).exp());
    usize::from(rng.random::<f64>() < p)
}

/// A factor graph prepared for PMP and Gibbs.
#[derive(Debug, Clone)]
pub struct GraphSampler {
    graph: FactorGraph,
    engine: Engine,
    var_factors: Vec<Vec<(usize, usize)>>,
}

impl GraphSampler {
    pub fn new(graph: &FactorGraph) -> Result<Self> {
        Ok(Self {
            engine: Engine::new(graph)?,
            var_factors: graph.variable_factors(),
            graph: graph.clone(),
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Perturbed and clamped unary vector fed to the engine.
    pub fn perturbed_unaries(&self, eps: &[f64], evidence: &Evidence) -> Vec<f64> {
        let offs = self.graph.unary_offsets();
        let mut u: Vec<f64> = self.graph.unaries_flat().iter().zip(eps).map(|(a, b)| a + b).collect();
        for (v, s) in evidence.iter() {
            for k in 0..self.graph.cardinality(v) {
                u[offs[v] + k] = if k == s { 0.0 } else { CLAMP_SCORE };
            }
        }
        u
    }

    /// Like [`Sampler::perturbed_map`], also returning per-sweep message
    /// deltas.
    pub fn perturbed_map_with_deltas(
        &self,
        eps: &[f64],
        evidence: &Evidence,
        cfg: &SweepConfig,
    ) -> (Assignment, Vec<f64>) {
        let u = self.perturbed_unaries(eps, evidence);
        let (mut x, deltas) = self.engine.run(&u, cfg);
        for (v, s) in evidence.iter() {
            x[v] = s;
        }
        (x, deltas)
    }
}

impl Sampler for GraphSampler {
    fn cardinalities(&self) -> &[usize] {
        self.graph.cardinalities()
    }

    fn perturbed_map(&self, eps: &[f64], evidence: &Evidence, cfg: &SweepConfig) -> Assignment {
        self.perturbed_map_with_deltas(eps, evidence, cfg).0
    }

    fn gibbs_sweep(&self, x: &mut [usize], evidence: &Evidence, rng: &mut ChainRng) {
        let clamped = evidence.to_dense(x.len());
        let cards = self.graph.cardinalities();
        let factors = self.graph.factors();
        let mut logw = Vec::new();
        let mut states = Vec::new();
        for i in 0..x.len() {
            if clamped[i].is_some() {
                continue;
            }
            logw.clear();
            logw.extend_from_slice(self.graph.unary(i));
            for &(a, slot) in &self.var_factors[i] {
                let f = &factors[a];
                states.clear();
                states.extend(f.neighbors.iter().map(|&v| x[v]));
                for (s, w) in logw.iter_mut().enumerate() {
                    states[slot] = s;
                    *w += f.log_potential(&states, cards);
                }
            }
            x[i] = sample_log_weights(&logw, rng);
        }
    }
}

/// One block-Gibbs sweep of a binary RBM: `h ~ p(h | v)`, then
/// `v ~ p(v | h)`. `w` is `n_hidden × n_visible`, `b` hidden and `c`
/// visible biases.
pub fn block_gibbs_rbm_sweep(
    w: &ndarray::Array2<f64>,
    b: &[f64],
    c: &[f64],
    v: &mut [usize],
    h: &mut [usize],
    rng: &mut ChainRng,
) -> Result<()> {
    let (m, n) = w.dim();
    if b.len() != m || h.len() != m || c.len() != n || v.len() != n {
        return Err(Error::structural("RBM state and parameter shapes disagree"));
    }
    block_gibbs_into(w, b, c, v, h, None, rng);
    Ok(())
}

pub(crate) fn block_gibbs_into(
    w: &ndarray::Array2<f64>,
    b: &[f64],
    c: &[f64],
    v: &mut [usize],
    h: &mut [usize],
    clamped: Option<&[Option<usize>]>,
    rng: &mut ChainRng,
) {
    let (m, n) = w.dim();
    let free = |k: usize| clamped.is_none_or(|cl| cl[k].is_none());
    for i in 0..m {
        if !free(n + i) {
            continue;
        }
        let row = w.row(i);
        let logit = b[i] + row.iter().zip(v.iter()).filter(|(_, &vj)| vj == 1).map(|(w, _)| w).sum::<f64>();
        h[i] = bernoulli_logit(logit, rng);
    }
    for j in 0..n {
        if !free(j) {
            continue;
        }
        let col = w.column(j);
        let logit = c[j] + col.iter().zip(h.iter()).filter(|(_, &hi)| hi == 1).map(|(w, _)| w).sum::<f64>();
        v[j] = bernoulli_logit(logit, rng);
    }
}
