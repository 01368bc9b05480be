//! Moment-matching stochastic gradient learning.
//!
//! Each iteration draws `S` sample pairs: a positive sample from the
//! posterior given a uniformly chosen datum (or exact data moments when
//! supplied) and a negative sample from the model. The ascent direction is
//! the difference of their mean sufficient statistics.
//!
//! Parameters can be tied: `tying[p] = Some(g)` makes entry `p` share the
//! free parameter `g`, `None` freezes it at its initial value.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Evidence};
use crate::max_product::SweepConfig;
use crate::models::EnergyModel;
use crate::rng::{ChainRng, Streams};
use crate::samplers::{
    gibbs_sample, pmp_posterior_sample, pmp_sample, random_assignment, PersistentPmpChain, Sampler,
};

const STREAM_INIT: u64 = 1;
const STREAM_PAIRS: u64 = 2;
const STREAM_CHAINS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Every free parameter drawn from `N(0, std²)`.
    Normal { std: f64 },
    Zeros,
    /// Keep the model's current parameters.
    Current,
}

/// How negative samples are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegativePhase {
    /// Fresh perturbation and zero messages for every sample.
    Pmp,
    /// One persistent correlated perturbation per chain.
    PersistentPmp { rho: f64 },
    /// `T` Gibbs sweeps; from a uniformly random state every iteration
    /// (`persistent = false`) or continuing the previous chain state.
    Gibbs { persistent: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub sweeps: usize,
    pub iterations: usize,
    pub damping: f64,
    pub optimizer: Optimizer,
    pub negative: NegativePhase,
    /// Soft-threshold strength on pairwise couplings (0 disables).
    pub l1: f64,
    pub init: Init,
    pub tying: Option<Vec<Option<usize>>>,
    /// Wall-clock cap; training stops early and reports truncation.
    pub budget: Option<Duration>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 100,
            sweeps: 100,
            iterations: 200,
            damping: 0.5,
            optimizer: Optimizer::adam(),
            negative: NegativePhase::Pmp,
            l1: 0.0,
            init: Init::Normal { std: 0.01 },
            tying: None,
            budget: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::parameter("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.sweeps == 0 {
            return Err(Error::parameter("batch size and sweep count must be at least 1"));
        }
        if self.l1 < 0.0 {
            return Err(Error::parameter("l1 strength must be non-negative"));
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

/// Source of the positive statistics.
#[derive(Debug, Clone, Copy)]
pub enum PositivePhase<'a> {
    /// Observed values of the variables `visible`, one row per datum.
    Data { data: &'a [Assignment], visible: &'a [usize] },
    /// Exact expected sufficient statistics of the data.
    Moments(&'a [f64]),
}

#[derive(Debug, Clone)]
enum ChainState {
    Fresh,
    Gibbs(Option<Assignment>),
    Pmp(Option<PersistentPmpChain>),
}

/// Parameters, optimizer moments and persistent chains.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub theta: Vec<f64>,
    pub iteration: usize,
    pub truncated: bool,
    free: Vec<f64>,
    groups: Vec<Option<usize>>,
    m: Vec<f64>,
    v: Vec<f64>,
    chains: Vec<ChainState>,
}

impl TrainState {
    /// Free (tied) parameters.
    pub fn free_params(&self) -> &[f64] {
        &self.free
    }

    fn expand(&mut self) {
        for (p, g) in self.groups.iter().enumerate() {
            if let Some(g) = g {
                self.theta[p] = self.free[*g];
            }
        }
    }

    fn reduce(&self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.free.len()];
        for (p, g) in self.groups.iter().enumerate() {
            if let Some(g) = g {
                out[*g] += grad[p];
            }
        }
        out
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub grad_norm: f64,
    pub elapsed: Duration,
}

/// Builds the initial state; the model is updated to the initial `Θ`.
pub fn init_state<M: EnergyModel>(model: &mut M, cfg: &TrainConfig, streams: Streams) -> Result<TrainState> {
    cfg.validate()?;
    let theta = model.params();
    let groups = match &cfg.tying {
        Some(t) => {
            if t.len() != theta.len() {
                return Err(Error::structural("tying map length differs from parameter count"));
            }
            t.clone()
        }
        None => (0..theta.len()).map(Some).collect(),
    };
    let n_free = groups.iter().flatten().map(|g| g + 1).max().unwrap_or(0);
    let mut free = vec![0.0; n_free];
    let mut seen = vec![false; n_free];
    for (p, g) in groups.iter().enumerate() {
        if let Some(g) = *g {
            if !seen[g] {
                free[g] = theta[p];
                seen[g] = true;
            }
        }
    }
    let mut rng = streams.child(STREAM_INIT).rng(0, 0);
    match cfg.init {
        Init::Normal { std } => {
            let d = Normal::new(0.0, std).map_err(|e| Error::parameter(e.to_string()))?;
            free.iter_mut().for_each(|f| *f = d.sample(&mut rng));
        }
        Init::Zeros => free.iter_mut().for_each(|f| *f = 0.0),
        Init::Current => {}
    }
    let chains = (0..cfg.batch_size)
        .map(|_| match cfg.negative {
            NegativePhase::Pmp => ChainState::Fresh,
            NegativePhase::PersistentPmp { .. } => ChainState::Pmp(None),
            NegativePhase::Gibbs { .. } => ChainState::Gibbs(None),
        })
        .collect();
    let mut state = TrainState {
        theta,
        iteration: 0,
        truncated: false,
        m: vec![0.0; n_free],
        v: vec![0.0; n_free],
        free,
        groups,
        chains,
    };
    state.expand();
    model.set_params(&state.theta)?;
    Ok(state)
}

fn positive_sample<S: Sampler>(
    sampler: &S,
    data: &[Assignment],
    visible: &[usize],
    cfg: &TrainConfig,
    rng: &mut ChainRng,
) -> Assignment {
    let datum = &data[rng.random_range(0..data.len())];
    let evidence = Evidence::observe(visible, datum);
    match cfg.negative {
        NegativePhase::Gibbs { .. } => {
            if evidence.covers_all(sampler.num_vars()) {
                Assignment(evidence.iter().map(|(_, s)| s).collect())
            } else {
                gibbs_sample(sampler, &evidence, cfg.sweeps, rng)
            }
        }
        _ => pmp_posterior_sample(sampler, &evidence, &cfg.sweep_config(), rng),
    }
}

fn negative_sample<S: Sampler>(
    sampler: &S,
    chain: &mut ChainState,
    cfg: &TrainConfig,
    rng: &mut ChainRng,
    chain_rng: &mut ChainRng,
) -> Result<Assignment> {
    let sweep = cfg.sweep_config();
    let none = Evidence::none();
    Ok(match chain {
        ChainState::Fresh => pmp_sample(sampler, &sweep, rng),
        ChainState::Pmp(slot) => {
            let rho = match cfg.negative {
                NegativePhase::PersistentPmp { rho } => rho,
                _ => unreachable!("chain state follows the negative phase"),
            };
            if slot.is_none() {
                *slot = Some(PersistentPmpChain::new(sampler.unary_len(), rho, chain_rng)?);
            }
            slot.as_mut().unwrap().sample(sampler, &none, &sweep, rng)?
        }
        ChainState::Gibbs(slot) => {
            let persistent = matches!(cfg.negative, NegativePhase::Gibbs { persistent: true });
            if !persistent || slot.is_none() {
                *slot = Some(random_assignment(sampler.cardinalities(), &none, rng));
            }
            let x = slot.as_mut().unwrap();
            for _ in 0..cfg.sweeps {
                sampler.gibbs_sweep(x, &none, rng);
            }
            x.clone()
        }
    })
}

/// One stochastic estimate of the ascent direction in full parameter space.
pub fn grad_estimate<M: EnergyModel>(
    model: &M,
    sampler: &M::Sampler,
    positive: PositivePhase<'_>,
    cfg: &TrainConfig,
    state: &mut TrainState,
    streams: Streams,
) -> Result<Vec<f64>> {
    let np = model.num_params();
    let it = state.iteration as u64;
    let pairs = streams.child(STREAM_PAIRS);
    let chain_streams = streams.child(STREAM_CHAINS);
    if let PositivePhase::Data { data, visible } = positive {
        if data.is_empty() {
            return Err(Error::parameter("empty training set"));
        }
        if data.iter().any(|d| d.len() != visible.len()) {
            return Err(Error::structural("datum length differs from visible set"));
        }
    }
    let per_pair: Vec<Result<(Vec<f64>, Vec<f64>)>> = state
        .chains
        .par_iter_mut()
        .enumerate()
        .map(|(s, chain)| {
            let mut rng = pairs.rng(s as u64, it);
            let mut chain_rng = chain_streams.rng(s as u64, 0);
            let mut plus = vec![0.0; np];
            if let PositivePhase::Data { data, visible } = positive {
                let y = positive_sample(sampler, data, visible, cfg, &mut rng);
                model.add_stats(&y, &mut plus);
            }
            let y = negative_sample(sampler, chain, cfg, &mut rng, &mut chain_rng)?;
            let mut minus = vec![0.0; np];
            model.add_stats(&y, &mut minus);
            Ok((plus, minus))
        })
        .collect();
    let s = cfg.batch_size as f64;
    let mut grad = match positive {
        PositivePhase::Moments(m) => {
            if m.len() != np {
                return Err(Error::structural("moment vector length differs from parameter count"));
            }
            m.to_vec()
        }
        PositivePhase::Data { .. } => vec![0.0; np],
    };
    for r in per_pair {
        let (plus, minus) = r?;
        for p in 0..np {
            if matches!(positive, PositivePhase::Data { .. }) {
                grad[p] += plus[p] / s;
            }
            grad[p] -= minus[p] / s;
        }
    }
    Ok(grad)
}

/// Gradient-ascent step `θ ← θ + η g`.
pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64) {
    params.iter_mut().zip(grad).for_each(|(p, g)| *p += lr * g);
}

/// Bias-corrected Adam ascent step; `t` counts from 1.
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    params: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    grad: &[f64],
    t: usize,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    for k in 0..params.len() {
        m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
        params[k] += lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
    }
}

/// `x ← sign(x) max(|x| - τ, 0)`.
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// Applies one optimizer step (and the ℓ1 shrinkage) to the state.
pub fn apply_step(state: &mut TrainState, grad_full: &[f64], cfg: &TrainConfig, pairwise: &[bool]) {
    let g = state.reduce(grad_full);
    let t = state.iteration + 1;
    match cfg.optimizer {
        Optimizer::Sgd => sgd_step(&mut state.free, &g, cfg.learning_rate),
        Optimizer::Adam { beta1, beta2, eps } => adam_step(
            &mut state.free,
            &mut state.m,
            &mut state.v,
            &g,
            t,
            cfg.learning_rate,
            beta1,
            beta2,
            eps,
        ),
    }
    if cfg.l1 > 0.0 {
        let mut shrink = vec![false; state.free.len()];
        for (p, g) in state.groups.iter().enumerate() {
            if let Some(g) = g {
                shrink[*g] |= pairwise[p];
            }
        }
        let tau = cfg.learning_rate * cfg.l1;
        for (f, s) in state.free.iter_mut().zip(shrink) {
            if s {
                *f = soft_threshold(*f, tau);
            }
        }
    }
    state.expand();
    state.iteration = t;
}

/// Runs `cfg.iterations` learning iterations (fewer if the budget runs
/// out). `observer` sees the model after every step.
pub fn train<M: EnergyModel>(
    model: &mut M,
    positive: PositivePhase<'_>,
    cfg: &TrainConfig,
    streams: Streams,
    observer: &mut dyn FnMut(&M, &IterationRecord),
) -> Result<TrainState> {
    let mut state = init_state(model, cfg, streams)?;
    let pairwise = model.pairwise_mask();
    let start = Instant::now();
    while state.iteration < cfg.iterations {
        if cfg.budget.is_some_and(|b| start.elapsed() >= b) {
            state.truncated = true;
            break;
        }
        let sampler = model.sampler()?;
        let grad = grad_estimate(model, &sampler, positive, cfg, &mut state, streams)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        apply_step(&mut state, &grad, cfg, &pairwise);
        model.set_params(&state.theta)?;
        observer(
            model,
            &IterationRecord {
                iteration: state.iteration,
                grad_norm,
                elapsed: start.elapsed(),
            },
        );
    }
    Ok(state)
}

/// [`train`] with the positive phase replaced by exact data moments.
pub fn exact_moment_train<M: EnergyModel>(
    model: &mut M,
    moments: &[f64],
    cfg: &TrainConfig,
    streams: Streams,
    observer: &mut dyn FnMut(&M, &IterationRecord),
) -> Result<TrainState> {
    train(model, PositivePhase::Moments(moments), cfg, streams, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::exact_moments;
    use crate::factor_graph::FactorGraph;
    use crate::models::IsingModel;

    fn unary_model() -> FactorGraph {
        FactorGraph::binary(1)
    }

    #[test]
    fn matched_moments_give_zero_gradient() {
        // Point-mass model: every negative sample equals the datum.
        let mut g = FactorGraph::binary(2);
        g.set_unary(0, &[0.0, 1e6]).unwrap();
        g.set_unary(1, &[1e6, 0.0]).unwrap();
        let cfg = TrainConfig {
            init: Init::Current,
            batch_size: 8,
            sweeps: 5,
            ..TrainConfig::default()
        };
        let data = [Assignment(vec![1, 0])];
        let mut model = g.clone();
        let mut state = init_state(&mut model, &cfg, Streams::new(1)).unwrap();
        let sampler = crate::models::EnergyModel::sampler(&model).unwrap();
        let grad = grad_estimate(
            &model,
            &sampler,
            PositivePhase::Data { data: &data, visible: &[0, 1] },
            &cfg,
            &mut state,
            Streams::new(1),
        )
        .unwrap();
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indicator_difference() {
        let mut g = unary_model();
        g.set_unary(0, &[1e6, 0.0]).unwrap();
        let cfg = TrainConfig {
            init: Init::Current,
            batch_size: 4,
            sweeps: 1,
            ..TrainConfig::default()
        };
        let data = [Assignment(vec![1])];
        let mut state = init_state(&mut g, &cfg, Streams::new(2)).unwrap();
        let sampler = crate::models::EnergyModel::sampler(&g).unwrap();
        let grad = grad_estimate(
            &g,
            &sampler,
            PositivePhase::Data { data: &data, visible: &[0] },
            &cfg,
            &mut state,
            Streams::new(2),
        )
        .unwrap();
        assert_eq!(grad, vec![-1.0, 1.0]);
    }

    #[test]
    fn optimizer_steps() {
        let mut p = vec![0.5, -0.5];
        sgd_step(&mut p, &[0.0, 0.0], 0.1);
        assert_eq!(p, vec![0.5, -0.5]);
        sgd_step(&mut p, &[1.0, 0.0], 0.1);
        assert!((p[0] - 0.6).abs() < 1e-15);

        let (mut q, mut m, mut v) = (vec![0.0], vec![0.0], vec![0.0]);
        adam_step(&mut q, &mut m, &mut v, &[0.3], 1, 0.01, 0.9, 0.999, 1e-8);
        // m̂ = 0.3, v̂ = 0.09 → Δ = 0.01 · 0.3 / (0.3 + 1e-8).
        let expect = 0.01 * 0.3 / (0.3 + 1e-8);
        assert!((q[0] - expect).abs() < 1e-15);
        adam_step(&mut q, &mut m, &mut v, &[-0.1], 2, 0.01, 0.9, 0.999, 1e-8);
        let m2 = 0.9 * 0.03 + 0.1 * -0.1;
        let v2 = 0.999 * 0.00009 + 0.001 * 0.01;
        let step = 0.01 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((q[0] - expect - step).abs() < 1e-15);
        assert_eq!(soft_threshold(0.5, 0.2), 0.3);
        assert_eq!(soft_threshold(-0.1, 0.2), 0.0);
    }

    #[test]
    fn zero_iterations_return_initialization() {
        let mut g = FactorGraph::binary(3);
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let st = train(&mut g, PositivePhase::Moments(&[0.0; 6]), &cfg, Streams::new(3), &mut |_, _| {}).unwrap();
        assert_eq!(st.iteration, 0);
        assert_eq!(g.params(), st.theta);
        assert!(st.theta.iter().all(|t| t.abs() < 0.05 && *t != 0.0));
    }

    #[test]
    fn unbiased_on_unary_models() {
        // Both phases are exact softmaxes here, so the mean estimate equals
        // E_data[Φ] - E_model[Φ].
        let mut g = FactorGraph::new(vec![3]).unwrap();
        g.set_unary(0, &[0.2, -0.4, 0.7]).unwrap();
        let cfg = TrainConfig {
            init: Init::Current,
            batch_size: 2000,
            sweeps: 1,
            ..TrainConfig::default()
        };
        let moments = [0.5, 0.25, 0.25];
        let mut acc = [0.0; 3];
        let reps = 20;
        for r in 0..reps {
            let mut st = init_state(&mut g, &cfg, Streams::new(100 + r)).unwrap();
            let s = crate::models::EnergyModel::sampler(&g).unwrap();
            let grad =
                grad_estimate(&g, &s, PositivePhase::Moments(&moments), &cfg, &mut st, Streams::new(100 + r)).unwrap();
            for k in 0..3 {
                acc[k] += grad[k] / reps as f64;
            }
        }
        let p = exact_moments(&g).unwrap();
        for k in 0..3 {
            assert!((acc[k] - (moments[k] - p[k])).abs() < 0.01);
        }
    }

    #[test]
    fn tied_parameters_move_together_and_frozen_stay() {
        let mut g = IsingModel::zeros(3);
        let np = g.num_params();
        let mut tying = vec![None; np];
        for t in tying.iter_mut().skip(3) {
            *t = Some(0);
        }
        let cfg = TrainConfig {
            tying: Some(tying),
            iterations: 5,
            batch_size: 10,
            sweeps: 10,
            ..TrainConfig::default()
        };
        let moments = vec![0.5, 0.5, 0.5, 0.4, 0.4, 0.4];
        let st = exact_moment_train(&mut g, &moments, &cfg, Streams::new(4), &mut |_, _| {}).unwrap();
        assert_eq!(&st.theta[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(st.theta[3], st.theta[4]);
        assert_eq!(st.theta[4], st.theta[5]);
        assert_eq!(st.free_params().len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut g = IsingModel::zeros(4);
            let cfg = TrainConfig {
                iterations: 5,
                batch_size: 16,
                sweeps: 10,
                negative: NegativePhase::Gibbs { persistent: true },
                ..TrainConfig::default()
            };
            let data: Vec<Assignment> = (0..10).map(|k| Assignment(vec![k % 2, 1, 0, k % 3 % 2])).collect();
            train(&mut g, PositivePhase::Data { data: &data, visible: &[0, 1, 2, 3] }, &cfg, Streams::new(5), &mut |_, _| {})
                .unwrap()
                .theta
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn budget_truncates() {
        let mut g = IsingModel::zeros(3);
        let cfg = TrainConfig {
            iterations: 1000,
            budget: Some(Duration::ZERO),
            ..TrainConfig::default()
        };
        let st = exact_moment_train(&mut g, &[0.0; 6], &cfg, Streams::new(6), &mut |_, _| {}).unwrap();
        assert!(st.truncated);
        assert_eq!(st.iteration, 0);
    }
}
