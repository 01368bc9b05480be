//! Four fully coupled spins with one shared coupling, learned from exact
//! moments of a reference coupling.

use pmp_core::evaluation::{empirical_distribution, exact_distribution, exact_moments, kl_divergence};
use pmp_core::learning::{exact_moment_train, Init, Optimizer, TrainConfig};
use pmp_core::models::toy_model;
use pmp_core::rng::Streams;
use pmp_core::Result;
use serde::{Deserialize, Serialize};

use super::{Budget, Method};
use crate::output::Output;

const STREAM_TRAIN: u64 = 1;
const STREAM_EVAL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub seed: u64,
    pub theta_true: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub chains: usize,
    pub sweeps: usize,
    pub damping: f64,
    pub method: Method,
    /// PMP samples drawn from the learned model to estimate its sampler KL.
    pub eval_samples: usize,
    pub budget_secs: Option<f64>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            theta_true: 0.5,
            iterations: 200,
            learning_rate: 0.01,
            chains: 100,
            sweeps: 100,
            damping: 0.5,
            method: Method::Pmp,
            eval_samples: 1_000_000,
            budget_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub theta_hat: f64,
    /// `KL(p(θ_true) ‖ p(θ̂))`, exact.
    pub kl_model: f64,
    /// `KL(p(θ_true) ‖ q)` with `q` the empirical distribution of samples
    /// from the learned model.
    pub kl_sampler: f64,
    pub iterations: usize,
    pub truncated: bool,
}

pub fn run(cfg: &mut ToyConfig, out: &mut Output) -> Result<ToyReport> {
    let budget = Budget::new(cfg.budget_secs);
    let streams = Streams::new(cfg.seed);
    let truth = toy_model(cfg.theta_true);
    let moments = exact_moments(&truth)?;
    let mut model = toy_model(0.0);
    let n_unary = model.num_unary_states();
    let tying = (0..model.num_params()).map(|p| (p >= n_unary).then_some(0)).collect();
    let train = TrainConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.chains,
        sweeps: cfg.sweeps,
        iterations: cfg.iterations,
        damping: cfg.damping,
        optimizer: Optimizer::adam(),
        negative: cfg.method.negative_phase(),
        l1: 0.0,
        init: Init::Zeros,
        tying: Some(tying),
        budget: budget.remaining(),
    };
    let mut trace = Vec::new();
    let t0 = std::time::Instant::now();
    let state = exact_moment_train(&mut model, &moments, &train, streams.child(STREAM_TRAIN), &mut |m, rec| {
        trace.push((rec.iteration, m.params()[n_unary], rec.grad_norm));
    })?;
    out.time("train", t0.elapsed());
    if state.truncated {
        cfg.iterations = state.iteration;
        cfg.budget_secs = None;
    }
    let theta_hat = state.free_params()[0];
    out.csv(
        "train.csv",
        &["iteration", "theta", "grad_norm"],
        trace.iter().map(|&(i, t, g)| [i.to_string(), t.to_string(), g.to_string()]),
    )?;

    let p = exact_distribution(&truth)?;
    let kl_model = kl_divergence(&p, &exact_distribution(&model)?)?;
    let t0 = std::time::Instant::now();
    let samples = cfg
        .method
        .draw(&model, cfg.sweeps, cfg.damping, cfg.eval_samples, streams.child(STREAM_EVAL))?;
    out.time("sample", t0.elapsed());
    let q = empirical_distribution(&samples, model.cardinalities(), 0.0)?;
    let kl_sampler = kl_divergence(&p, &q)?;
    Ok(ToyReport {
        theta_hat,
        kl_model,
        kl_sampler,
        iterations: state.iteration,
        truncated: state.truncated,
    })
}
