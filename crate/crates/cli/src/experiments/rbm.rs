//! Binary RBM learned from synthetic or MNIST images.

use pmp_core::data_io::{write_params, write_samples};
use pmp_core::evaluation::{mmd2, SampleSet};
use pmp_core::learning::{init_state, train, Init, Optimizer, PositivePhase, TrainConfig};
use pmp_core::models::{EnergyModel, RbmModel};
use pmp_core::rng::Streams;
use pmp_core::Result;
use serde::{Deserialize, Serialize};

use super::ising::{uniform_samples, SweepScore};
use super::{Budget, Method};
use crate::dataset::{split, Dataset};
use crate::output::Output;

const STREAM_TRAIN: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_BASELINE: u64 = 3;
const STREAM_UNIFORM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmConfig {
    pub seed: u64,
    pub dataset: Dataset,
    pub holdout: f64,
    pub n_hidden: usize,
    pub method: Method,
    pub optimizer: OptimizerKind,
    pub iterations: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub chains: usize,
    pub sweeps: usize,
    pub damping: f64,
    pub eval_sweeps: Vec<usize>,
    pub eval_samples: usize,
    pub budget_secs: Option<f64>,
}

impl Default for RbmConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: Dataset::Stripes {
                count: 2500,
                side: 8,
                density: 0.25,
                noise: 0.02,
            },
            holdout: 0.2,
            n_hidden: 32,
            method: Method::Pmp,
            optimizer: OptimizerKind::Adam,
            iterations: 500,
            learning_rate: 0.01,
            init_std: 0.01,
            chains: 100,
            sweeps: 100,
            damping: 0.5,
            eval_sweeps: vec![1, 10, 100, 1000],
            eval_samples: 1000,
            budget_secs: None,
        }
    }
}

impl RbmConfig {
    /// MNIST zero contours with 500 hidden units and SGD.
    pub fn full_scale() -> Self {
        Self {
            dataset: Dataset::MnistZeros { dir: None },
            n_hidden: 500,
            optimizer: OptimizerKind::Sgd,
            iterations: 10_000,
            eval_samples: 1000,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmReport {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub iterations: usize,
    pub truncated: bool,
    pub scores: Vec<SweepScore>,
    /// Same evaluation for the model at its initialization.
    pub untrained: Vec<SweepScore>,
    pub uniform_mmd2: f64,
}

fn score(
    model: &RbmModel,
    method: Method,
    cfg: &RbmConfig,
    test: &SampleSet,
    streams: Streams,
) -> Result<(Vec<SweepScore>, Option<SampleSet>)> {
    let visible = model.visible_vars();
    let mut scores = Vec::new();
    let mut last = None;
    for (k, &sweeps) in cfg.eval_sweeps.iter().enumerate() {
        let xs = method.draw(model, sweeps, cfg.damping, cfg.eval_samples, streams.child(k as u64))?;
        let set = SampleSet::from_assignments(&xs, "samples")?.select_columns(&visible);
        let m = mmd2(&set, test)?;
        scores.push(SweepScore {
            sweeps,
            mmd2: m,
            log_mmd2: m.ln(),
        });
        last = Some(set);
    }
    Ok((scores, last))
}

pub fn run(cfg: &mut RbmConfig, out: &mut Output) -> Result<RbmReport> {
    let budget = Budget::new(cfg.budget_secs);
    let streams = Streams::new(cfg.seed);
    let data = cfg.dataset.load(cfg.seed)?;
    let (train_set, test_set) = split(&data, cfg.holdout, cfg.seed)?;
    let n_visible = data.cols();
    let rows = train_set.to_assignments();
    let mut model = RbmModel::zeros(n_visible, cfg.n_hidden);
    let visible = model.visible_vars();
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.chains,
        sweeps: cfg.sweeps,
        iterations: cfg.iterations,
        damping: cfg.damping,
        optimizer: match cfg.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::adam(),
        },
        negative: cfg.method.negative_phase(),
        l1: 0.0,
        init: Init::Normal { std: cfg.init_std },
        tying: None,
        budget: budget.remaining(),
    };
    let mut untrained_model = model.clone();
    init_state(&mut untrained_model, &tc, streams.child(STREAM_TRAIN))?;

    let mut trace = Vec::new();
    let t0 = std::time::Instant::now();
    let state = train(
        &mut model,
        PositivePhase::Data { data: &rows, visible: &visible },
        &tc,
        streams.child(STREAM_TRAIN),
        &mut |_, rec| trace.push((rec.iteration, rec.grad_norm)),
    )?;
    out.time("train", t0.elapsed());
    if state.truncated {
        cfg.iterations = state.iteration;
        cfg.budget_secs = None;
    }
    out.csv(
        "train.csv",
        &["iteration", "grad_norm"],
        trace.iter().map(|&(i, g)| [i.to_string(), g.to_string()]),
    )?;
    out.bytes("params.bin", write_params(&model.params()));

    let t0 = std::time::Instant::now();
    let (scores, last) = score(&model, cfg.method, cfg, &test_set, streams.child(STREAM_EVAL))?;
    let (untrained, _) = score(&untrained_model, cfg.method, cfg, &test_set, streams.child(STREAM_BASELINE))?;
    out.time("evaluate", t0.elapsed());
    if let Some(set) = last {
        out.bytes("samples.pmps", write_samples(&set));
    }
    out.csv(
        "mmd.csv",
        &["sweeps", "log_mmd2", "untrained_log_mmd2"],
        scores
            .iter()
            .zip(&untrained)
            .map(|(s, u)| [s.sweeps.to_string(), s.log_mmd2.to_string(), u.log_mmd2.to_string()]),
    )?;
    let uniform_mmd2 = mmd2(&uniform_samples(cfg.eval_samples, n_visible, cfg.seed, STREAM_UNIFORM)?, &test_set)?;
    Ok(RbmReport {
        n_visible,
        n_hidden: cfg.n_hidden,
        iterations: state.iteration,
        truncated: state.truncated,
        scores,
        untrained,
        uniform_mmd2,
    })
}
