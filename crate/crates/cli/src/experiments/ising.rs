//! Fully connected Ising model learned from binary images.

use pmp_core::evaluation::{mmd2, SampleSet};
use pmp_core::factor_graph::Assignment;
use pmp_core::learning::{train, Init, Optimizer, PositivePhase, TrainConfig};
use pmp_core::models::{EnergyModel, IsingModel};
use pmp_core::rng::{stream_rng, Streams};
use pmp_core::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Budget, Method};
use crate::dataset::{split, Dataset};
use crate::output::Output;

const STREAM_TRAIN: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_UNIFORM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsingConfig {
    pub seed: u64,
    pub dataset: Dataset,
    pub holdout: f64,
    pub method: Method,
    pub iterations: usize,
    pub learning_rate: f64,
    pub l1: f64,
    pub chains: usize,
    pub sweeps: usize,
    pub damping: f64,
    /// Sweep counts at which post-training samples are scored.
    pub eval_sweeps: Vec<usize>,
    pub eval_samples: usize,
    pub budget_secs: Option<f64>,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: Dataset::Contours { count: 200, side: 10 },
            holdout: 0.2,
            method: Method::Pmp,
            iterations: 300,
            learning_rate: 0.01,
            l1: 0.0,
            chains: 100,
            sweeps: 50,
            damping: 0.5,
            eval_sweeps: vec![1, 5, 10, 25, 50, 100],
            eval_samples: 200,
            budget_secs: None,
        }
    }
}

impl IsingConfig {
    /// MNIST zero contours with the full-size schedule.
    pub fn full_scale() -> Self {
        Self {
            dataset: Dataset::MnistZeros { dir: None },
            iterations: 1000,
            learning_rate: 0.001,
            eval_sweeps: vec![1, 5, 10, 25, 50, 100, 200],
            eval_samples: 1000,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepScore {
    pub sweeps: usize,
    pub mmd2: f64,
    pub log_mmd2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingReport {
    pub variables: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub iterations: usize,
    pub truncated: bool,
    pub scores: Vec<SweepScore>,
    /// Largest gap between sufficient-statistic means of the samples drawn
    /// at the largest evaluation sweep count and of the training data.
    pub moment_gap: f64,
    pub uniform_mmd2: f64,
}

/// Mean sufficient statistics of a set of assignments.
pub fn mean_stats<M: EnergyModel>(model: &M, xs: &[Assignment]) -> Vec<f64> {
    let mut acc = vec![0.0; model.num_params()];
    for x in xs {
        model.add_stats(x, &mut acc);
    }
    acc.iter_mut().for_each(|v| *v /= xs.len().max(1) as f64);
    acc
}

/// Uniformly random binary rows.
pub fn uniform_samples(rows: usize, cols: usize, seed: u64, stream: u64) -> Result<SampleSet> {
    let mut rng = stream_rng(seed, stream, 0);
    let values = (0..rows * cols).map(|_| rng.random_range(0..2u16)).collect();
    SampleSet::new(rows, cols, values, "uniform")
}

pub fn run(cfg: &mut IsingConfig, out: &mut Output) -> Result<IsingReport> {
    let budget = Budget::new(cfg.budget_secs);
    let streams = Streams::new(cfg.seed);
    let data = cfg.dataset.load(cfg.seed)?;
    let (train_set, test_set) = split(&data, cfg.holdout, cfg.seed)?;
    let n = data.cols();
    let rows = train_set.to_assignments();
    let visible: Vec<usize> = (0..n).collect();
    let mut model = IsingModel::zeros(n);
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.chains,
        sweeps: cfg.sweeps,
        iterations: cfg.iterations,
        damping: cfg.damping,
        optimizer: Optimizer::adam(),
        negative: cfg.method.negative_phase(),
        l1: cfg.l1,
        init: Init::Zeros,
        tying: None,
        budget: budget.remaining(),
    };
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
    out.bytes("params.bin", pmp_core::data_io::write_params(&model.params()));

    let data_moments = mean_stats(&model, &rows);
    let mut scores = Vec::new();
    let mut moment_gap = f64::NAN;
    let t0 = std::time::Instant::now();
    for (k, &sweeps) in cfg.eval_sweeps.iter().enumerate() {
        let xs = cfg
            .method
            .draw(&model, sweeps, cfg.damping, cfg.eval_samples, streams.child(STREAM_EVAL).child(k as u64))?;
        let set = SampleSet::from_assignments(&xs, "samples")?;
        let m = mmd2(&set, &test_set)?;
        scores.push(SweepScore {
            sweeps,
            mmd2: m,
            log_mmd2: m.ln(),
        });
        if k + 1 == cfg.eval_sweeps.len() {
            let sm = mean_stats(&model, &xs);
            moment_gap = sm.iter().zip(&data_moments).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            out.bytes("samples.pmps", pmp_core::data_io::write_samples(&set));
        }
    }
    out.time("evaluate", t0.elapsed());
    out.csv(
        "mmd.csv",
        &["sweeps", "mmd2", "log_mmd2"],
        scores.iter().map(|s| [s.sweeps.to_string(), s.mmd2.to_string(), s.log_mmd2.to_string()]),
    )?;
    let uniform = uniform_samples(cfg.eval_samples, n, cfg.seed, STREAM_UNIFORM)?;
    let uniform_mmd2 = mmd2(&uniform, &test_set)?;
    Ok(IsingReport {
        variables: n,
        train_rows: train_set.rows(),
        test_rows: test_set.rows(),
        iterations: state.iteration,
        truncated: state.truncated,
        scores,
        moment_gap,
        uniform_mmd2,
    })
}
