//! Experiment drivers. Each takes a serializable config, fills an
//! [`Output`] and returns a JSON report.

pub mod bound;
pub mod deconv;
pub mod ising;
pub mod lp;
pub mod rbm;
pub mod sample;
pub mod toy;

use std::time::{Duration, Instant};

use clap::ValueEnum;
use pmp_core::learning::NegativePhase;
use pmp_core::max_product::SweepConfig;
use pmp_core::models::EnergyModel;
use pmp_core::rng::Streams;
use pmp_core::samplers::{sample_chains, SamplerSpec};
use pmp_core::factor_graph::{Assignment, Evidence};
use pmp_core::Result;
use serde::{Deserialize, Serialize};

use crate::output::Output;

/// Sampler used for learning and for post-training sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pmp,
    /// Persistent Gibbs chains during learning.
    Gibbs,
    /// Gibbs chains restarted from uniform noise every iteration.
    GibbsReset,
    /// Persistent Gibbs, conventionally with few sweeps per iteration.
    Pcd,
}

impl Method {
    pub fn negative_phase(self) -> NegativePhase {
        match self {
            Method::Pmp => NegativePhase::Pmp,
            Method::Gibbs | Method::Pcd => NegativePhase::Gibbs { persistent: true },
            Method::GibbsReset => NegativePhase::Gibbs { persistent: false },
        }
    }

    /// Independent samples: PMP decodes, otherwise Gibbs from uniform noise.
    pub fn draw<M: EnergyModel>(
        self,
        model: &M,
        sweeps: usize,
        damping: f64,
        count: usize,
        streams: Streams,
    ) -> Result<Vec<Assignment>> {
        let sampler = model.sampler()?;
        let mut spec = match self {
            Method::Pmp => SamplerSpec::pmp(sweeps, count),
            _ => SamplerSpec::gibbs(sweeps, count),
        };
        spec.damping = damping;
        sample_chains(&sampler, &spec, &Evidence::none(), streams)
    }
}

/// Wall-clock cap shared by a run.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    start: Instant,
    limit: Option<Duration>,
}

impl Budget {
    pub fn new(secs: Option<f64>) -> Self {
        Self {
            start: Instant::now(),
            limit: secs.map(Duration::from_secs_f64),
        }
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.limit.map(|l| l.saturating_sub(self.start.elapsed()))
    }

    pub fn exhausted(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }
}

pub(crate) fn sweep_config(damping: f64, sweeps: usize) -> Result<SweepConfig> {
    SweepConfig::new(damping, sweeps)
}

/// A complete experiment description; stored verbatim in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Experiment {
    Toy(toy::ToyConfig),
    Bound(bound::BoundConfig),
    Ising(ising::IsingConfig),
    Rbm(rbm::RbmConfig),
    Deconv(deconv::DeconvConfig),
    LpExport(lp::LpConfig),
    Sample(sample::SampleConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Toy(_) => "toy",
            Experiment::Bound(_) => "bound",
            Experiment::Ising(_) => "ising",
            Experiment::Rbm(_) => "rbm",
            Experiment::Deconv(_) => "deconv",
            Experiment::LpExport(_) => "lp-export",
            Experiment::Sample(_) => "sample",
        }
    }

    /// Runs the experiment. When a budget truncates the run, the config is
    /// rewritten to the work actually done so that it replays exactly.
    pub fn run(&mut self, out: &mut Output) -> Result<serde_json::Value> {
        let report = match self {
            Experiment::Toy(c) => serde_json::to_value(toy::run(c, out)?)?,
            Experiment::Bound(c) => serde_json::to_value(bound::run(c, out)?)?,
            Experiment::Ising(c) => serde_json::to_value(ising::run(c, out)?)?,
            Experiment::Rbm(c) => serde_json::to_value(rbm::run(c, out)?)?,
            Experiment::Deconv(c) => serde_json::to_value(deconv::run(c, out)?)?,
            Experiment::LpExport(c) => serde_json::to_value(lp::run(c, out)?)?,
            Experiment::Sample(c) => serde_json::to_value(sample::run(c, out)?)?,
        };
        out.json("report.json", &report)?;
        Ok(report)
    }

    /// Files read by the experiment, hashed into the manifest.
    pub fn inputs(&self) -> Vec<std::path::PathBuf> {
        match self {
            Experiment::Ising(c) => c.dataset.input_files(),
            Experiment::Rbm(c) => c.dataset.input_files(),
            Experiment::Deconv(c) => c.truth_dir.iter().map(|d| d.join("truth.json")).collect(),
            Experiment::LpExport(c) => c.model.iter().cloned().collect(),
            Experiment::Sample(c) => vec![c.model.clone()],
            _ => Vec::new(),
        }
    }
}
