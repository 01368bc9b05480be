//! Samples from a factor graph stored as JSON.

use std::path::PathBuf;

use pmp_core::data_io::write_samples;
use pmp_core::evaluation::SampleSet;
use pmp_core::factor_graph::{Evidence, FactorGraph};
use pmp_core::models::EnergyModel;
use pmp_core::rng::Streams;
use pmp_core::samplers::{sample_chains, SamplerSpec};
use pmp_core::Result;
use serde::{Deserialize, Serialize};

use super::Method;
use crate::output::Output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub seed: u64,
    pub model: PathBuf,
    pub method: Method,
    pub sweeps: usize,
    pub damping: f64,
    pub chains: usize,
    /// Observed `(variable, state)` pairs.
    pub evidence: Vec<(usize, usize)>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: PathBuf::from("model.json"),
            method: Method::Pmp,
            sweeps: 100,
            damping: 0.5,
            chains: 1000,
            evidence: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub samples: usize,
    pub marginals: Vec<Vec<f64>>,
}

pub fn run(cfg: &mut SampleConfig, out: &mut Output) -> Result<SampleReport> {
    let graph = FactorGraph::from_json(&std::fs::read_to_string(&cfg.model)?)?;
    let sampler = graph.sampler()?;
    let mut spec = match cfg.method {
        Method::Pmp => SamplerSpec::pmp(cfg.sweeps, cfg.chains),
        _ => SamplerSpec::gibbs(cfg.sweeps, cfg.chains),
    };
    spec.damping = cfg.damping;
    let evidence = Evidence::from_pairs(cfg.evidence.iter().copied());
    let t0 = std::time::Instant::now();
    let xs = sample_chains(&sampler, &spec, &evidence, Streams::new(cfg.seed))?;
    out.time("sample", t0.elapsed());
    let mut marginals: Vec<Vec<f64>> = graph.cardinalities().iter().map(|&c| vec![0.0; c]).collect();
    for x in &xs {
        for (i, &s) in x.iter().enumerate() {
            marginals[i][s] += 1.0;
        }
    }
    marginals.iter_mut().flatten().for_each(|m| *m /= xs.len() as f64);
    out.bytes("samples.pmps", write_samples(&SampleSet::from_assignments(&xs, "samples")?));
    out.csv(
        "marginals.csv",
        &["variable", "state", "probability"],
        marginals
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.iter().enumerate().map(move |(s, p)| [i.to_string(), s.to_string(), p.to_string()])),
    )?;
    Ok(SampleReport {
        samples: xs.len(),
        marginals,
    })
}
