//! Perturb-and-MAP estimates of `log Z` against exact enumeration.

use pmp_core::evaluation::{exact_log_partition, pmap_log_partition_bound, MapSolver};
use pmp_core::factor_graph::FactorGraph;
use pmp_core::models::{cyclic_lattice, random_tree, EnergyModel, IsingModel};
use pmp_core::rng::{stream_rng, Streams};
use pmp_core::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sweep_config, Budget};
use crate::output::Output;

const STREAM_MODEL: u64 = 1;
const STREAM_DRAWS: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundModel {
    /// Periodic `side × side` spin lattice with uniform coupling.
    Lattice { side: usize, theta: f64 },
    /// Fully connected `{0,1}` Ising, couplings `U[-w, w]`, biases `U[-b, b]`.
    RandomIsing { n: usize, w_range: f64, b_range: f64 },
    /// Random spanning tree of binary variables.
    RandomTree { n: usize, w_range: f64, b_range: f64 },
    /// Independent variables with random unaries.
    Unary { n: usize, cardinality: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Exact,
    Pmp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    pub seed: u64,
    pub model: BoundModel,
    pub instances: usize,
    pub draws: usize,
    pub sweeps: usize,
    pub damping: f64,
    pub solver: Solver,
    pub budget_secs: Option<f64>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: BoundModel::Lattice { side: 5, theta: 0.1 },
            instances: 1,
            draws: 500,
            sweeps: 200,
            damping: 0.5,
            solver: Solver::Pmp,
            budget_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInstance {
    pub log_z: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub instances: Vec<BoundInstance>,
    pub mean_error: f64,
    pub truncated: bool,
}

enum Instance {
    Graph(FactorGraph),
    Ising(IsingModel),
}

fn build(model: &BoundModel, k: usize, seed: u64) -> Result<Instance> {
    let mut rng = stream_rng(seed, STREAM_MODEL, k as u64);
    Ok(match *model {
        BoundModel::Lattice { side, theta } => Instance::Graph(cyclic_lattice(side, theta)),
        BoundModel::RandomIsing { n, w_range, b_range } => {
            Instance::Ising(IsingModel::random(n, w_range, b_range, &mut rng))
        }
        BoundModel::RandomTree { n, w_range, b_range } => Instance::Graph(random_tree(n, w_range, b_range, &mut rng)),
        BoundModel::Unary { n, cardinality } => {
            let mut g = FactorGraph::new(vec![cardinality; n])?;
            for v in 0..n {
                let u: Vec<f64> = (0..cardinality).map(|_| rng.random_range(-1.0..1.0)).collect();
                g.set_unary(v, &u)?;
            }
            Instance::Graph(g)
        }
    })
}

fn estimate<M: EnergyModel>(m: &M, cfg: &BoundConfig, k: usize) -> Result<BoundInstance> {
    let log_z = exact_log_partition(m)?;
    let solver = match cfg.solver {
        Solver::Exact => MapSolver::Exact,
        Solver::Pmp => MapSolver::Pmp(sweep_config(cfg.damping, cfg.sweeps)?),
    };
    let mut rng = Streams::new(cfg.seed).child(STREAM_DRAWS).rng(k as u64, 0);
    let (estimate, std_err) = pmap_log_partition_bound(m, cfg.draws, solver, &mut rng)?;
    Ok(BoundInstance {
        log_z,
        estimate,
        std_err,
        error: estimate - log_z,
    })
}

pub fn run(cfg: &mut BoundConfig, out: &mut Output) -> Result<BoundReport> {
    let budget = Budget::new(cfg.budget_secs);
    let t0 = std::time::Instant::now();
    let mut instances = Vec::new();
    let mut truncated = false;
    for k in 0..cfg.instances {
        if budget.exhausted() {
            truncated = true;
            cfg.instances = k;
            cfg.budget_secs = None;
            break;
        }
        instances.push(match build(&cfg.model, k, cfg.seed)? {
            Instance::Graph(g) => estimate(&g, cfg, k)?,
            Instance::Ising(m) => estimate(&m, cfg, k)?,
        });
    }
    out.time("bound", t0.elapsed());
    out.csv(
        "bound.csv",
        &["instance", "log_z", "estimate", "std_err", "error"],
        instances.iter().enumerate().map(|(k, r)| {
            [k.to_string(), r.log_z.to_string(), r.estimate.to_string(), r.std_err.to_string(), r.error.to_string()]
        }),
    )?;
    let mean_error = instances.iter().map(|r| r.error).sum::<f64>() / instances.len().max(1) as f64;
    Ok(BoundReport {
        instances,
        mean_error,
        truncated,
    })
}
