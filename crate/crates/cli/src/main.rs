use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmp_cli::dataset::Dataset;
use pmp_cli::experiments::bound::{BoundConfig, BoundModel, Solver};
use pmp_cli::experiments::deconv::DeconvConfig;
use pmp_cli::experiments::ising::IsingConfig;
use pmp_cli::experiments::lp::{LpConfig, LpSource};
use pmp_cli::experiments::rbm::RbmConfig;
use pmp_cli::experiments::sample::SampleConfig;
use pmp_cli::experiments::toy::ToyConfig;
use pmp_cli::experiments::Method;
use pmp_cli::{exit_code, manifest, Experiment};
use pmp_core::{Error, Result};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "pmp", version, about = "Perturb-and-max-product sampling and learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    damping: Option<f64>,
    /// Output directory for results, timing and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full-size configuration instead of the desk-scale default.
    #[arg(long = "paper-scale")]
    full_scale: bool,
    /// Wall-clock cap; partial results are reported and recorded.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// JSON config for the subcommand; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Lattice,
    RandomIsing,
    RandomTree,
    Unary,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Contours,
    Stripes,
    Mnist,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the shared coupling of four spins from exact moments.
    Toy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        eval_samples: Option<usize>,
    },
    /// Perturb-and-MAP log-partition estimates against enumeration.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "lattice")]
        model: BoundKind,
        #[arg(long, default_value_t = 5)]
        side: usize,
        #[arg(long, default_value_t = 0.1)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        w_range: f64,
        #[arg(long, default_value_t = 0.1)]
        b_range: f64,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, value_enum)]
        solver: Option<Solver>,
    },
    /// Train a fully connected Ising model on binary images.
    Ising {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        dataset: Option<DatasetKind>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Train a binary RBM on binary images.
    Rbm {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        dataset: Option<DatasetKind>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Posterior sampling for binary blind deconvolution.
    Deconv {
        #[command(flatten)]
        common: Common,
        /// Directory with a saved truth (truth.json, w/s/x.pmps).
        #[arg(long)]
        truth_dir: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        features: Option<usize>,
    },
    /// Write the reduced LP relaxation of an Ising model or RBM.
    LpExport {
        #[command(flatten)]
        common: Common,
        /// JSON model file with `w`, `b` and optionally `c`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Random RBM `HIDDEN`x`VISIBLE` instead of a random Ising model.
        #[arg(long)]
        rbm: Option<String>,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long)]
        halved: bool,
    },
    /// Draw samples from a factor graph JSON file.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Observations as `var=state,var=state`.
        #[arg(long)]
        evidence: Option<String>,
    },
    /// Re-run a manifest and compare every output hash.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config<T: DeserializeOwned>(common: &Common, default: T) -> Result<T> {
    match &common.config {
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => Ok(default),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn dataset(kind: DatasetKind, rbm: bool) -> Dataset {
    match kind {
        DatasetKind::Contours => Dataset::Contours { count: 200, side: 10 },
        DatasetKind::Stripes => Dataset::Stripes {
            count: 2500,
            side: 8,
            density: 0.25,
            noise: if rbm { 0.02 } else { 0.0 },
        },
        DatasetKind::Mnist => Dataset::MnistZeros { dir: None },
    }
}

fn parse_evidence(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (v, x) = t.split_once('=').ok_or_else(|| Error::Parameter(format!("bad evidence {t:?}")))?;
            let p = |a: &str| a.trim().parse().map_err(|_| Error::Parameter(format!("bad evidence {t:?}")));
            Ok((p(v)?, p(x)?))
        })
        .collect()
}

fn build(cmd: Command) -> Result<(Experiment, Option<PathBuf>)> {
    Ok(match cmd {
        Command::Toy {
            common: c,
            theta,
            iterations,
            learning_rate,
            eval_samples,
        } => {
            let mut cfg = load_config(&c, ToyConfig::default())?;
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.sweeps, c.sweeps);
            set(&mut cfg.chains, c.chains);
            set(&mut cfg.method, c.method);
            set(&mut cfg.damping, c.damping);
            set(&mut cfg.theta_true, theta);
            set(&mut cfg.iterations, iterations);
            set(&mut cfg.learning_rate, learning_rate);
            set(&mut cfg.eval_samples, eval_samples);
            cfg.budget_secs = c.budget_secs.or(cfg.budget_secs);
            (Experiment::Toy(cfg), c.out)
        }
        Command::Bound {
            common: c,
            model,
            side,
            theta,
            n,
            w_range,
            b_range,
            instances,
            draws,
            solver,
        } => {
            let mut cfg = load_config(&c, BoundConfig::default())?;
            if c.config.is_none() {
                cfg.model = match model {
                    BoundKind::Lattice => BoundModel::Lattice { side, theta },
                    BoundKind::RandomIsing => BoundModel::RandomIsing { n, w_range, b_range },
                    BoundKind::RandomTree => BoundModel::RandomTree { n, w_range, b_range },
                    BoundKind::Unary => BoundModel::Unary { n, cardinality: 2 },
                };
                if c.full_scale {
                    cfg.instances = 100;
                }
            }
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.sweeps, c.sweeps);
            set(&mut cfg.damping, c.damping);
            set(&mut cfg.instances, instances);
            set(&mut cfg.draws, draws);
            set(&mut cfg.solver, solver);
            cfg.budget_secs = c.budget_secs.or(cfg.budget_secs);
            (Experiment::Bound(cfg), c.out)
        }
        Command::Ising {
            common: c,
            dataset: ds,
            iterations,
            learning_rate,
        } => {
            let base = if c.full_scale { IsingConfig::full_scale() } else { IsingConfig::default() };
            let mut cfg = load_config(&c, base)?;
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.sweeps, c.sweeps);
            set(&mut cfg.chains, c.chains);
            set(&mut cfg.method, c.method);
            set(&mut cfg.damping, c.damping);
            set(&mut cfg.dataset, ds.map(|d| dataset(d, false)));
            set(&mut cfg.iterations, iterations);
            set(&mut cfg.learning_rate, learning_rate);
            cfg.budget_secs = c.budget_secs.or(cfg.budget_secs);
            (Experiment::Ising(cfg), c.out)
        }
        Command::Rbm {
            common: c,
            dataset: ds,
            hidden,
            iterations,
            learning_rate,
        } => {
            let base = if c.full_scale { RbmConfig::full_scale() } else { RbmConfig::default() };
            let mut cfg = load_config(&c, base)?;
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.sweeps, c.sweeps);
            set(&mut cfg.chains, c.chains);
            set(&mut cfg.method, c.method);
            set(&mut cfg.damping, c.damping);
            set(&mut cfg.dataset, ds.map(|d| dataset(d, true)));
            set(&mut cfg.n_hidden, hidden);
            set(&mut cfg.iterations, iterations);
            set(&mut cfg.learning_rate, learning_rate);
            cfg.budget_secs = c.budget_secs.or(cfg.budget_secs);
            (Experiment::Rbm(cfg), c.out)
        }
        Command::Deconv {
            common: c,
            truth_dir,
            samples,
            features,
        } => {
            let base = if c.full_scale { DeconvConfig::full_scale() } else { DeconvConfig::default() };
            let mut cfg = load_config(&c, base)?;
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.sweeps, c.sweeps);
            set(&mut cfg.damping, c.damping);
            set(&mut cfg.samples, samples);
            set(&mut cfg.features, features);
            if truth_dir.is_some() {
                cfg.truth_dir = truth_dir;
            }
            cfg.budget_secs = c.budget_secs.or(cfg.budget_secs);
            (Experiment::Deconv(cfg), c.out)
        }
        Command::LpExport {
            common: c,
            model,
            rbm,
            n,
            halved,
        } => {
            let mut cfg = load_config(&c, LpConfig::default())?;
            set(&mut cfg.seed, c.seed);
            if model.is_some() {
                cfg.model = model;
            }
            if c.config.is_none() {
                cfg.source = LpSource::Ising {
                    n,
                    w_range: 1.0,
                    b_range: 1.0,
                };
                cfg.halved = halved;
            }
            if let Some(spec) = rbm {
                let bad = || Error::Parameter(format!("--rbm expects HIDDENxVISIBLE, got {spec:?}"));
                let (h, v) = spec.split_once('x').ok_or_else(bad)?;
                cfg.source = LpSource::Rbm {
                    n_hidden: h.parse().map_err(|_| bad())?,
                    n_visible: v.parse().map_err(|_| bad())?,
                };
            }
            (Experiment::LpExport(cfg), c.out)
        }
        Command::Sample {
            common: c,
            model,
            evidence,
        } => {
            let mut cfg = load_config(&c, SampleConfig::default())?;
            cfg.model = model;
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.sweeps, c.sweeps);
            set(&mut cfg.chains, c.chains);
            set(&mut cfg.method, c.method);
            set(&mut cfg.damping, c.damping);
            if let Some(e) = evidence {
                cfg.evidence = parse_evidence(&e)?;
            }
            (Experiment::Sample(cfg), c.out)
        }
        Command::Replay { .. } => unreachable!("handled before build"),
    })
}

fn main_inner(cli: Cli) -> Result<()> {
    if let Command::Replay { manifest: path, out } = cli.command {
        let m = manifest::load(&path)?;
        let r = manifest::replay(&m, out.as_deref())?;
        println!("{}", serde_json::to_string_pretty(&r)?);
        if !r.is_exact() {
            return Err(Error::Validation {
                constraint: "output hashes".into(),
                message: format!("{} outputs differ: {}", r.mismatched.len(), r.mismatched.join(", ")),
            });
        }
        return Ok(());
    }
    let (exp, out) = build(cli.command)?;
    let (_, _, report) = manifest::run_recorded(exp, out.as_deref())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
