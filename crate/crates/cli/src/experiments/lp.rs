//! Reduced LP relaxations written in LP format.

use std::path::PathBuf;

use ndarray::Array2;
use pmp_core::lp_export::{reduced_lp_ising, reduced_lp_ising_halved, reduced_lp_rbm, serialize_lp};
use pmp_core::models::IsingModel;
use pmp_core::rng::stream_rng;
use pmp_core::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::output::Output;

/// Model file: `w` (square for Ising, hidden × visible for an RBM), `b`,
/// and `c` (visible biases, RBM only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
}

impl ModelFile {
    pub fn matrix(&self) -> Result<Array2<f64>> {
        let rows = self.w.len();
        let cols = self.w.first().map_or(0, Vec::len);
        if self.w.iter().any(|r| r.len() != cols) {
            return Err(Error::Structural("ragged weight matrix".into()));
        }
        Array2::from_shape_vec((rows, cols), self.w.concat()).map_err(|e| Error::Structural(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LpSource {
    /// Random Ising with couplings `U[-w, w]` and biases `U[-b, b]`.
    Ising { n: usize, w_range: f64, b_range: f64 },
    /// Random RBM with all parameters `U[-1, 1]`.
    Rbm { n_hidden: usize, n_visible: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpConfig {
    pub seed: u64,
    /// Read the model from a JSON file instead of generating one.
    pub model: Option<PathBuf>,
    pub source: LpSource,
    /// Unordered pairs with doubled coupling coefficients (Ising only).
    pub halved: bool,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: None,
            source: LpSource::Ising {
                n: 6,
                w_range: 1.0,
                b_range: 1.0,
            },
            halved: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub variables: usize,
    pub constraints: usize,
}

pub fn run(cfg: &mut LpConfig, out: &mut Output) -> Result<LpReport> {
    let file = match &cfg.model {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => {
            let mut rng = stream_rng(cfg.seed, 1, 0);
            match cfg.source {
                LpSource::Ising { n, w_range, b_range } => {
                    let m = IsingModel::random(n, w_range, b_range, &mut rng);
                    ModelFile {
                        w: m.w.rows().into_iter().map(|r| r.to_vec()).collect(),
                        b: m.b,
                        c: None,
                    }
                }
                LpSource::Rbm { n_hidden, n_visible } => {
                    let mut u = |k: usize| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
                    ModelFile {
                        w: (0..n_hidden).map(|_| u(n_visible)).collect(),
                        b: u(n_hidden),
                        c: Some(u(n_visible)),
                    }
                }
            }
        }
    };
    let w = file.matrix()?;
    let lp = match (&file.c, cfg.halved) {
        (Some(c), _) => reduced_lp_rbm(&w, &file.b, c)?,
        (None, false) => reduced_lp_ising(&w, &file.b)?,
        (None, true) => reduced_lp_ising_halved(&w, &file.b)?,
    };
    out.bytes("model.lp", serialize_lp(&lp)?.into_bytes());
    out.json("model.json", &file)?;
    Ok(LpReport {
        variables: lp.num_vars(),
        constraints: lp.num_rows(),
    })
}
