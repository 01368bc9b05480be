//! Sample-quality metrics and exact enumeration oracles.

pub mod stats;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, AssignmentIter};
use crate::max_product::SweepConfig;
use crate::models::EnergyModel;
use crate::perturbation::fill_gumbel;
use crate::rng::ChainRng;
use crate::samplers::Sampler;

/// Largest joint state space the enumeration oracles accept.
pub const ENUMERATION_BUDGET: u128 = 1 << 24;

/// Largest joint state space [`exact_log_partition`] accepts; it streams
/// and needs no per-state storage.
pub const PARTITION_BUDGET: u128 = 1 << 28;

/// A set of samples stored row-major, one row per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    rows: usize,
    cols: usize,
    values: Vec<u16>,
    pub label: String,
}

impl SampleSet {
    pub fn new(rows: usize, cols: usize, values: Vec<u16>, label: impl Into<String>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::structural(format!(
                "{} values for a {rows}×{cols} sample set",
                values.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            label: label.into(),
        })
    }

    pub fn from_assignments(xs: &[Assignment], label: impl Into<String>) -> Result<Self> {
        let cols = xs.first().map_or(0, |x| x.len());
        let mut values = Vec::with_capacity(xs.len() * cols);
        for x in xs {
            if x.len() != cols {
                return Err(Error::structural("samples of different lengths"));
            }
            for &s in x.iter() {
                values.push(u16::try_from(s).map_err(|_| Error::structural("state index exceeds u16"))?);
            }
        }
        Self::new(xs.len(), cols, values, label)
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> SampleSet {
        let mut values = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            values.extend(cols.iter().map(|&c| row[c]));
        }
        SampleSet {
            rows: self.rows,
            cols: cols.len(),
            values,
            label: self.label.clone(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[u16] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_assignments(&self) -> Vec<Assignment> {
        (0..self.rows)
            .map(|r| Assignment(self.row(r).iter().map(|&v| v as usize).collect()))
            .collect()
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v < 2)
    }

    /// Column means.
    pub fn means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (acc, &v) in m.iter_mut().zip(self.row(r)) {
                *acc += v as f64;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.rows as f64);
        m
    }
}

/// `exp(-(1/D) Σ_d [x_d ≠ x'_d])`.
pub fn hamming_kernel(x: &[u16], y: &[u16]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::structural(format!(
            "kernel arguments of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    let d = x.iter().zip(y).filter(|(a, b)| a != b).count();
    Ok((-(d as f64) / x.len() as f64).exp())
}

enum Packed {
    Bits { words: usize, data: Vec<u64> },
    Raw,
}

fn pack(s: &SampleSet, binary: bool) -> Packed {
    if !binary {
        return Packed::Raw;
    }
    let words = s.cols.div_ceil(64);
    let mut data = vec![0u64; words * s.rows];
    for r in 0..s.rows {
        for (c, &v) in s.row(r).iter().enumerate() {
            if v == 1 {
                data[r * words + c / 64] |= 1 << (c % 64);
            }
        }
    }
    Packed::Bits { words, data }
}

/// Histogram of Hamming distances over all ordered pairs `(x, y)`.
fn distance_histogram(a: &SampleSet, pa: &Packed, b: &SampleSet, pb: &Packed) -> Vec<u64> {
    let dim = a.cols;
    (0..a.rows)
        .into_par_iter()
        .fold(
            || vec![0u64; dim + 1],
            |mut hist, i| {
                match (pa, pb) {
                    (Packed::Bits { words, data: da }, Packed::Bits { data: db, .. }) => {
                        let xi = &da[i * words..(i + 1) * words];
                        for j in 0..b.rows {
                            let yj = &db[j * words..(j + 1) * words];
                            let d: u32 = xi.iter().zip(yj).map(|(p, q)| (p ^ q).count_ones()).sum();
                            hist[d as usize] += 1;
                        }
                    }
                    _ => {
                        let xi = a.row(i);
                        for j in 0..b.rows {
                            let d = xi.iter().zip(b.row(j)).filter(|(p, q)| p != q).count();
                            hist[d] += 1;
                        }
                    }
                }
                hist
            },
        )
        .reduce(
            || vec![0u64; dim + 1],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                x
            },
        )
}

fn mean_kernel(a: &SampleSet, pa: &Packed, b: &SampleSet, pb: &Packed) -> f64 {
    let hist = distance_histogram(a, pa, b, pb);
    let dim = a.cols as f64;
    let total: f64 = hist
        .iter()
        .enumerate()
        .map(|(d, &c)| c as f64 * (-(d as f64) / dim).exp())
        .sum();
    total / (a.rows as f64 * b.rows as f64)
}

/// Biased (V-statistic) squared MMD with the Hamming kernel.
///
/// Distances are accumulated as exact integer histograms, so the result
/// does not depend on thread scheduling.
pub fn mmd2(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    if x.rows == 0 || y.rows == 0 {
        return Err(Error::structural("MMD needs non-empty sample sets"));
    }
    if x.cols != y.cols || x.cols == 0 {
        return Err(Error::structural(format!(
            "MMD between dimensions {} and {}",
            x.cols, y.cols
        )));
    }
    let binary = x.is_binary() && y.is_binary();
    let (px, py) = (pack(x, binary), pack(y, binary));
    let kxx = mean_kernel(x, &px, x, &px);
    let kyy = mean_kernel(y, &py, y, &py);
    let kxy = mean_kernel(x, &px, y, &py);
    Ok(kxx + kyy - 2.0 * kxy)
}

fn check_enumerable(cards: &[usize]) -> Result<u128> {
    let states = cards
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
        .unwrap_or(u128::MAX);
    if states > ENUMERATION_BUDGET {
        return Err(Error::Capacity {
            what: "exact enumeration".into(),
            required: states,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(states)
}

/// `Θᵀ Φ(x)` of every joint state, in row-major state order.
pub fn enumerate_log_scores<M: EnergyModel>(model: &M) -> Result<Vec<f64>> {
    let cards = model.cardinalities();
    check_enumerable(&cards)?;
    Ok(AssignmentIter::new(&cards).map(|x| model.log_score(&x)).collect())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Σ_x exp(Θᵀ Φ(x))` by streaming enumeration in fixed-size blocks,
/// combined in a fixed order so the result is independent of threading.
pub fn exact_log_partition<M: EnergyModel>(model: &M) -> Result<f64> {
    const BLOCK: usize = 1 << 14;
    let cards = model.cardinalities();
    let states = cards.iter().try_fold(1u128, |a, &c| a.checked_mul(c as u128)).unwrap_or(u128::MAX);
    if states > PARTITION_BUDGET {
        return Err(Error::Capacity {
            what: "partition function enumeration".into(),
            required: states,
            budget: PARTITION_BUDGET,
        });
    }
    let states = states as usize;
    let blocks: Vec<(f64, f64)> = (0..states.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut x = vec![0usize; cards.len()];
            let mut scores = Vec::with_capacity(BLOCK);
            for idx in b * BLOCK..((b + 1) * BLOCK).min(states) {
                let mut r = idx;
                for i in (0..cards.len()).rev() {
                    x[i] = r % cards[i];
                    r /= cards[i];
                }
                scores.push(model.log_score(&x));
            }
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (m, scores.iter().map(|s| (s - m).exp()).sum())
        })
        .collect();
    let m = blocks.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(m);
    }
    Ok(m + blocks.iter().map(|&(bm, s)| s * (bm - m).exp()).sum::<f64>().ln())
}

/// Gibbs distribution over all joint states, in row-major state order.
pub fn exact_distribution<M: EnergyModel>(model: &M) -> Result<Vec<f64>> {
    let scores = enumerate_log_scores(model)?;
    let lz = log_sum_exp(&scores);
    Ok(scores.iter().map(|s| (s - lz).exp()).collect())
}

/// Per-variable marginals of the Gibbs distribution.
pub fn exact_marginals<M: EnergyModel>(model: &M) -> Result<Vec<Vec<f64>>> {
    let cards = model.cardinalities();
    let p = exact_distribution(model)?;
    let mut out: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    for (x, px) in AssignmentIter::new(&cards).zip(&p) {
        for (i, &s) in x.iter().enumerate() {
            out[i][s] += px;
        }
    }
    Ok(out)
}

/// Expected sufficient statistics under the Gibbs distribution.
pub fn exact_moments<M: EnergyModel>(model: &M) -> Result<Vec<f64>> {
    let cards = model.cardinalities();
    let p = exact_distribution(model)?;
    let mut acc = vec![0.0; model.num_params()];
    let mut phi = vec![0.0; model.num_params()];
    for (x, px) in AssignmentIter::new(&cards).zip(&p) {
        phi.iter_mut().for_each(|v| *v = 0.0);
        model.add_stats(&x, &mut phi);
        for (a, f) in acc.iter_mut().zip(&phi) {
            *a += px * f;
        }
    }
    Ok(acc)
}

/// Row-major index of a joint state (first variable most significant).
pub fn state_index(x: &[usize], cards: &[usize]) -> usize {
    x.iter().zip(cards).fold(0, |acc, (&s, &c)| acc * c + s)
}

/// Empirical distribution over all joint states with `pseudo_count` added
/// to every state before normalizing.
pub fn empirical_distribution(samples: &[Assignment], cards: &[usize], pseudo_count: f64) -> Result<Vec<f64>> {
    let states = check_enumerable(cards)? as usize;
    let mut counts = vec![pseudo_count; states];
    for x in samples {
        counts[state_index(x, cards)] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    Ok(counts.iter().map(|c| c / total).collect())
}

/// `KL(p ‖ q) = Σ p log(p / q)`; `+∞` when `q` vanishes where `p` does not.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::structural("KL between distributions of different support"));
    }
    let mut kl = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += a * (a / b).ln();
        }
    }
    Ok(kl)
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// How the perturbed maximization is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSolver {
    /// Enumerate every joint state.
    Exact,
    /// Max-product decode with the given sweep configuration.
    Pmp(SweepConfig),
}

/// Perturb-and-MAP estimate of `log Z`: the mean over `draws` Gumbel
/// vectors of `max_x [Θᵀ Φ(x) + Σ_i ε_i(x_i)]`, with its standard error.
///
/// With an exact solver the expectation upper-bounds `log Z`; with PMP the
/// objective is evaluated at the decoded assignment.
pub fn pmap_log_partition_bound<M: EnergyModel>(
    model: &M,
    draws: usize,
    solver: MapSolver,
    rng: &mut ChainRng,
) -> Result<(f64, f64)> {
    if draws == 0 {
        return Err(Error::parameter("at least one perturbation draw is needed"));
    }
    let cards = model.cardinalities();
    let mut offs = vec![0usize; cards.len()];
    for i in 1..cards.len() {
        offs[i] = offs[i - 1] + cards[i - 1];
    }
    let len: usize = cards.iter().sum();
    let perturbed = |x: &[usize], eps: &[f64]| -> f64 {
        x.iter().enumerate().map(|(i, &s)| eps[offs[i] + s]).sum()
    };
    let mut values = Vec::with_capacity(draws);
    match solver {
        MapSolver::Exact => {
            let scores = enumerate_log_scores(model)?;
            let states: Vec<Vec<usize>> = AssignmentIter::new(&cards).collect();
            for _ in 0..draws {
                let eps = fill_gumbel(len, rng);
                let best = states
                    .iter()
                    .zip(&scores)
                    .map(|(x, s)| s + perturbed(x, &eps))
                    .fold(f64::NEG_INFINITY, f64::max);
                values.push(best);
            }
        }
        MapSolver::Pmp(cfg) => {
            cfg.validate()?;
            let sampler = model.sampler()?;
            for _ in 0..draws {
                let eps = fill_gumbel(len, rng);
                let x = sampler.perturbed_map(&eps, &crate::factor_graph::Evidence::none(), &cfg);
                values.push(model.log_score(&x) + perturbed(&x, &eps));
            }
        }
    }
    Ok(stats::mean_std_err(&values))
}

/// Root-mean-square difference over every matrix entry.
pub fn rmse_params(truth: &Array2<f64>, estimate: &Array2<f64>) -> Result<f64> {
    if truth.dim() != estimate.dim() {
        return Err(Error::structural(format!(
            "RMSE between shapes {:?} and {:?}",
            truth.dim(),
            estimate.dim()
        )));
    }
    let n = truth.len() as f64;
    let ss: f64 = truth.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / n).sqrt())
}
