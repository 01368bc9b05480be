//! Parameterized model families used by learning and the experiments.
//!
//! [`EnergyModel`] is what the learner needs: a flat parameter vector, the
//! matching sufficient statistics and a prepared [`Sampler`]. It is
//! implemented by the generic [`FactorGraph`] and by two dense binary
//! families with matrix-form message passing:
//!
//! * [`IsingModel`]: `E(x) = -½ xᵀ W x - bᵀ x`, `x ∈ {0,1}ⁿ`; parameters
//!   `[b, W_ij for i < j]` (row-major upper triangle).
//! * [`RbmModel`]: `E(v, h) = -hᵀ W v - bᵀ h - cᵀ v`; variables are the
//!   visible units followed by the hidden units; parameters
//!   `[W (row-major, hidden × visible), b, c]`.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Evidence, FactorGraph, FactorKind, CLAMP_SCORE};
use crate::max_product::ising::{check_coupling, ising_map};
use crate::max_product::rbm::rbm_map;
use crate::max_product::SweepConfig;
use crate::rng::ChainRng;
use crate::samplers::{bernoulli_logit, block_gibbs_into, GraphSampler, Sampler};

/// A model whose parameters can be learned by moment matching.
pub trait EnergyModel: Clone + Send + Sync {
    type Sampler: Sampler;

    fn cardinalities(&self) -> Vec<usize>;

    fn num_vars(&self) -> usize {
        self.cardinalities().len()
    }

    fn num_params(&self) -> usize;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, theta: &[f64]) -> Result<()>;

    /// Entries of the parameter vector that are pairwise couplings.
    fn pairwise_mask(&self) -> Vec<bool>;

    /// Adds `Φ(x)` into `out`.
    fn add_stats(&self, x: &[usize], out: &mut [f64]);

    /// `Θᵀ Φ(x)` plus hard-constraint scores.
    fn log_score(&self, x: &[usize]) -> f64;

    fn sampler(&self) -> Result<Self::Sampler>;

    /// Equivalent factor graph (used by the enumeration oracles).
    fn to_factor_graph(&self) -> FactorGraph;
}

impl EnergyModel for FactorGraph {
    type Sampler = GraphSampler;

    fn cardinalities(&self) -> Vec<usize> {
        FactorGraph::cardinalities(self).to_vec()
    }

    fn num_params(&self) -> usize {
        FactorGraph::num_params(self)
    }

    fn params(&self) -> Vec<f64> {
        FactorGraph::params(self)
    }

    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        FactorGraph::set_params(self, theta)
    }

    fn pairwise_mask(&self) -> Vec<bool> {
        FactorGraph::pairwise_mask(self)
    }

    fn add_stats(&self, x: &[usize], out: &mut [f64]) {
        FactorGraph::add_stats(self, x, out)
    }

    fn log_score(&self, x: &[usize]) -> f64 {
        FactorGraph::log_score(self, x)
    }

    fn sampler(&self) -> Result<GraphSampler> {
        GraphSampler::new(self)
    }

    fn to_factor_graph(&self) -> FactorGraph {
        self.clone()
    }
}

/// Effective log-odds bias of a binary unit: bias plus perturbation
/// difference, or `±|CLAMP_SCORE|` when observed.
fn effective_bias(bias: f64, eps: &[f64], clamp: Option<usize>) -> f64 {
    match clamp {
        Some(1) => -CLAMP_SCORE,
        Some(_) => CLAMP_SCORE,
        None => bias + eps[1] - eps[0],
    }
}

/// Fully connected binary pairwise model over `{0,1}ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub w: Array2<f64>,
    pub b: Vec<f64>,
}

impl IsingModel {
    pub fn new(w: Array2<f64>, b: Vec<f64>) -> Result<Self> {
        check_coupling(&w)?;
        if w.nrows() != b.len() {
            return Err(Error::structural("bias length differs from coupling size"));
        }
        Ok(Self { w, b })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            w: Array2::zeros((n, n)),
            b: vec![0.0; n],
        }
    }

    /// Couplings `U[-w_range, w_range]`, biases `U[-b_range, b_range]`.
    pub fn random(n: usize, w_range: f64, b_range: f64, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..i {
                let v = if w_range > 0.0 { rng.random_range(-w_range..w_range) } else { 0.0 };
                m.w[[i, j]] = v;
                m.w[[j, i]] = v;
            }
        }
        for bi in m.b.iter_mut() {
            *bi = if b_range > 0.0 { rng.random_range(-b_range..b_range) } else { 0.0 };
        }
        m
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }

    pub fn energy(&self, x: &[usize]) -> f64 {
        -self.log_score_inner(x)
    }

    fn log_score_inner(&self, x: &[usize]) -> f64 {
        let n = self.size();
        let mut s = 0.0;
        for i in 0..n {
            if x[i] == 1 {
                s += self.b[i];
                for j in i + 1..n {
                    if x[j] == 1 {
                        s += self.w[[i, j]];
                    }
                }
            }
        }
        s
    }
}

/// Prepared sampler for [`IsingModel`].
#[derive(Debug, Clone)]
pub struct IsingSampler {
    model: IsingModel,
    cards: Vec<usize>,
}

impl Sampler for IsingSampler {
    fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    fn perturbed_map(&self, eps: &[f64], evidence: &Evidence, cfg: &SweepConfig) -> Assignment {
        let n = self.model.size();
        let clamped = evidence.to_dense(n);
        let b: Vec<f64> = (0..n)
            .map(|i| effective_bias(self.model.b[i], &eps[2 * i..2 * i + 2], clamped[i]))
            .collect();
        let mut x = ising_map(&self.model.w, &b, cfg);
        for (v, s) in evidence.iter() {
            x[v] = s;
        }
        Assignment(x)
    }

    fn gibbs_sweep(&self, x: &mut [usize], evidence: &Evidence, rng: &mut ChainRng) {
        let clamped = evidence.to_dense(x.len());
        for i in 0..x.len() {
            if clamped[i].is_some() {
                continue;
            }
            let row = self.model.w.row(i);
            let logit = self.model.b[i]
                + row.iter().zip(x.iter()).filter(|(_, &xj)| xj == 1).map(|(w, _)| w).sum::<f64>();
            x[i] = bernoulli_logit(logit, rng);
        }
    }
}

impl EnergyModel for IsingModel {
    type Sampler = IsingSampler;

    fn cardinalities(&self) -> Vec<usize> {
        vec![2; self.size()]
    }

    fn num_params(&self) -> usize {
        let n = self.size();
        n + n * (n.saturating_sub(1)) / 2
    }

    fn params(&self) -> Vec<f64> {
        let n = self.size();
        let mut p = self.b.clone();
        for i in 0..n {
            for j in i + 1..n {
                p.push(self.w[[i, j]]);
            }
        }
        p
    }

    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::structural("Ising parameter vector has the wrong length"));
        }
        let n = self.size();
        self.b.copy_from_slice(&theta[..n]);
        let mut k = n;
        for i in 0..n {
            for j in i + 1..n {
                self.w[[i, j]] = theta[k];
                self.w[[j, i]] = theta[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn pairwise_mask(&self) -> Vec<bool> {
        let n = self.size();
        let mut m = vec![false; n];
        m.resize(self.num_params(), true);
        m
    }

    fn add_stats(&self, x: &[usize], out: &mut [f64]) {
        let n = self.size();
        let mut k = n;
        for i in 0..n {
            out[i] += x[i] as f64;
            for j in i + 1..n {
                out[k] += (x[i] * x[j]) as f64;
                k += 1;
            }
        }
    }

    fn log_score(&self, x: &[usize]) -> f64 {
        self.log_score_inner(x)
    }

    fn sampler(&self) -> Result<IsingSampler> {
        Ok(IsingSampler {
            model: self.clone(),
            cards: vec![2; self.size()],
        })
    }

    fn to_factor_graph(&self) -> FactorGraph {
        let n = self.size();
        let mut g = FactorGraph::binary(n);
        for i in 0..n {
            g.set_unary(i, &[0.0, self.b[i]]).expect("binary unary");
        }
        for i in 0..n {
            for j in i + 1..n {
                g.add_factor(vec![i, j], FactorKind::DenseTable { table: vec![0.0, 0.0, 0.0, self.w[[i, j]]] })
                    .expect("valid pair");
            }
        }
        g
    }
}

/// Binary restricted Boltzmann machine.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    /// `n_hidden × n_visible`.
    pub w: Array2<f64>,
    /// Hidden biases.
    pub b: Vec<f64>,
    /// Visible biases.
    pub c: Vec<f64>,
}

impl RbmModel {
    pub fn new(w: Array2<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let (m, n) = w.dim();
        if b.len() != m || c.len() != n {
            return Err(Error::structural(format!(
                "RBM weights are {m}×{n} but biases have lengths {} and {}",
                b.len(),
                c.len()
            )));
        }
        Ok(Self { w, b, c })
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            w: Array2::zeros((n_hidden, n_visible)),
            b: vec![0.0; n_hidden],
            c: vec![0.0; n_visible],
        }
    }

    pub fn n_visible(&self) -> usize {
        self.c.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.b.len()
    }

    /// Indices of the visible variables (`0..n_visible`).
    pub fn visible_vars(&self) -> Vec<usize> {
        (0..self.n_visible()).collect()
    }
}

/// Prepared sampler for [`RbmModel`].
#[derive(Debug, Clone)]
pub struct RbmSampler {
    model: RbmModel,
    cards: Vec<usize>,
}

impl Sampler for RbmSampler {
    fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    fn perturbed_map(&self, eps: &[f64], evidence: &Evidence, cfg: &SweepConfig) -> Assignment {
        let (n, m) = (self.model.n_visible(), self.model.n_hidden());
        let clamped = evidence.to_dense(n + m);
        let c: Vec<f64> = (0..n)
            .map(|j| effective_bias(self.model.c[j], &eps[2 * j..2 * j + 2], clamped[j]))
            .collect();
        let b: Vec<f64> = (0..m)
            .map(|i| {
                let k = n + i;
                effective_bias(self.model.b[i], &eps[2 * k..2 * k + 2], clamped[k])
            })
            .collect();
        let (v, h) = rbm_map(&self.model.w, &b, &c, cfg);
        let mut x = v;
        x.extend(h);
        for (var, s) in evidence.iter() {
            x[var] = s;
        }
        Assignment(x)
    }

    /// Block sweep: hidden given visible, then visible given hidden.
    fn gibbs_sweep(&self, x: &mut [usize], evidence: &Evidence, rng: &mut ChainRng) {
        let n = self.model.n_visible();
        let clamped = evidence.to_dense(x.len());
        let (v, h) = x.split_at_mut(n);
        block_gibbs_into(&self.model.w, &self.model.b, &self.model.c, v, h, Some(&clamped), rng);
    }
}

impl EnergyModel for RbmModel {
    type Sampler = RbmSampler;

    fn cardinalities(&self) -> Vec<usize> {
        vec![2; self.n_visible() + self.n_hidden()]
    }

    fn num_params(&self) -> usize {
        self.w.len() + self.b.len() + self.c.len()
    }

    fn params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.w.iter().copied().collect();
        p.extend_from_slice(&self.b);
        p.extend_from_slice(&self.c);
        p
    }

    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::structural("RBM parameter vector has the wrong length"));
        }
        let nw = self.w.len();
        let m = self.b.len();
        self.w.iter_mut().zip(&theta[..nw]).for_each(|(w, t)| *w = *t);
        self.b.copy_from_slice(&theta[nw..nw + m]);
        self.c.copy_from_slice(&theta[nw + m..]);
        Ok(())
    }

    fn pairwise_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.w.len()];
        m.resize(self.num_params(), false);
        m
    }

    fn add_stats(&self, x: &[usize], out: &mut [f64]) {
        let (n, m) = (self.n_visible(), self.n_hidden());
        let (v, h) = x.split_at(n);
        for i in 0..m {
            if h[i] == 1 {
                for j in 0..n {
                    if v[j] == 1 {
                        out[i * n + j] += 1.0;
                    }
                }
                out[m * n + i] += 1.0;
            }
        }
        for j in 0..n {
            out[m * n + m + j] += v[j] as f64;
        }
    }

    fn log_score(&self, x: &[usize]) -> f64 {
        let (n, m) = (self.n_visible(), self.n_hidden());
        let (v, h) = x.split_at(n);
        let mut s: f64 = (0..n).filter(|&j| v[j] == 1).map(|j| self.c[j]).sum();
        for i in 0..m {
            if h[i] == 1 {
                s += self.b[i];
                for j in 0..n {
                    if v[j] == 1 {
                        s += self.w[[i, j]];
                    }
                }
            }
        }
        s
    }

    fn sampler(&self) -> Result<RbmSampler> {
        Ok(RbmSampler {
            model: self.clone(),
            cards: vec![2; self.n_visible() + self.n_hidden()],
        })
    }

    fn to_factor_graph(&self) -> FactorGraph {
        let (n, m) = (self.n_visible(), self.n_hidden());
        let mut g = FactorGraph::binary(n + m);
        for j in 0..n {
            g.set_unary(j, &[0.0, self.c[j]]).expect("binary unary");
        }
        for i in 0..m {
            g.set_unary(n + i, &[0.0, self.b[i]]).expect("binary unary");
        }
        g.add_factor(
            (0..n + m).collect(),
            FactorKind::RbmBlock {
                n_visible: n,
                n_hidden: m,
                weights: self.w.iter().copied().collect(),
            },
        )
        .expect("valid RBM block");
        g
    }
}

/// Four ±1 spins, fully connected, every edge weight `theta`, no fields.
pub fn toy_model(theta: f64) -> FactorGraph {
    let mut g = FactorGraph::binary(4);
    for i in 0..4 {
        for j in i + 1..4 {
            g.add_factor(vec![i, j], FactorKind::IsingEdge { weight: theta })
                .expect("binary pair");
        }
    }
    g
}

/// `side × side` periodic lattice of ±1 spins with uniform coupling.
pub fn cyclic_lattice(side: usize, theta: f64) -> FactorGraph {
    let mut g = FactorGraph::binary(side * side);
    let id = |r: usize, c: usize| (r % side) * side + (c % side);
    let mut seen = std::collections::HashSet::new();
    for r in 0..side {
        for c in 0..side {
            for (a, b) in [(id(r, c), id(r, c + 1)), (id(r, c), id(r + 1, c))] {
                let key = (a.min(b), a.max(b));
                if a != b && seen.insert(key) {
                    g.add_factor(vec![key.0, key.1], FactorKind::IsingEdge { weight: theta })
                        .expect("binary pair");
                }
            }
        }
    }
    g
}

/// Random tree of `n` binary variables: each node after the first attaches
/// to a uniformly chosen earlier node. Spin couplings and log-odds fields
/// are uniform in `[-w_range, w_range]` and `[-b_range, b_range]`.
pub fn random_tree(n: usize, w_range: f64, b_range: f64, rng: &mut impl Rng) -> FactorGraph {
    let mut g = FactorGraph::binary(n);
    for i in 1..n {
        let parent = rng.random_range(0..i);
        g.add_factor(
            vec![parent, i],
            FactorKind::IsingEdge {
                weight: rng.random_range(-w_range..=w_range),
            },
        )
        .expect("binary pair");
    }
    for i in 0..n {
        g.set_unary(i, &[0.0, rng.random_range(-b_range..=b_range)])
            .expect("binary unary");
    }
    g
}
