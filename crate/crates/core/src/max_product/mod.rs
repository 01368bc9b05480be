//! Damped parallel max-product message passing.
//!
//! [`Engine`] compiles a [`FactorGraph`] into elementary kernels and runs
//! Jacobi sweeps: variable→factor messages are computed from the previous
//! factor→variable messages, then every factor→variable message is
//! recomputed from the fresh variable→factor messages, blended with its old
//! value by the damping factor and shifted so its maximum is zero.
//!
//! Specialized matrix forms for fully connected binary pairwise models and
//! RBMs live in [`ising`] and [`rbm`].

pub mod ising;
pub mod kernels;
pub mod rbm;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, FactorGraph, FactorKind};

pub use ising::{ising_sweep_matrix, IsingMessageMatrix};
pub use kernels::{and_factor_messages, dense_factor_messages, or_factor_messages, pair_update};
pub use rbm::{rbm_sweep, RbmMessages};

/// Largest number of joint states a dense factor may enumerate.
pub const DENSE_STATE_BUDGET: usize = 1 << 20;

/// Number of elementary factors above which sweeps fan out over threads.
const PARALLEL_THRESHOLD: usize = 2048;

/// Damping and sweep count of one max-product run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub damping: f64,
    pub sweeps: usize,
}

impl SweepConfig {
    pub fn new(damping: f64, sweeps: usize) -> Result<Self> {
        let cfg = Self { damping, sweeps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::parameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            sweeps: 100,
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Dense { table: Vec<f64>, cards: Vec<usize> },
    Pair([f64; 4]),
    Or,
    And,
}

/// Log-space messages on every (factor, neighbour) edge.
///
/// Both buffers are laid out factor-major: the edges of one elementary
/// factor are contiguous, each edge holding one entry per state of its
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub var_to_factor: Vec<f64>,
    pub factor_to_var: Vec<f64>,
    pub iteration: usize,
}

/// A factor graph compiled for message passing.
///
/// Structured factors are expanded: an `RbmBlock` becomes one pairwise
/// kernel per (hidden, visible) pair.
#[derive(Debug, Clone)]
pub struct Engine {
    cards: Vec<usize>,
    unary_offsets: Vec<usize>,
    kernels: Vec<Kernel>,
    factor_edges: Vec<usize>,
    edge_var: Vec<usize>,
    edge_off: Vec<usize>,
    var_edges_start: Vec<usize>,
    var_edges: Vec<usize>,
}

impl Engine {
    pub fn new(graph: &FactorGraph) -> Result<Self> {
        let cards = graph.cardinalities().to_vec();
        let mut kernels = Vec::new();
        let mut neighbors: Vec<Vec<usize>> = Vec::new();
        for (a, f) in graph.factors().iter().enumerate() {
            match &f.kind {
                FactorKind::DenseTable { table } => {
                    let fc: Vec<usize> = f.neighbors.iter().map(|&v| cards[v]).collect();
                    let states: u128 = fc.iter().map(|&c| c as u128).product();
                    if states > DENSE_STATE_BUDGET as u128 {
                        return Err(Error::Capacity {
                            what: format!("dense factor {a}"),
                            required: states,
                            budget: DENSE_STATE_BUDGET as u128,
                        });
                    }
                    if fc == [2, 2] {
                        kernels.push(Kernel::Pair([table[0], table[1], table[2], table[3]]));
                    } else {
                        kernels.push(Kernel::Dense {
                            table: table.clone(),
                            cards: fc,
                        });
                    }
                    neighbors.push(f.neighbors.clone());
                }
                FactorKind::IsingEdge { weight: w } => {
                    kernels.push(Kernel::Pair([*w, -w, -w, *w]));
                    neighbors.push(f.neighbors.clone());
                }
                FactorKind::RbmBlock {
                    n_visible,
                    n_hidden,
                    weights,
                } => {
                    for i in 0..*n_hidden {
                        for j in 0..*n_visible {
                            let w = weights[i * n_visible + j];
                            kernels.push(Kernel::Pair([0.0, 0.0, 0.0, w]));
                            neighbors.push(vec![f.neighbors[j], f.neighbors[n_visible + i]]);
                        }
                    }
                }
                FactorKind::Or => {
                    kernels.push(Kernel::Or);
                    neighbors.push(f.neighbors.clone());
                }
                FactorKind::And => {
                    kernels.push(Kernel::And);
                    neighbors.push(f.neighbors.clone());
                }
            }
        }

        let mut factor_edges = Vec::with_capacity(kernels.len() + 1);
        let mut edge_var = Vec::new();
        let mut edge_off = Vec::new();
        let mut off = 0;
        for nb in &neighbors {
            factor_edges.push(edge_var.len());
            for &v in nb {
                edge_var.push(v);
                edge_off.push(off);
                off += cards[v];
            }
        }
        factor_edges.push(edge_var.len());
        edge_off.push(off);

        let mut degree = vec![0usize; cards.len()];
        for &v in &edge_var {
            degree[v] += 1;
        }
        let mut var_edges_start = vec![0; cards.len() + 1];
        for i in 0..cards.len() {
            var_edges_start[i + 1] = var_edges_start[i] + degree[i];
        }
        let mut fill = var_edges_start.clone();
        let mut var_edges = vec![0; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[fill[v]] = e;
            fill[v] += 1;
        }

        Ok(Self {
            cards,
            unary_offsets: graph.unary_offsets().to_vec(),
            kernels,
            factor_edges,
            edge_var,
            edge_off,
            var_edges_start,
            var_edges,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    /// Length of a unary (or perturbation) vector, `Σ_i |x_i|`.
    pub fn unary_len(&self) -> usize {
        *self.unary_offsets.last().unwrap_or(&0)
    }

    /// Number of elementary kernels after expansion.
    pub fn num_kernels(&self) -> usize {
        self.kernels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    /// Variable and state range of edge `e` inside the message buffers.
    pub fn edge(&self, e: usize) -> (usize, std::ops::Range<usize>) {
        (self.edge_var[e], self.edge_off[e]..self.edge_off[e + 1])
    }

    /// Edge indices of kernel `k`.
    pub fn kernel_edges(&self, k: usize) -> std::ops::Range<usize> {
        self.factor_edges[k]..self.factor_edges[k + 1]
    }

    /// All-zero messages.
    pub fn new_state(&self) -> MessageState {
        let len = *self.edge_off.last().unwrap();
        MessageState {
            var_to_factor: vec![0.0; len],
            factor_to_var: vec![0.0; len],
            iteration: 0,
        }
    }

    fn check(&self, state: &MessageState, unaries: &[f64]) {
        assert_eq!(unaries.len(), self.unary_len(), "unary vector length");
        assert_eq!(state.factor_to_var.len(), *self.edge_off.last().unwrap(), "message length");
    }

    /// `m_{i→a}(x) = φ_i(x) + Σ_{b ∈ nb(i)\a} m_{b→i}(x)`, shifted to max 0.
    pub fn var_to_factor_update(&self, state: &mut MessageState, unaries: &[f64]) {
        self.check(state, unaries);
        let f2v = &state.factor_to_var;
        let v2f = &mut state.var_to_factor;
        let mut acc = Vec::new();
        for i in 0..self.num_vars() {
            let c = self.cards[i];
            let edges = &self.var_edges[self.var_edges_start[i]..self.var_edges_start[i + 1]];
            let u = &unaries[self.unary_offsets[i]..self.unary_offsets[i] + c];
            // Forward pass: unary plus messages of earlier edges.
            acc.clear();
            acc.extend_from_slice(u);
            for &e in edges {
                let o = self.edge_off[e];
                v2f[o..o + c].copy_from_slice(&acc);
                for s in 0..c {
                    acc[s] += f2v[o + s];
                }
            }
            // Backward pass: messages of later edges.
            acc.iter_mut().for_each(|v| *v = 0.0);
            for &e in edges.iter().rev() {
                let o = self.edge_off[e];
                for s in 0..c {
                    v2f[o + s] += acc[s];
                    acc[s] += f2v[o + s];
                }
                normalize(&mut v2f[o..o + c]);
            }
        }
    }

    /// Recomputes every factor→variable message from the current
    /// variable→factor messages, damps and normalizes. Returns the largest
    /// absolute change of any entry.
    pub fn factor_to_var_update(&self, state: &mut MessageState, damping: f64) -> f64 {
        let v2f = &state.var_to_factor;
        let n = self.kernels.len();
        let delta = if n >= PARALLEL_THRESHOLD {
            let mut slices = Vec::with_capacity(n);
            let mut rest: &mut [f64] = &mut state.factor_to_var;
            let mut start = 0;
            for k in 0..n {
                let end = self.edge_off[self.factor_edges[k + 1]];
                let (head, tail) = rest.split_at_mut(end - start);
                slices.push(head);
                rest = tail;
                start = end;
            }
            slices
                .into_par_iter()
                .enumerate()
                .map_init(Scratch::default, |scratch, (k, out)| {
                    self.update_kernel(k, v2f, out, damping, scratch)
                })
                .reduce(|| 0.0, f64::max)
        } else {
            let mut scratch = Scratch::default();
            let mut delta: f64 = 0.0;
            for k in 0..n {
                let lo = self.edge_off[self.factor_edges[k]];
                let hi = self.edge_off[self.factor_edges[k + 1]];
                let d = self.update_kernel(k, v2f, &mut state.factor_to_var[lo..hi], damping, &mut scratch);
                delta = delta.max(d);
            }
            delta
        };
        state.iteration += 1;
        delta
    }

    fn update_kernel(&self, k: usize, v2f: &[f64], out: &mut [f64], damping: f64, scratch: &mut Scratch) -> f64 {
        let edges = self.factor_edges[k]..self.factor_edges[k + 1];
        let base = self.edge_off[edges.start];
        let fresh = &mut scratch.fresh;
        fresh.clear();
        fresh.resize(out.len(), f64::NEG_INFINITY);
        match &self.kernels[k] {
            Kernel::Pair(t) => {
                let e0 = edges.start;
                let a = &v2f[self.edge_off[e0]..self.edge_off[e0] + 2];
                let b = &v2f[self.edge_off[e0 + 1]..self.edge_off[e0 + 1] + 2];
                let (fa, fb) = fresh.split_at_mut(2);
                kernels::pair_table_into(t, a, b, fa, fb);
            }
            Kernel::Dense { table, cards } => {
                let offs: Vec<usize> = edges.clone().map(|e| self.edge_off[e]).collect();
                let local: Vec<usize> = offs.iter().map(|&o| o - base).collect();
                kernels::dense_into(
                    table,
                    cards,
                    |slot, s| v2f[offs[slot] + s],
                    |slot, s, v| {
                        let cell = &mut fresh[local[slot] + s];
                        if v > *cell {
                            *cell = v;
                        }
                    },
                    &mut scratch.aux,
                );
            }
            Kernel::Or | Kernel::And => {
                let d = edges.len();
                scratch.inc.clear();
                scratch.inc.extend(edges.clone().map(|e| kernels::log_odds(&v2f[self.edge_off[e]..])));
                scratch.outn.clear();
                scratch.outn.resize(d, 0.0);
                if matches!(self.kernels[k], Kernel::Or) {
                    kernels::or_messages_into(&scratch.inc, &mut scratch.outn, &mut scratch.aux);
                } else {
                    kernels::and_messages_into(&scratch.inc, &mut scratch.outn);
                }
                for slot in 0..d {
                    kernels::from_log_odds(scratch.outn[slot], &mut fresh[2 * slot..2 * slot + 2]);
                }
            }
        }
        let mut delta: f64 = 0.0;
        for e in edges {
            let r = self.edge_off[e] - base..self.edge_off[e + 1] - base;
            let before = &mut scratch.aux;
            before.clear();
            before.extend_from_slice(&out[r.clone()]);
            for (o, f) in out[r.clone()].iter_mut().zip(&fresh[r.clone()]) {
                *o = (1.0 - damping) * *o + damping * f;
            }
            normalize(&mut out[r.clone()]);
            for (o, b) in out[r].iter().zip(before.iter()) {
                delta = delta.max((o - b).abs());
            }
        }
        delta
    }

    /// One damped Jacobi sweep; returns the largest message change.
    pub fn damped_sweep(&self, state: &mut MessageState, unaries: &[f64], damping: f64) -> f64 {
        self.var_to_factor_update(state, unaries);
        self.factor_to_var_update(state, damping)
    }

    /// `φ_i(x) + Σ_{b ∈ nb(i)} m_{b→i}(x)` for every variable, flat.
    pub fn beliefs(&self, state: &MessageState, unaries: &[f64]) -> Vec<f64> {
        self.check(state, unaries);
        let mut out = unaries.to_vec();
        for (e, &v) in self.edge_var.iter().enumerate() {
            let o = self.edge_off[e];
            let start = self.unary_offsets[v];
            for s in 0..self.cards[v] {
                out[start + s] += state.factor_to_var[o + s];
            }
        }
        out
    }

    /// Argmax of each belief, ties to the lowest state.
    pub fn decode(&self, state: &MessageState, unaries: &[f64]) -> Assignment {
        let b = self.beliefs(state, unaries);
        Assignment(
            (0..self.num_vars())
                .map(|i| argmax(&b[self.unary_offsets[i]..self.unary_offsets[i + 1]]))
                .collect(),
        )
    }

    /// Zero-initialized messages, `cfg.sweeps` damped sweeps, decode.
    /// The per-sweep message deltas are returned alongside.
    pub fn run(&self, unaries: &[f64], cfg: &SweepConfig) -> (Assignment, Vec<f64>) {
        let mut state = self.new_state();
        let mut deltas = Vec::with_capacity(cfg.sweeps);
        for _ in 0..cfg.sweeps {
            let d = self.damped_sweep(&mut state, unaries, cfg.damping);
            deltas.push(d);
            // An unchanged sweep is a fixed point: later sweeps are no-ops.
            if d == 0.0 {
                break;
            }
        }
        (self.decode(&state, unaries), deltas)
    }
}

#[derive(Default)]
struct Scratch {
    fresh: Vec<f64>,
    aux: Vec<f64>,
    inc: Vec<f64>,
    outn: Vec<f64>,
}

/// Shifts `v` so that its maximum is zero.
#[inline]
pub fn normalize(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() {
        v.iter_mut().for_each(|x| *x -= m);
    }
}

/// Index of the largest entry, lowest index on ties.
#[inline]
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::{AssignmentIter, CLAMP_SCORE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_map(g: &FactorGraph, unaries: &[f64]) -> Vec<usize> {
        let offs = g.unary_offsets();
        let mut best = (f64::NEG_INFINITY, vec![]);
        for x in AssignmentIter::new(g.cardinalities()) {
            let mut v = g.log_score(&x) - x.iter().enumerate().map(|(i, &s)| g.unaries_flat()[offs[i] + s]).sum::<f64>();
            v += x.iter().enumerate().map(|(i, &s)| unaries[offs[i] + s]).sum::<f64>();
            if v > best.0 {
                best = (v, x);
            }
        }
        best.1
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> FactorGraph {
        let mut g = FactorGraph::binary(n);
        for i in 1..n {
            let parent = rng.random_range(0..i);
            g.add_factor(vec![parent, i], FactorKind::IsingEdge { weight: rng.random_range(-1.5..1.5) })
                .unwrap();
        }
        for i in 0..n {
            g.set_unary(i, &[0.0, rng.random_range(-1.0..1.0)]).unwrap();
        }
        g
    }

    #[test]
    fn single_factor_variable_receives_its_unary() {
        let mut g = FactorGraph::binary(2);
        g.add_factor(vec![0, 1], FactorKind::IsingEdge { weight: 0.4 }).unwrap();
        let e = Engine::new(&g).unwrap();
        let mut st = e.new_state();
        e.var_to_factor_update(&mut st, &[0.2, -0.1, 0.0, 0.0]);
        let (_, r) = e.edge(0);
        assert!((st.var_to_factor[r.start] - 0.0).abs() < 1e-15);
        assert!((st.var_to_factor[r.start + 1] - (-0.3)).abs() < 1e-15);
    }

    #[test]
    fn star_var_to_factor_equals_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = FactorGraph::new(vec![3, 2, 2, 2]).unwrap();
        for j in 1..4 {
            let table: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            g.add_factor(vec![0, j], FactorKind::DenseTable { table }).unwrap();
        }
        let e = Engine::new(&g).unwrap();
        let mut st = e.new_state();
        st.factor_to_var.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let unaries: Vec<f64> = (0..e.unary_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        e.var_to_factor_update(&mut st, &unaries);
        let hub_edges: Vec<usize> = (0..e.num_edges()).filter(|&k| e.edge(k).0 == 0).collect();
        for &a in &hub_edges {
            let mut expect: Vec<f64> = unaries[0..3].to_vec();
            for &b in &hub_edges {
                if b != a {
                    let r = e.edge(b).1;
                    for s in 0..3 {
                        expect[s] += st.factor_to_var[r.start + s];
                    }
                }
            }
            normalize(&mut expect);
            let r = e.edge(a).1;
            for s in 0..3 {
                assert!((st.var_to_factor[r.start + s] - expect[s]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn damping_blends_and_fixed_points_are_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_tree(&mut rng, 6);
        let e = Engine::new(&g).unwrap();
        let unaries = g.unaries_flat().to_vec();
        let mut st = e.new_state();
        for _ in 0..50 {
            e.damped_sweep(&mut st, &unaries, 1.0);
        }
        let mut undamped = st.clone();
        let d = e.damped_sweep(&mut undamped, &unaries, 1.0);
        assert!(d <= 1e-12);
        for alpha in [0.1, 0.5, 0.9] {
            let mut damped = st.clone();
            e.damped_sweep(&mut damped, &unaries, alpha);
            for (a, b) in damped.factor_to_var.iter().zip(&st.factor_to_var) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn midpoint_damping() {
        let mut g = FactorGraph::binary(1);
        g.add_factor(vec![0], FactorKind::DenseTable { table: vec![0.0, -2.0] }).unwrap();
        let e = Engine::new(&g).unwrap();
        let mut st = e.new_state();
        st.factor_to_var = vec![0.0, -4.0];
        e.damped_sweep(&mut st, &[0.0, 0.0], 0.5);
        assert_eq!(st.factor_to_var, vec![0.0, -3.0]);
    }

    #[test]
    fn decode_rules() {
        let mut g = FactorGraph::new(vec![3, 2]).unwrap();
        g.set_unary(0, &[0.1, 0.5, -1.0]).unwrap();
        let e = Engine::new(&g).unwrap();
        let st = e.new_state();
        assert_eq!(e.decode(&st, g.unaries_flat()).0, vec![1, 0]);
        assert_eq!(e.decode(&st, &[0.0; 5]).0, vec![0, 0]);
    }

    #[test]
    fn trees_decode_to_brute_force_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..100 {
            let n = 2 + trial % 11;
            let g = random_tree(&mut rng, n);
            let e = Engine::new(&g).unwrap();
            let unaries: Vec<f64> = g
                .unaries_flat()
                .iter()
                .map(|u| u + rng.random_range(-2.0..2.0))
                .collect();
            let (x, _) = e.run(&unaries, &SweepConfig { damping: 0.5, sweeps: 200 });
            assert_eq!(x.0, brute_force_map(&g, &unaries), "trial {trial}");
        }
    }

    #[test]
    fn messages_stay_bounded_on_loopy_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let mut g = FactorGraph::binary(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_factor(vec![i, j], FactorKind::IsingEdge { weight: rng.random_range(-1.0..1.0) })
                    .unwrap();
            }
            g.set_unary(i, &[0.0, rng.random_range(-1.0..1.0)]).unwrap();
        }
        let e = Engine::new(&g).unwrap();
        let mut st = e.new_state();
        for _ in 0..10_000 {
            e.damped_sweep(&mut st, g.unaries_flat(), 0.5);
        }
        for k in 0..e.num_edges() {
            let r = e.edge(k).1;
            let m = &st.factor_to_var[r];
            assert_eq!(m.iter().copied().fold(f64::NEG_INFINITY, f64::max), 0.0);
            assert!(m.iter().all(|v| v.is_finite() && v.abs() < 100.0));
        }
    }

    #[test]
    fn clamped_unaries_are_respected() {
        let mut g = FactorGraph::binary(3);
        g.add_factor(vec![0, 1], FactorKind::IsingEdge { weight: 3.0 }).unwrap();
        g.add_factor(vec![1, 2], FactorKind::IsingEdge { weight: 3.0 }).unwrap();
        let e = Engine::new(&g).unwrap();
        let unaries = vec![CLAMP_SCORE, 0.0, 0.0, 0.0, 0.5, 0.0];
        let (x, _) = e.run(&unaries, &SweepConfig::default());
        assert_eq!(x.0, vec![1, 1, 1]);
    }

    #[test]
    fn oversized_dense_factor_is_refused() {
        let mut g = FactorGraph::new(vec![1024, 1024, 2]).unwrap();
        g.add_factor(vec![0, 1], FactorKind::DenseTable { table: vec![0.0; 1 << 20] }).unwrap();
        assert!(Engine::new(&g).is_ok());
        let mut g = FactorGraph::new(vec![1024, 1025]).unwrap();
        g.add_factor(vec![0, 1], FactorKind::DenseTable { table: vec![0.0; 1024 * 1025] }).unwrap();
        assert!(matches!(Engine::new(&g), Err(Error::Capacity { .. })));
    }

    #[test]
    fn scalar_and_vector_decodes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut g = FactorGraph::binary(7);
            for i in 0..7 {
                g.set_unary(i, &[0.0, rng.random_range(-2.0..2.0)]).unwrap();
            }
            g.add_factor(vec![0, 1, 4], FactorKind::And).unwrap();
            g.add_factor(vec![2, 3, 5], FactorKind::And).unwrap();
            g.add_factor(vec![4, 5, 6], FactorKind::Or).unwrap();
            g.add_factor(vec![1, 2], FactorKind::IsingEdge { weight: rng.random_range(-1.0..1.0) })
                .unwrap();
            let mut dense = FactorGraph::binary(7);
            for i in 0..7 {
                dense.set_unary(i, g.unary(i)).unwrap();
            }
            for a in 0..g.factors().len() {
                let f = g.to_dense_table(a).unwrap();
                dense.add_factor(f.neighbors, f.kind).unwrap();
            }
            let cfg = SweepConfig { damping: 0.5, sweeps: 30 };
            let (x, _) = Engine::new(&g).unwrap().run(g.unaries_flat(), &cfg);
            let (y, _) = Engine::new(&dense).unwrap().run(dense.unaries_flat(), &cfg);
            assert_eq!(x, y);
        }
    }
}
