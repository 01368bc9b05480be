//! Matrix-form max-product for fully connected binary pairwise models.
//!
//! The model is `E(x) = -½ xᵀ W x - bᵀ x` over `x ∈ {0,1}ⁿ` with `W`
//! symmetric and zero on the diagonal. `N[i][j]` is the log-odds message
//! that the pair factor `(i, j)` sends to variable `j`.

use ndarray::{Array1, Array2};

use super::kernels::pair_update;
use super::SweepConfig;
use crate::error::{Error, Result};

/// Log-odds messages `N_ij = n_{i→j}`; the diagonal stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingMessageMatrix {
    pub n: Array2<f64>,
}

impl IsingMessageMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            n: Array2::zeros((size, size)),
        }
    }

    /// `N ← (1 - α) N + α fresh`.
    /// Blends in `fresh`; returns the largest change.
    pub fn damp(&mut self, fresh: &IsingMessageMatrix, alpha: f64) -> f64 {
        let mut delta: f64 = 0.0;
        self.n.zip_mut_with(&fresh.n, |o, &f| {
            let new = (1.0 - alpha) * *o + alpha * f;
            delta = delta.max((new - *o).abs());
            *o = new;
        });
        delta
    }

    /// Belief log-odds `b_i + Σ_k N_ki`.
    pub fn belief(&self, b: &[f64]) -> Array1<f64> {
        let mut s = self.n.sum_axis(ndarray::Axis(0));
        s.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
        s
    }

    /// `x_i = 1` iff the belief log-odds is strictly positive.
    pub fn decode(&self, b: &[f64]) -> Vec<usize> {
        self.belief(b).iter().map(|&v| usize::from(v > 0.0)).collect()
    }
}

pub(crate) fn check_coupling(w: &Array2<f64>) -> Result<()> {
    let (r, c) = w.dim();
    if r != c {
        return Err(Error::structural(format!("coupling matrix is {r}×{c}")));
    }
    for i in 0..r {
        if w[[i, i]] != 0.0 {
            return Err(Error::structural(format!("coupling diagonal entry {i} is nonzero")));
        }
        for j in 0..i {
            if w[[i, j]] != w[[j, i]] {
                return Err(Error::structural(format!("coupling matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// One undamped matrix update `N = max(0, P + W) - max(0, P)` with
/// `P_ij = b_i + Σ_k N_ki - N_ji`.
///
/// `b` must already include the perturbation difference `ε_i(1) - ε_i(0)`.
pub fn ising_sweep_matrix(
    messages: &IsingMessageMatrix,
    w: &Array2<f64>,
    b: &[f64],
) -> Result<IsingMessageMatrix> {
    check_coupling(w)?;
    if messages.n.dim() != w.dim() || b.len() != w.nrows() {
        return Err(Error::structural("message, coupling and bias shapes differ"));
    }
    let mut out = IsingMessageMatrix::zeros(b.len());
    sweep_into(messages, w, b, &mut out);
    Ok(out)
}

pub(crate) fn sweep_into(messages: &IsingMessageMatrix, w: &Array2<f64>, b: &[f64], out: &mut IsingMessageMatrix) {
    let n = b.len();
    let s = messages.belief(b);
    let nm = &messages.n;
    for i in 0..n {
        for j in 0..n {
            out.n[[i, j]] = if i == j {
                0.0
            } else {
                pair_update(s[i] - nm[[j, i]], w[[i, j]])
            };
        }
    }
}

/// Zero-initialized messages, `cfg.sweeps` damped matrix sweeps, decode.
pub fn ising_map(w: &Array2<f64>, b: &[f64], cfg: &SweepConfig) -> Vec<usize> {
    let size = b.len();
    let mut msg = IsingMessageMatrix::zeros(size);
    let mut fresh = IsingMessageMatrix::zeros(size);
    for _ in 0..cfg.sweeps {
        sweep_into(&msg, w, b, &mut fresh);
        if msg.damp(&fresh, cfg.damping) == 0.0 {
            break;
        }
    }
    msg.decode(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::{FactorGraph, FactorKind};
    use crate::max_product::{kernels::log_odds, Engine};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, n: usize) -> (Array2<f64>, Vec<f64>) {
        let mut w = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let v = rng.random_range(-1.0..1.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (w, b)
    }

    /// The same model as a generic graph with dense pair tables.
    fn as_graph(w: &Array2<f64>, b: &[f64]) -> FactorGraph {
        let n = b.len();
        let mut g = FactorGraph::binary(n);
        for i in 0..n {
            g.set_unary(i, &[0.0, b[i]]).unwrap();
        }
        for i in 0..n {
            for j in i + 1..n {
                g.add_factor(vec![i, j], FactorKind::DenseTable { table: vec![0.0, 0.0, 0.0, w[[i, j]]] })
                    .unwrap();
            }
        }
        g
    }

    #[test]
    fn two_variable_example() {
        let mut w = Array2::zeros((2, 2));
        w[[0, 1]] = 1.0;
        w[[1, 0]] = 1.0;
        let out = ising_sweep_matrix(&IsingMessageMatrix::zeros(2), &w, &[0.3, 0.0]).unwrap();
        assert!((out.n[[0, 1]] - 1.0).abs() < 1e-15);
        // Pairwise max-marginalization oracle.
        let m1 = (0.3f64 + 1.0).max(0.0);
        let m0 = 0.3f64.max(0.0);
        assert!((out.n[[0, 1]] - (m1 - m0)).abs() < 1e-15);
    }

    #[test]
    fn zero_model_stays_zero() {
        let w = Array2::zeros((3, 3));
        let out = ising_sweep_matrix(&IsingMessageMatrix::zeros(3), &w, &[0.0; 3]).unwrap();
        assert!(out.n.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_coupling() {
        let mut w = Array2::zeros((2, 2));
        w[[0, 1]] = 1.0;
        assert!(ising_sweep_matrix(&IsingMessageMatrix::zeros(2), &w, &[0.0; 2]).is_err());
        let mut w = Array2::zeros((2, 2));
        w[[0, 0]] = 1.0;
        assert!(ising_sweep_matrix(&IsingMessageMatrix::zeros(2), &w, &[0.0; 2]).is_err());
    }

    #[test]
    fn matches_generic_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 6;
            let (w, b) = random_model(&mut rng, n);
            let g = as_graph(&w, &b);
            let e = Engine::new(&g).unwrap();
            let mut st = e.new_state();
            let mut msg = IsingMessageMatrix::zeros(n);
            let mut fresh = IsingMessageMatrix::zeros(n);
            for _ in 0..25 {
                e.damped_sweep(&mut st, g.unaries_flat(), 0.5);
                sweep_into(&msg, &w, &b, &mut fresh);
                msg.damp(&fresh, 0.5);
                for k in 0..e.num_kernels() {
                    let edges = e.kernel_edges(k);
                    let (vi, ri) = e.edge(edges.start);
                    let (vj, rj) = e.edge(edges.start + 1);
                    assert!((log_odds(&st.factor_to_var[rj]) - msg.n[[vi, vj]]).abs() < 1e-9);
                    assert!((log_odds(&st.factor_to_var[ri]) - msg.n[[vj, vi]]).abs() < 1e-9);
                }
            }
            assert_eq!(e.decode(&st, g.unaries_flat()).0, msg.decode(&b));
        }
    }
}
