//! Matrix-form max-product for binary RBMs.
//!
//! `E(v, h) = -hᵀ W v - bᵀ h - cᵀ v` with `W` of shape
//! `n_hidden × n_visible`. Each pair factor `(i, j)` carries two log-odds
//! messages: `hv[i][j]` towards visible `j` and `vh[i][j]` towards hidden `i`.

use ndarray::{Array2, Axis};

use super::kernels::pair_update;
use super::SweepConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RbmMessages {
    pub hv: Array2<f64>,
    pub vh: Array2<f64>,
}

impl RbmMessages {
    pub fn zeros(n_hidden: usize, n_visible: usize) -> Self {
        Self {
            hv: Array2::zeros((n_hidden, n_visible)),
            vh: Array2::zeros((n_hidden, n_visible)),
        }
    }

    /// Blends in `fresh`; returns the largest change.
    pub fn damp(&mut self, fresh: &RbmMessages, alpha: f64) -> f64 {
        let mut delta: f64 = 0.0;
        let mut blend = |o: &mut f64, f: &f64| {
            let new = (1.0 - alpha) * *o + alpha * f;
            delta = delta.max((new - *o).abs());
            *o = new;
        };
        self.hv.zip_mut_with(&fresh.hv, &mut blend);
        self.vh.zip_mut_with(&fresh.vh, &mut blend);
        delta
    }

    /// `(v, h)` with each unit on iff its belief log-odds is positive.
    pub fn decode(&self, b: &[f64], c: &[f64]) -> (Vec<usize>, Vec<usize>) {
        let hb = self.vh.sum_axis(Axis(1));
        let vb = self.hv.sum_axis(Axis(0));
        let h = hb.iter().zip(b).map(|(s, bi)| usize::from(s + bi > 0.0)).collect();
        let v = vb.iter().zip(c).map(|(s, cj)| usize::from(s + cj > 0.0)).collect();
        (v, h)
    }
}

/// One undamped update of both message families.
///
/// `b` (hidden) and `c` (visible) must already include the perturbation
/// differences `ε(1) - ε(0)`.
pub fn rbm_sweep(messages: &RbmMessages, w: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<RbmMessages> {
    let (m, n) = w.dim();
    if b.len() != m || c.len() != n || messages.hv.dim() != (m, n) || messages.vh.dim() != (m, n) {
        return Err(Error::structural(format!(
            "RBM shapes disagree: W {m}×{n}, b {}, c {}",
            b.len(),
            c.len()
        )));
    }
    let mut out = RbmMessages::zeros(m, n);
    sweep_into(messages, w, b, c, &mut out);
    Ok(out)
}

pub(crate) fn sweep_into(messages: &RbmMessages, w: &Array2<f64>, b: &[f64], c: &[f64], out: &mut RbmMessages) {
    let (m, n) = w.dim();
    let hidden_sum = messages.vh.sum_axis(Axis(1));
    let visible_sum = messages.hv.sum_axis(Axis(0));
    for i in 0..m {
        let hs = b[i] + hidden_sum[i];
        for j in 0..n {
            let wij = w[[i, j]];
            out.hv[[i, j]] = pair_update(hs - messages.vh[[i, j]], wij);
            out.vh[[i, j]] = pair_update(c[j] + visible_sum[j] - messages.hv[[i, j]], wij);
        }
    }
}

/// Zero-initialized messages, `cfg.sweeps` damped sweeps, decode to `(v, h)`.
pub fn rbm_map(w: &Array2<f64>, b: &[f64], c: &[f64], cfg: &SweepConfig) -> (Vec<usize>, Vec<usize>) {
    let (m, n) = w.dim();
    let mut msg = RbmMessages::zeros(m, n);
    let mut fresh = RbmMessages::zeros(m, n);
    for _ in 0..cfg.sweeps {
        sweep_into(&msg, w, b, c, &mut fresh);
        if msg.damp(&fresh, cfg.damping) == 0.0 {
            break;
        }
    }
    msg.decode(b, c)
}
