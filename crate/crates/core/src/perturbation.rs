//! Gumbel perturbations of unary potentials.
//!
//! Fresh draws are i.i.d. Gumbel with location `-c` (`c` the
//! Euler–Mascheroni constant) and unit scale, hence zero mean. The
//! persistent variant drives a Gaussian AR(1) latent per entry and maps it
//! through the normal CDF and the Gumbel inverse CDF, so consecutive draws
//! are correlated while each marginal stays Gumbel.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// One Gumbel value per (variable, state), laid out like the unaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationVector(pub Vec<f64>);

impl std::ops::Deref for PerturbationVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Inverse CDF of Gumbel(−c, 1).
#[inline]
pub fn gumbel_inv_cdf(u: f64) -> f64 {
    -EULER_GAMMA - (-u.ln()).ln()
}

/// CDF of Gumbel(−c, 1).
#[inline]
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-(x + EULER_GAMMA)).exp()).exp()
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `len` i.i.d. Gumbel(−c, 1) draws.
pub fn draw_gumbel(len: usize, rng: &mut impl Rng) -> PerturbationVector {
    PerturbationVector(fill_gumbel(len, rng))
}

pub(crate) fn fill_gumbel(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| gumbel_inv_cdf(rng.sample(Open01))).collect()
}

/// `θ_i + ε_i` for every unary entry.
pub fn perturb(unaries: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if unaries.len() != eps.len() {
        return Err(Error::structural(format!(
            "perturbation length {} differs from unary length {}",
            eps.len(),
            unaries.len()
        )));
    }
    Ok(unaries.iter().zip(eps).map(|(u, e)| u + e).collect())
}

/// Gaussian latent chain behind correlated Gumbel draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistentPerturbationState {
    pub gamma: Vec<f64>,
    pub rho: f64,
}

impl PersistentPerturbationState {
    /// Starts the chain at its stationary law, `γ ~ N(0, I)`.
    pub fn new(len: usize, rho: f64, rng: &mut impl Rng) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self {
            gamma: (0..len).map(|_| rng.sample(StandardNormal)).collect(),
            rho,
        })
    }

    /// The Gumbel values for the current latent, without advancing.
    pub fn current(&self) -> PerturbationVector {
        PerturbationVector(self.gamma.iter().map(|&g| latent_to_gumbel(g)).collect())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::parameter(format!("correlation ρ must lie in [0, 1], got {rho}")));
    }
    Ok(())
}

#[inline]
fn latent_to_gumbel(g: f64) -> f64 {
    gumbel_inv_cdf(normal_cdf(g).clamp(1e-300, 1.0 - 1e-16))
}

/// `γ ← √ρ γ + √(1-ρ) δ`, then `ε = G⁻¹(Φ(γ))` entrywise.
pub fn persistent_step(state: &mut PersistentPerturbationState, rng: &mut impl Rng) -> Result<PerturbationVector> {
    check_rho(state.rho)?;
    let a = state.rho.sqrt();
    let b = (1.0 - state.rho).sqrt();
    for g in state.gamma.iter_mut() {
        let d: f64 = rng.sample(StandardNormal);
        *g = a * *g + b * d;
    }
    Ok(state.current())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::stats::{ks_one_sample, ks_two_sample};
    use crate::factor_graph::CLAMP_SCORE;
    use crate::max_product::argmax;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_cdf_at_half() {
        let expect = -EULER_GAMMA - (2f64.ln()).ln();
        assert!((gumbel_inv_cdf(0.5) - expect).abs() < 1e-15);
        assert!((gumbel_inv_cdf(0.5) + 0.2107).abs() < 1e-4);
        assert!((gumbel_cdf(gumbel_inv_cdf(0.3)) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn moments_of_a_million_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let e = draw_gumbel(1_000_000, &mut rng);
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.005, "mean {mean}");
        let target = std::f64::consts::PI.powi(2) / 6.0;
        assert!((var - target).abs() < 0.01, "var {var}");
    }

    #[test]
    fn perturb_is_elementwise_and_linear() {
        assert_eq!(perturb(&[0.3, 0.1], &[0.0, 0.0]).unwrap(), vec![0.3, 0.1]);
        assert_eq!(perturb(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
        assert!(perturb(&[0.0], &[1.0, 2.0]).is_err());
        let th = [0.25, -0.5];
        let (e1, e2) = ([0.5, 1.25], [-0.75, 2.0]);
        let sum: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        let once = perturb(&th, &sum).unwrap();
        let twice = perturb(&perturb(&th, &e1).unwrap(), &e2).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn clamped_state_survives_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100_000 {
            let e = draw_gumbel(2, &mut rng);
            let p = perturb(&[CLAMP_SCORE, 0.0], &e).unwrap();
            assert_eq!(argmax(&p), 1);
        }
    }

    #[test]
    fn unary_argmax_is_softmax_distributed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let theta = [0.3, -0.4, 1.0, 0.0];
        let z: f64 = theta.iter().map(|t: &f64| t.exp()).sum();
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            let e = draw_gumbel(4, &mut rng);
            counts[argmax(&perturb(&theta, &e).unwrap())] += 1;
        }
        let tv: f64 = 0.5
            * theta
                .iter()
                .zip(&counts)
                .map(|(t, &c)| (t.exp() / z - c as f64 / n as f64).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "tv {tv}");
    }

    #[test]
    fn persistent_chain_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut st = PersistentPerturbationState::new(1000, 1.0, &mut rng).unwrap();
        let a = persistent_step(&mut st, &mut rng).unwrap();
        let b = persistent_step(&mut st, &mut rng).unwrap();
        assert_eq!(a, b);

        let n = 100_000;
        let mut st = PersistentPerturbationState::new(n, 0.0, &mut rng).unwrap();
        let a = persistent_step(&mut st, &mut rng).unwrap();
        let b = persistent_step(&mut st, &mut rng).unwrap();
        let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
        let cov: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!((cov / (va * vb).sqrt()).abs() < 0.01);

        let fresh = draw_gumbel(n, &mut rng);
        assert!(ks_two_sample(&a, &fresh).1 > 0.01);
    }

    #[test]
    fn persistent_marginals_are_gumbel() {
        for (seed, rho) in [(25, 0.0), (26, 0.5), (27, 0.9)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut st = PersistentPerturbationState::new(100_000, rho, &mut rng).unwrap();
            let e = persistent_step(&mut st, &mut rng).unwrap();
            let (_, p) = ks_one_sample(&e, gumbel_cdf);
            assert!(p > 0.01, "rho {rho}: p {p}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(PersistentPerturbationState::new(3, 1.5, &mut rng).is_err());
    }
}
