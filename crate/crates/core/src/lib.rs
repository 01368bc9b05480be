//! Perturb-and-max-product sampling and learning for discrete energy-based
//! models.
//!
//! Samples are drawn by adding Gumbel noise to the unary potentials of a
//! factor graph and decoding the perturbed MAP with damped parallel
//! max-product. The same sampler drives moment-matching learning.

pub mod error;
pub mod evaluation;
pub mod data_io;
pub mod factor_graph;
pub mod learning;
pub mod lp_export;
pub mod max_product;
pub mod models;
pub mod perturbation;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
