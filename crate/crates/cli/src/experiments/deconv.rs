//! Posterior sampling of features and locations given binary images.

use std::path::PathBuf;

use pmp_core::data_io::{
    build_deconv_graph_with, deconv_truth_files, gen_deconv_dataset, load_deconv_truth, write_samples, DeconvShape,
    DEFAULT_PRIOR_LOG_ODDS,
};
use pmp_core::evaluation::SampleSet;
use pmp_core::models::EnergyModel;
use pmp_core::rng::{stream_rng, Streams};
use pmp_core::samplers::pmp_posterior_sample;
use pmp_core::Result;
use serde::{Deserialize, Serialize};

use super::{sweep_config, Budget};
use crate::output::Output;

const STREAM_DATA: u64 = 1;
const STREAM_SAMPLES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeconvConfig {
    pub seed: u64,
    /// Load a saved truth instead of generating one.
    pub truth_dir: Option<PathBuf>,
    pub n_images: usize,
    pub true_features: usize,
    pub true_feat_size: usize,
    /// Side of the location grid; images are `loc_size + true_feat_size - 1`.
    pub loc_size: usize,
    pub feature_density: f64,
    pub location_density: f64,
    /// Feature slots and feature side used for inference.
    pub features: usize,
    pub feat_size: usize,
    /// Side of the inference location grid; `None` fits it to the images.
    pub infer_loc_size: Option<usize>,
    pub prior_w: f64,
    pub prior_s: f64,
    pub sweeps: usize,
    pub damping: f64,
    /// Posterior samples, one per consecutive seed.
    pub samples: usize,
    pub budget_secs: Option<f64>,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            truth_dir: None,
            n_images: 20,
            true_features: 3,
            true_feat_size: 3,
            loc_size: 10,
            feature_density: 0.5,
            location_density: 0.02,
            features: 4,
            feat_size: 3,
            infer_loc_size: None,
            prior_w: DEFAULT_PRIOR_LOG_ODDS,
            prior_s: DEFAULT_PRIOR_LOG_ODDS,
            sweeps: 1000,
            damping: 0.5,
            samples: 5,
            budget_secs: None,
        }
    }
}

impl DeconvConfig {
    /// 100 images from four 5×5 features; inference with five 6×6 slots
    /// over a 9×9 location grid.
    pub fn full_scale() -> Self {
        Self {
            n_images: 100,
            true_features: 4,
            true_feat_size: 5,
            loc_size: 9,
            features: 5,
            feat_size: 6,
            infer_loc_size: Some(9),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvReport {
    pub latent_variables: usize,
    pub graph_variables: usize,
    /// Fraction of image pixels reproduced by each posterior sample.
    pub pixel_agreement: Vec<f64>,
    pub min_agreement: f64,
    pub truncated: bool,
}

pub fn run(cfg: &mut DeconvConfig, out: &mut Output) -> Result<DeconvReport> {
    let budget = Budget::new(cfg.budget_secs);
    let truth = match &cfg.truth_dir {
        Some(dir) => load_deconv_truth(dir)?,
        None => gen_deconv_dataset(
            cfg.n_images,
            cfg.true_features,
            cfg.true_feat_size,
            cfg.true_feat_size,
            cfg.loc_size,
            cfg.loc_size,
            cfg.feature_density,
            cfg.location_density,
            &mut stream_rng(cfg.seed, STREAM_DATA, 0),
        )?,
    };
    let images = truth.images();
    let loc = |side: usize| cfg.infer_loc_size.unwrap_or(side + 1 - cfg.feat_size.min(side));
    let shape = DeconvShape {
        n_images: images.count,
        n_feat: cfg.features,
        feat_height: cfg.feat_size,
        feat_width: cfg.feat_size,
        loc_height: loc(images.height),
        loc_width: loc(images.width),
        height: images.height,
        width: images.width,
    };
    let t0 = std::time::Instant::now();
    let g = build_deconv_graph_with(&images, shape, cfg.prior_w, cfg.prior_s)?;
    let sampler = g.graph.sampler()?;
    out.time("build", t0.elapsed());
    let sweep = sweep_config(cfg.damping, cfg.sweeps)?;
    let streams = Streams::new(cfg.seed).child(STREAM_SAMPLES);
    let mut agreement = Vec::new();
    let mut w_rows = Vec::new();
    let mut truncated = false;
    let t0 = std::time::Instant::now();
    for k in 0..cfg.samples {
        if budget.exhausted() {
            truncated = true;
            cfg.samples = k;
            cfg.budget_secs = None;
            break;
        }
        let x = pmp_posterior_sample(&sampler, &g.evidence, &sweep, &mut streams.rng(k as u64, 0));
        let rec = g.reconstruct(&x)?;
        let same = rec.iter().zip(&truth.x).filter(|(a, b)| a == b).count();
        agreement.push(same as f64 / truth.x.len() as f64);
        w_rows.extend(g.decode(&x).0.into_iter().map(u16::from));
    }
    out.time("sample", t0.elapsed());
    for (name, data) in deconv_truth_files(&truth)? {
        out.bytes(&format!("truth/{name}"), data);
    }
    let rows = agreement.len();
    out.bytes(
        "posterior_w.pmps",
        write_samples(&SampleSet::new(rows, shape.w_len(), w_rows, "posterior_w")?),
    );
    out.csv(
        "agreement.csv",
        &["sample", "pixel_agreement"],
        agreement.iter().enumerate().map(|(k, a)| [k.to_string(), a.to_string()]),
    )?;
    Ok(DeconvReport {
        latent_variables: shape.latent_count(),
        graph_variables: g.graph.num_vars(),
        min_agreement: agreement.iter().copied().fold(f64::INFINITY, f64::min),
        pixel_agreement: agreement,
        truncated,
    })
}
