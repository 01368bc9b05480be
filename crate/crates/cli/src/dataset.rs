//! Dataset selection for the learning experiments.

use std::path::{Path, PathBuf};

use pmp_core::data_io::{extract_zero_contours, read_idx_file, synthetic_contours, synthetic_stripes, BinaryImageSet};
use pmp_core::evaluation::{exact_distribution, SampleSet};
use pmp_core::factor_graph::AssignmentIter;
use pmp_core::models::IsingModel;
use pmp_core::rng::stream_rng;
use pmp_core::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Environment variable naming the directory that holds MNIST IDX files.
pub const DATA_DIR_ENV: &str = "PMP_DATA_DIR";

const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
const MNIST_LABELS: &str = "train-labels-idx1-ubyte";

const STREAM_DATA: u64 = 101;
const STREAM_SPLIT: u64 = 102;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Dataset {
    /// Outlines of random ellipses.
    Contours { count: usize, side: usize },
    /// Horizontal or vertical stripes with pixel-flip noise.
    Stripes { count: usize, side: usize, density: f64, noise: f64 },
    /// Exact samples from a random fully connected `{0,1}` Ising model.
    IsingSamples { count: usize, n: usize, w_range: f64, b_range: f64 },
    /// Contours of the MNIST zeros; `dir` defaults to `$PMP_DATA_DIR`.
    MnistZeros { dir: Option<PathBuf> },
}

fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
}

impl Dataset {
    fn mnist_dir(dir: &Option<PathBuf>) -> Result<PathBuf> {
        dir.clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .ok_or_else(|| Error::Parameter(format!("MNIST needs a directory; set {DATA_DIR_ENV}")))
    }

    pub fn input_files(&self) -> Vec<PathBuf> {
        match self {
            Dataset::MnistZeros { dir } => match Self::mnist_dir(dir) {
                Ok(d) => [MNIST_IMAGES, MNIST_LABELS].iter().filter_map(|s| find(&d, s)).collect(),
                Err(_) => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// Rows are flattened images (or raw samples), one column per variable.
    pub fn load(&self, seed: u64) -> Result<SampleSet> {
        let mut rng = stream_rng(seed, STREAM_DATA, 0);
        let images: BinaryImageSet = match self {
            Dataset::Contours { count, side } => synthetic_contours(*count, *side, &mut rng),
            Dataset::Stripes { count, side, density, noise } => synthetic_stripes(*count, *side, *density, *noise, &mut rng),
            Dataset::IsingSamples { count, n, w_range, b_range } => {
                let model = IsingModel::random(*n, *w_range, *b_range, &mut rng);
                let p = exact_distribution(&model)?;
                let states: Vec<Vec<usize>> = AssignmentIter::new(&vec![2; *n]).collect();
                let mut cdf = Vec::with_capacity(p.len());
                let mut acc = 0.0;
                for q in &p {
                    acc += q;
                    cdf.push(acc);
                }
                let mut values = Vec::with_capacity(count * n);
                for _ in 0..*count {
                    let u = rng.random::<f64>() * acc;
                    let k = cdf.partition_point(|&c| c <= u).min(p.len() - 1);
                    values.extend(states[k].iter().map(|&s| s as u16));
                }
                return SampleSet::new(*count, *n, values, "data");
            }
            Dataset::MnistZeros { dir } => {
                let d = Self::mnist_dir(dir)?;
                let path = |stem: &str| {
                    find(&d, stem).ok_or_else(|| Error::Parameter(format!("{stem} not found in {}", d.display())))
                };
                let images = read_idx_file(&path(MNIST_IMAGES)?)?;
                let labels = read_idx_file(&path(MNIST_LABELS)?)?;
                extract_zero_contours(&images, &labels)?
            }
        };
        images.to_samples("data")
    }
}

/// Shuffles rows with a fixed stream and holds out `fraction` of them.
pub fn split(data: &SampleSet, fraction: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Parameter(format!("held-out fraction {fraction} is outside [0, 1)")));
    }
    let mut idx: Vec<usize> = (0..data.rows()).collect();
    idx.shuffle(&mut stream_rng(seed, STREAM_SPLIT, 0));
    let n_test = ((data.rows() as f64) * fraction).round() as usize;
    let take = |rows: &[usize], label: &str| {
        let values = rows.iter().flat_map(|&r| data.row(r).iter().copied()).collect();
        SampleSet::new(rows.len(), data.cols(), values, label)
    };
    Ok((take(&idx[n_test..], "train")?, take(&idx[..n_test], "test")?))
}
