//! Binary 2D convolution model: features `W` stamped at locations `S`
//! combine by OR into images `X`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{read_samples, write_samples, BinaryImageSet};
use crate::error::{Error, Result};
use crate::evaluation::SampleSet;
use crate::factor_graph::{Assignment, Evidence, FactorGraph, FactorKind};

/// Prior log-odds of every `W` and `S` entry.
pub const DEFAULT_PRIOR_LOG_ODDS: f64 = -3.0;

/// Dimensions of a deconvolution instance. Location `(a, b)` places the
/// feature's top-left pixel at image pixel `(a, b)`; stamps are cropped at
/// the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeconvShape {
    pub n_images: usize,
    pub n_feat: usize,
    pub feat_height: usize,
    pub feat_width: usize,
    pub loc_height: usize,
    pub loc_width: usize,
    pub height: usize,
    pub width: usize,
}

impl DeconvShape {
    /// Image size is the full convolution extent `loc + feat - 1`.
    pub fn full(n_images: usize, n_feat: usize, fh: usize, fw: usize, sh: usize, sw: usize) -> Self {
        Self {
            n_images,
            n_feat,
            feat_height: fh,
            feat_width: fw,
            loc_height: sh,
            loc_width: sw,
            height: sh + fh - 1,
            width: sw + fw - 1,
        }
    }

    pub fn w_len(&self) -> usize {
        self.n_feat * self.feat_height * self.feat_width
    }

    pub fn s_len(&self) -> usize {
        self.n_images * self.n_feat * self.loc_height * self.loc_width
    }

    pub fn x_len(&self) -> usize {
        self.n_images * self.height * self.width
    }

    /// Number of `W` and `S` entries.
    pub fn latent_count(&self) -> usize {
        self.w_len() + self.s_len()
    }

    pub fn w_index(&self, k: usize, u: usize, v: usize) -> usize {
        (k * self.feat_height + u) * self.feat_width + v
    }

    pub fn s_index(&self, n: usize, k: usize, a: usize, b: usize) -> usize {
        ((n * self.n_feat + k) * self.loc_height + a) * self.loc_width + b
    }

    pub fn x_index(&self, n: usize, r: usize, c: usize) -> usize {
        (n * self.height + r) * self.width + c
    }

    fn check(&self) -> Result<()> {
        let dims = [
            self.n_images,
            self.n_feat,
            self.feat_height,
            self.feat_width,
            self.loc_height,
            self.loc_width,
            self.height,
            self.width,
        ];
        if dims.contains(&0) {
            return Err(Error::structural(format!("deconvolution shape has a zero extent: {self:?}")));
        }
        Ok(())
    }
}

/// Generated `W`, `S` and the images they produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeconvTruth {
    pub shape: DeconvShape,
    pub w: Vec<u8>,
    pub s: Vec<u8>,
    pub x: Vec<u8>,
}

impl DeconvTruth {
    pub fn images(&self) -> BinaryImageSet {
        BinaryImageSet {
            count: self.shape.n_images,
            height: self.shape.height,
            width: self.shape.width,
            pixels: self.x.clone(),
            labels: None,
        }
    }
}

/// OR of every feature stamped at every active location.
pub fn forward_model(shape: &DeconvShape, w: &[u8], s: &[u8]) -> Result<Vec<u8>> {
    shape.check()?;
    if w.len() != shape.w_len() || s.len() != shape.s_len() {
        return Err(Error::structural("W or S length differs from the shape"));
    }
    let mut x = vec![0u8; shape.x_len()];
    for n in 0..shape.n_images {
        for k in 0..shape.n_feat {
            for a in 0..shape.loc_height {
                for b in 0..shape.loc_width {
                    if s[shape.s_index(n, k, a, b)] == 0 {
                        continue;
                    }
                    for u in 0..shape.feat_height.min(shape.height.saturating_sub(a)) {
                        for v in 0..shape.feat_width.min(shape.width.saturating_sub(b)) {
                            if w[shape.w_index(k, u, v)] != 0 {
                                x[shape.x_index(n, a + u, b + v)] = 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(x)
}

/// Samples `W` and `S` with independent Bernoulli entries; `h × w` is the
/// location grid, so images are `(h + fh - 1) × (w + fw - 1)`.
#[allow(clippy::too_many_arguments)]
pub fn gen_deconv_dataset(
    n_images: usize,
    n_feat: usize,
    fh: usize,
    fw: usize,
    h: usize,
    w: usize,
    feature_density: f64,
    location_density: f64,
    rng: &mut impl Rng,
) -> Result<DeconvTruth> {
    for d in [feature_density, location_density] {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::parameter(format!("density {d} is outside (0, 1)")));
        }
    }
    let shape = DeconvShape::full(n_images, n_feat, fh, fw, h, w);
    shape.check()?;
    let wv: Vec<u8> = (0..shape.w_len()).map(|_| rng.random_bool(feature_density) as u8).collect();
    let sv: Vec<u8> = (0..shape.s_len()).map(|_| rng.random_bool(location_density) as u8).collect();
    let x = forward_model(&shape, &wv, &sv)?;
    Ok(DeconvTruth { shape, w: wv, s: sv, x })
}

/// Posterior graph over `W` and `S` given clamped images.
#[derive(Debug, Clone)]
pub struct DeconvGraph {
    pub graph: FactorGraph,
    pub shape: DeconvShape,
    /// Pixel variables in image order.
    pub pixel_vars: Vec<usize>,
    pub evidence: Evidence,
}

impl DeconvGraph {
    pub fn w_var(&self, k: usize, u: usize, v: usize) -> usize {
        self.shape.w_index(k, u, v)
    }

    pub fn s_var(&self, n: usize, k: usize, a: usize, b: usize) -> usize {
        self.shape.w_len() + self.shape.s_index(n, k, a, b)
    }

    /// Splits an assignment into `(W, S)`.
    pub fn decode(&self, x: &Assignment) -> (Vec<u8>, Vec<u8>) {
        let nw = self.shape.w_len();
        let w = x[..nw].iter().map(|&v| v as u8).collect();
        let s = x[nw..nw + self.shape.s_len()].iter().map(|&v| v as u8).collect();
        (w, s)
    }

    /// Images produced by the decoded `W` and `S`.
    pub fn reconstruct(&self, x: &Assignment) -> Result<Vec<u8>> {
        let (w, s) = self.decode(x);
        forward_model(&self.shape, &w, &s)
    }
}

/// [`build_deconv_graph_with`] using the full-extent location grid and the
/// default priors.
pub fn build_deconv_graph(x: &BinaryImageSet, n_feat: usize, fh: usize, fw: usize) -> Result<DeconvGraph> {
    if fh > x.height || fw > x.width {
        return Err(Error::structural("feature larger than the images"));
    }
    let shape = DeconvShape {
        n_images: x.count,
        n_feat,
        feat_height: fh,
        feat_width: fw,
        loc_height: x.height - fh + 1,
        loc_width: x.width - fw + 1,
        height: x.height,
        width: x.width,
    };
    build_deconv_graph_with(x, shape, DEFAULT_PRIOR_LOG_ODDS, DEFAULT_PRIOR_LOG_ODDS)
}

/// Variables: `W` entries, `S` entries, then per pixel its AND nodes and the
/// pixel itself. Each AND node is `w(k,u,v) ∧ s(n,k,r-u,c-v)`; each pixel is
/// the OR of its AND nodes and is clamped to the observed value.
pub fn build_deconv_graph_with(x: &BinaryImageSet, shape: DeconvShape, prior_w: f64, prior_s: f64) -> Result<DeconvGraph> {
    shape.check()?;
    if x.count != shape.n_images || x.height != shape.height || x.width != shape.width {
        return Err(Error::structural("image stack does not match the deconvolution shape"));
    }
    if x.pixels.iter().any(|&p| p > 1) {
        return Err(Error::structural("images must be binary"));
    }
    let contributors = |r: usize, c: usize| {
        let mut out = Vec::new();
        for k in 0..shape.n_feat {
            for u in 0..shape.feat_height.min(r + 1) {
                for v in 0..shape.feat_width.min(c + 1) {
                    let (a, b) = (r - u, c - v);
                    if a < shape.loc_height && b < shape.loc_width {
                        out.push((k, u, v, a, b));
                    }
                }
            }
        }
        out
    };
    let per_pixel: Vec<usize> = (0..shape.height * shape.width)
        .map(|p| contributors(p / shape.width, p % shape.width).len())
        .collect();
    let ands_per_image: usize = per_pixel.iter().sum();
    let latent = shape.latent_count();
    let total = latent + shape.n_images * (ands_per_image + shape.height * shape.width);
    let mut graph = FactorGraph::binary(total);
    for v in 0..shape.w_len() {
        graph.set_unary(v, &[0.0, prior_w])?;
    }
    for v in shape.w_len()..latent {
        graph.set_unary(v, &[0.0, prior_s])?;
    }
    let mut next = latent;
    let mut pixel_vars = Vec::with_capacity(shape.x_len());
    let mut observed = Vec::with_capacity(shape.x_len());
    for n in 0..shape.n_images {
        for r in 0..shape.height {
            for c in 0..shape.width {
                let mut tops = Vec::new();
                for (k, u, v, a, b) in contributors(r, c) {
                    let node = next;
                    next += 1;
                    let wv = shape.w_index(k, u, v);
                    let sv = shape.w_len() + shape.s_index(n, k, a, b);
                    graph.add_factor(vec![wv, sv, node], FactorKind::And)?;
                    tops.push(node);
                }
                let pixel = next;
                next += 1;
                let value = x.pixels[shape.x_index(n, r, c)] as usize;
                if tops.is_empty() {
                    if value == 1 {
                        return Err(Error::Capacity {
                            what: format!("pixel ({n}, {r}, {c}) is on but no placement covers it"),
                            required: 1,
                            budget: 0,
                        });
                    }
                } else {
                    tops.push(pixel);
                    graph.add_factor(tops, FactorKind::Or)?;
                }
                pixel_vars.push(pixel);
                observed.push((pixel, value));
            }
        }
    }
    debug_assert_eq!(next, total);
    let evidence = Evidence::from_pairs(observed);
    graph.clamp_in_place(&evidence)?;
    Ok(DeconvGraph {
        graph,
        shape,
        pixel_vars,
        evidence,
    })
}

fn stack(values: &[u8], rows: usize, label: &str) -> Result<SampleSet> {
    SampleSet::new(rows, values.len() / rows.max(1), values.iter().map(|&v| v as u16).collect(), label)
}

/// Encoded truth files: `truth.json` (shape), `w.pmps`, `s.pmps`, `x.pmps`.
pub fn deconv_truth_files(truth: &DeconvTruth) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let sh = &truth.shape;
    Ok(vec![
        ("truth.json", serde_json::to_vec_pretty(&truth.shape)?),
        ("w.pmps", write_samples(&stack(&truth.w, sh.n_feat, "w")?)),
        ("s.pmps", write_samples(&stack(&truth.s, sh.n_images, "s")?)),
        ("x.pmps", write_samples(&stack(&truth.x, sh.n_images, "x")?)),
    ])
}

/// Writes [`deconv_truth_files`] into `dir`.
pub fn save_deconv_truth(dir: &Path, truth: &DeconvTruth) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, data) in deconv_truth_files(truth)? {
        std::fs::write(dir.join(name), data)?;
    }
    Ok(())
}

pub fn load_deconv_truth(dir: &Path) -> Result<DeconvTruth> {
    let shape: DeconvShape = serde_json::from_str(&std::fs::read_to_string(dir.join("truth.json"))?)?;
    let load = |name: &str, len: usize| -> Result<Vec<u8>> {
        let s = read_samples(&std::fs::read(dir.join(name))?, name)?;
        if s.values().len() != len {
            return Err(Error::structural(format!("{name} holds {} values, expected {len}", s.values().len())));
        }
        Ok(s.values().iter().map(|&v| v as u8).collect())
    };
    Ok(DeconvTruth {
        shape,
        w: load("w.pmps", shape.w_len())?,
        s: load("s.pmps", shape.s_len())?,
        x: load("x.pmps", shape.x_len())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::AssignmentIter;
    use crate::max_product::SweepConfig;
    use crate::models::EnergyModel;
    use crate::rng::stream_rng;
    use crate::samplers::pmp_sample;

    #[test]
    fn empty_locations_give_empty_images() {
        let shape = DeconvShape::full(2, 2, 2, 2, 3, 3);
        let x = forward_model(&shape, &vec![1; shape.w_len()], &vec![0; shape.s_len()]).unwrap();
        assert!(x.iter().all(|&p| p == 0));
    }

    #[test]
    fn single_stamp() {
        let shape = DeconvShape::full(1, 1, 2, 2, 3, 3);
        let w = vec![1, 0, 1, 1];
        let mut s = vec![0; shape.s_len()];
        s[shape.s_index(0, 0, 1, 2)] = 1;
        let x = forward_model(&shape, &w, &s).unwrap();
        let mut expect = vec![0; 16];
        expect[4 + 2] = 1;
        expect[8 + 2] = 1;
        expect[8 + 3] = 1;
        assert_eq!(x, expect);
    }

    #[test]
    fn full_scale_shapes() {
        let shape = DeconvShape::full(100, 4, 5, 5, 9, 9);
        assert_eq!((shape.height, shape.width), (13, 13));
        let inference = DeconvShape {
            n_feat: 5,
            feat_height: 6,
            feat_width: 6,
            ..shape
        };
        assert_eq!(inference.latent_count(), 40680);
    }

    #[test]
    fn generation_is_reproducible() {
        let t = gen_deconv_dataset(5, 3, 3, 3, 10, 10, 0.4, 0.02, &mut stream_rng(3, 0, 0)).unwrap();
        assert_eq!(forward_model(&t.shape, &t.w, &t.s).unwrap(), t.x);
        let u = gen_deconv_dataset(5, 3, 3, 3, 10, 10, 0.4, 0.02, &mut stream_rng(3, 0, 0)).unwrap();
        assert_eq!(t, u);
        assert!(gen_deconv_dataset(1, 1, 1, 1, 1, 1, 1.0, 0.5, &mut stream_rng(3, 0, 0)).is_err());
    }

    #[test]
    fn truth_persistence_round_trip() {
        let dir = std::env::temp_dir().join(format!("pmp-deconv-{}", std::process::id()));
        let t = gen_deconv_dataset(3, 2, 2, 2, 4, 4, 0.5, 0.2, &mut stream_rng(4, 0, 0)).unwrap();
        save_deconv_truth(&dir, &t).unwrap();
        assert_eq!(load_deconv_truth(&dir).unwrap(), t);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    fn image(pixels: Vec<u8>, h: usize, w: usize) -> BinaryImageSet {
        BinaryImageSet {
            count: pixels.len() / (h * w),
            height: h,
            width: w,
            pixels,
            labels: None,
        }
    }

    #[test]
    fn minimal_instance_forces_both_on() {
        let g = build_deconv_graph(&image(vec![1], 1, 1), 1, 1, 1).unwrap();
        assert_eq!(g.graph.num_vars(), 4);
        assert_eq!(g.shape.latent_count(), 2);
        let mut rng = stream_rng(5, 0, 0);
        let sampler = g.graph.sampler().unwrap();
        for _ in 0..20 {
            let x = pmp_sample(&sampler, &SweepConfig::new(0.5, 20).unwrap(), &mut rng);
            assert_eq!(&x[..2], &[1, 1]);
        }
    }

    #[test]
    fn uncovered_lit_pixel_is_infeasible() {
        let x = image(vec![0, 0, 0, 1], 2, 2);
        let shape = DeconvShape {
            n_images: 1,
            n_feat: 1,
            feat_height: 1,
            feat_width: 1,
            loc_height: 1,
            loc_width: 1,
            height: 2,
            width: 2,
        };
        assert!(matches!(build_deconv_graph_with(&x, shape, -3.0, -3.0), Err(Error::Capacity { .. })));
        let ok = image(vec![1, 0, 0, 0], 2, 2);
        build_deconv_graph_with(&ok, shape, -3.0, -3.0).unwrap();
    }

    #[test]
    fn best_assignments_satisfy_forward_model() {
        // 1 image 3×3, one 2×2 feature, 2×2 locations: 8 latent bits.
        let t = DeconvTruth {
            shape: DeconvShape::full(1, 1, 2, 2, 2, 2),
            w: vec![1, 1, 0, 1],
            s: vec![1, 0, 0, 1],
            x: vec![],
        };
        let x = forward_model(&t.shape, &t.w, &t.s).unwrap();
        let g = build_deconv_graph(&image(x.clone(), 3, 3), 1, 2, 2).unwrap();
        // Enumerate latent bits; auxiliary variables follow deterministically.
        let mut best = f64::NEG_INFINITY;
        let mut feasible = Vec::new();
        for bits in AssignmentIter::new(&[2; 8]) {
            let w: Vec<u8> = bits[..4].iter().map(|&b| b as u8).collect();
            let s: Vec<u8> = bits[4..].iter().map(|&b| b as u8).collect();
            let full = complete(&g, &w, &s);
            let score = g.graph.log_score(&full);
            if score > best + 1e-9 {
                best = score;
                feasible.clear();
            }
            if (score - best).abs() <= 1e-9 {
                feasible.push(full);
            }
        }
        assert!(best > -1e29);
        for a in &feasible {
            assert_eq!(g.reconstruct(&Assignment(a.clone())).unwrap(), x);
        }
        // PMP posterior samples reproduce the images exactly.
        let sampler = g.graph.sampler().unwrap();
        let mut rng = stream_rng(6, 0, 0);
        for _ in 0..50 {
            let y = pmp_sample(&sampler, &SweepConfig::new(0.5, 100).unwrap(), &mut rng);
            assert_eq!(g.reconstruct(&y).unwrap(), x);
        }
    }

    /// Fills the AND and pixel variables implied by `(W, S)`.
    fn complete(g: &DeconvGraph, w: &[u8], s: &[u8]) -> Vec<usize> {
        let mut full = vec![0usize; g.graph.num_vars()];
        for (k, &v) in w.iter().chain(s).enumerate() {
            full[k] = v as usize;
        }
        for f in g.graph.factors() {
            if matches!(f.kind, FactorKind::And) {
                full[f.neighbors[2]] = full[f.neighbors[0]] & full[f.neighbors[1]];
            }
        }
        for f in g.graph.factors() {
            if matches!(f.kind, FactorKind::Or) {
                let (tops, bottom) = f.neighbors.split_at(f.neighbors.len() - 1);
                full[bottom[0]] = tops.iter().any(|&t| full[t] == 1) as usize;
            }
        }
        full
    }
}
