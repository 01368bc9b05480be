//! Dataset ingestion, synthetic generators and binary persistence.

mod deconv;

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::Rng;

use crate::error::{Error, Result};
use crate::evaluation::SampleSet;

pub use deconv::{
    build_deconv_graph, build_deconv_graph_with, deconv_truth_files, forward_model, gen_deconv_dataset, load_deconv_truth,
    save_deconv_truth, DeconvGraph, DeconvShape, DeconvTruth, DEFAULT_PRIOR_LOG_ODDS,
};

const IDX_U8: u8 = 0x08;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Unsigned-byte IDX tensor in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::structural(format!("dims {dims:?} need {len} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

/// Parses an IDX file holding unsigned bytes; gzip input is inflated first.
pub fn read_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut raw = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut raw)
            .map_err(|e| parse_err(0, format!("gzip: {e}")))?;
        return read_idx(&raw);
    }
    if bytes.len() < 4 {
        return Err(parse_err(bytes.len(), format!("header needs 4 bytes, found {}", bytes.len())));
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != IDX_U8 || bytes[3] == 0 {
        return Err(parse_err(
            0,
            format!("bad magic {:02x}{:02x}{:02x}{:02x}", bytes[0], bytes[1], bytes[2], bytes[3]),
        ));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(parse_err(bytes.len(), format!("header needs {header} bytes, found {}", bytes.len())));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|k| u32::from_be_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize)
        .collect();
    let len = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| parse_err(4, "dimension product overflows"))?;
    let payload = &bytes[header..];
    if payload.len() != len {
        return Err(parse_err(
            header + payload.len().min(len),
            format!("payload expected {len} bytes, found {}", payload.len()),
        ));
    }
    Ok(IdxArray {
        dims,
        data: payload.to_vec(),
    })
}

pub fn read_idx_file(path: &Path) -> Result<IdxArray> {
    read_idx(&std::fs::read(path)?)
}

/// Encodes an unsigned-byte IDX file (uncompressed).
pub fn write_idx(arr: &IdxArray) -> Vec<u8> {
    let mut out = vec![0, 0, IDX_U8, arr.dims.len() as u8];
    for &d in &arr.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&arr.data);
    out
}

/// Stack of equally sized binary images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImageSet {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    /// `count × height × width`, entries in `{0, 1}`.
    pub pixels: Vec<u8>,
    pub labels: Option<Vec<u8>>,
}

impl BinaryImageSet {
    pub fn image(&self, k: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.pixels[k * n..(k + 1) * n]
    }

    pub fn to_samples(&self, label: &str) -> Result<SampleSet> {
        SampleSet::new(
            self.count,
            self.height * self.width,
            self.pixels.iter().map(|&p| p as u16).collect(),
            label,
        )
    }
}

/// Pixels that are on and have an off 4-neighbour; the frame counts as off.
pub fn contour(on: &[bool], height: usize, width: usize) -> Vec<u8> {
    let at = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width && on[r as usize * width + c as usize]
    };
    let mut out = vec![0u8; height * width];
    for r in 0..height as isize {
        for c in 0..width as isize {
            if at(r, c) && (!at(r - 1, c) || !at(r + 1, c) || !at(r, c - 1) || !at(r, c + 1)) {
                out[r as usize * width + c as usize] = 1;
            }
        }
    }
    out
}

/// Contours of the images labelled 0, binarized at intensity 128.
pub fn extract_zero_contours(images: &IdxArray, labels: &IdxArray) -> Result<BinaryImageSet> {
    if images.dims.len() != 3 || labels.dims.len() != 1 || labels.dims[0] != images.dims[0] {
        return Err(Error::structural("expected count×height×width images and matching labels"));
    }
    let (h, w) = (images.dims[1], images.dims[2]);
    let mut pixels = Vec::new();
    let mut count = 0;
    for (k, &label) in labels.data.iter().enumerate() {
        if label != 0 {
            continue;
        }
        let img = &images.data[k * h * w..(k + 1) * h * w];
        let on: Vec<bool> = img.iter().map(|&p| p >= 128).collect();
        pixels.extend(contour(&on, h, w));
        count += 1;
    }
    Ok(BinaryImageSet {
        count,
        height: h,
        width: w,
        pixels,
        labels: Some(vec![0; count]),
    })
}

/// Outlines of random filled ellipses on a `side × side` grid.
pub fn synthetic_contours(count: usize, side: usize, rng: &mut impl Rng) -> BinaryImageSet {
    let s = side as f64;
    let mut pixels = Vec::with_capacity(count * side * side);
    for _ in 0..count {
        let cy = rng.random_range(0.35 * s..0.65 * s);
        let cx = rng.random_range(0.35 * s..0.65 * s);
        let ry = rng.random_range(0.2 * s..0.4 * s);
        let rx = rng.random_range(0.15 * s..0.35 * s);
        let on: Vec<bool> = (0..side * side)
            .map(|k| {
                let (r, c) = ((k / side) as f64 + 0.5, (k % side) as f64 + 0.5);
                ((r - cy) / ry).powi(2) + ((c - cx) / rx).powi(2) <= 1.0
            })
            .collect();
        pixels.extend(contour(&on, side, side));
    }
    BinaryImageSet {
        count,
        height: side,
        width: side,
        pixels,
        labels: None,
    }
}

/// Horizontal or vertical stripe patterns: each line is on with probability
/// `density`, then every pixel flips with probability `noise`.
pub fn synthetic_stripes(count: usize, side: usize, density: f64, noise: f64, rng: &mut impl Rng) -> BinaryImageSet {
    let mut pixels = Vec::with_capacity(count * side * side);
    for _ in 0..count {
        let vertical = rng.random_bool(0.5);
        let lines: Vec<bool> = (0..side).map(|_| rng.random_bool(density)).collect();
        for r in 0..side {
            for c in 0..side {
                let on = if vertical { lines[c] } else { lines[r] };
                let flip = noise > 0.0 && rng.random_bool(noise);
                pixels.push((on ^ flip) as u8);
            }
        }
    }
    BinaryImageSet {
        count,
        height: side,
        width: side,
        pixels,
        labels: None,
    }
}

const SAMPLES_MAGIC: &[u8; 4] = b"PMPS";
const PARAMS_MAGIC: &[u8; 4] = b"PMPP";

/// Binary sample file: magic `PMPS`, value width in bytes (1 or 2), three
/// reserved zero bytes, `u64` rows, `u64` cols, little-endian payload.
pub fn write_samples(s: &SampleSet) -> Vec<u8> {
    let width: u8 = if s.values().iter().all(|&v| v <= u8::MAX as u16) { 1 } else { 2 };
    let mut out = Vec::with_capacity(24 + s.values().len() * width as usize);
    out.extend_from_slice(SAMPLES_MAGIC);
    out.extend_from_slice(&[width, 0, 0, 0]);
    out.extend_from_slice(&(s.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(s.cols() as u64).to_le_bytes());
    for &v in s.values() {
        if width == 1 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_samples(bytes: &[u8], label: &str) -> Result<SampleSet> {
    if bytes.len() < 24 {
        return Err(parse_err(bytes.len(), "sample header needs 24 bytes"));
    }
    if &bytes[..4] != SAMPLES_MAGIC {
        return Err(parse_err(0, "bad sample magic"));
    }
    let width = bytes[4] as usize;
    if width != 1 && width != 2 {
        return Err(parse_err(4, format!("unsupported value width {width}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| parse_err(8, "sample shape overflows"))?;
    let payload = &bytes[24..];
    if payload.len() != n {
        return Err(parse_err(24, format!("payload expected {n} bytes, found {}", payload.len())));
    }
    let values = if width == 1 {
        payload.iter().map(|&b| b as u16).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
    };
    SampleSet::new(rows, cols, values, label)
}

/// Parameter blob: magic `PMPP`, `u64` count, little-endian `f64` values.
pub fn write_params(theta: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * theta.len());
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&(theta.len() as u64).to_le_bytes());
    for v in theta {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_params(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 12 || &bytes[..4] != PARAMS_MAGIC {
        return Err(parse_err(0, "bad parameter header"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let payload = &bytes[12..];
    if Some(payload.len()) != n.checked_mul(8) {
        return Err(parse_err(12, format!("payload expected {} values, found {} bytes", n, payload.len())));
    }
    Ok(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use flate2::{write::GzEncoder, Compression};
    use std::io::Write;

    #[test]
    fn idx_minimal_and_matrix() {
        let one = [0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 200];
        let a = read_idx(&one).unwrap();
        assert_eq!(a.dims, vec![1, 1, 1]);
        assert_eq!(a.data, vec![200]);
        let m = [0, 0, 8, 2, 0, 0, 0, 2, 0, 0, 0, 3, 1, 2, 3, 4, 5, 6];
        let a = read_idx(&m).unwrap();
        assert_eq!(a.dims, vec![2, 3]);
        assert_eq!(a.data, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(write_idx(&a), m.to_vec());
    }

    #[test]
    fn idx_errors() {
        let short = [0, 0, 8, 2, 0, 0, 0, 2, 0, 0, 0, 3, 1, 2];
        match read_idx(&short) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 14);
                assert!(message.contains("expected 6") && message.contains("found 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_idx(&[0, 0, 9, 1, 0, 0, 0, 0]), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(read_idx(&[0, 0, 8]), Err(Error::Parse { .. })));
        let long = [0, 0, 8, 1, 0, 0, 0, 1, 7, 7];
        assert!(read_idx(&long).is_err());
    }

    #[test]
    fn idx_gzip_round_trip() {
        let a = IdxArray::new(vec![2, 2, 3], (0..12).collect()).unwrap();
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&write_idx(&a)).unwrap();
        assert_eq!(read_idx(&enc.finish().unwrap()).unwrap(), a);
    }

    #[test]
    fn contour_rules() {
        assert!(contour(&[false; 25], 5, 5).iter().all(|&p| p == 0));
        let mut block = vec![false; 25];
        for r in 1..4 {
            for c in 1..4 {
                block[r * 5 + c] = true;
            }
        }
        let ring = contour(&block, 5, 5);
        assert_eq!(ring.iter().map(|&p| p as usize).sum::<usize>(), 8);
        assert_eq!(ring[12], 0);
        let full = contour(&[true; 20], 4, 5);
        for r in 0..4 {
            for c in 0..5 {
                let border = r == 0 || c == 0 || r == 3 || c == 4;
                assert_eq!(full[r * 5 + c] == 1, border);
            }
        }
    }

    #[test]
    fn zero_contours_filter_labels() {
        let mut data = vec![0u8; 3 * 9];
        data[4] = 255;
        data[9 + 4] = 255;
        data[18..27].fill(130);
        let images = IdxArray::new(vec![3, 3, 3], data).unwrap();
        let labels = IdxArray::new(vec![3], vec![0, 7, 0]).unwrap();
        let set = extract_zero_contours(&images, &labels).unwrap();
        assert_eq!(set.count, 2);
        assert_eq!(set.image(0), &[0, 0, 0, 0, 1, 0, 0, 0, 0]);
        assert_eq!(set.image(1), &[1, 1, 1, 1, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn synthetic_sets_are_binary() {
        let mut rng = stream_rng(1, 0, 0);
        let c = synthetic_contours(10, 10, &mut rng);
        assert!(c.pixels.iter().all(|&p| p <= 1));
        assert!((0..10).all(|k| c.image(k).iter().any(|&p| p == 1)));
        let s = synthetic_stripes(10, 8, 0.5, 0.0, &mut rng);
        for k in 0..10 {
            let img = s.image(k);
            let rows_const = (0..8).all(|r| img[r * 8..r * 8 + 8].iter().all(|&p| p == img[r * 8]));
            let cols_const = (0..8).all(|c| (0..8).all(|r| img[r * 8 + c] == img[c]));
            assert!(rows_const || cols_const);
        }
    }

    #[test]
    fn sample_and_param_round_trips() {
        let s = SampleSet::new(2, 3, vec![0, 1, 1, 0, 0, 1], "x").unwrap();
        let bytes = write_samples(&s);
        assert_eq!(&bytes[..8], b"PMPS\x01\0\0\0");
        assert_eq!(bytes.len(), 30);
        assert_eq!(read_samples(&bytes, "x").unwrap(), s);
        let wide = SampleSet::new(1, 2, vec![300, 2], "y").unwrap();
        assert_eq!(read_samples(&write_samples(&wide), "y").unwrap(), wide);
        assert!(read_samples(&bytes[..29], "x").is_err());
        let theta = vec![0.25, -1e-300, f64::MAX];
        assert_eq!(read_params(&write_params(&theta)).unwrap(), theta);
    }
}
