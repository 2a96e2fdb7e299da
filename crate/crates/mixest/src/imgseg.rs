//! Channel-wise image segmentation with two-component normal mixtures.
//!
//! Pixel intensities live in `[0, 1]`, which a normal mixture fits badly;
//! each channel is therefore mapped through
//! `y = Phi^{-1}((x + 1/N) / (1 + 2/N))` (`N` = pixel count) before
//! fitting. Pixels are assigned by the maximum-posterior rule, each
//! channel is re-drawn with the mean original intensity of its cluster,
//! and the three binary channel labels combine into at most eight refined
//! clusters for the recolored RGB image.
//!
//! Interchange formats are deliberately plain: binary PPM (P6, maxval
//! 255) for color images, binary PGM (P5) for label planes.

use std::io::Read;

use rand::Rng;
use serde::Serialize;

use crate::family::Family;
use crate::mixture::SortedSample;
use crate::mwde::{fit_mwde, FitReport, MwdeConfig};
use crate::pmle::{fit_pmle, PmleConfig};
use crate::rng::{derive_stream, stream_rng};
use crate::sim::Estimator;
use crate::{Error, Result};

const CHANNEL_NAMES: [&str; 3] = ["red", "green", "blue"];

/// An RGB image with intensities in `[0, 1]`, one plane per channel.
#[derive(Debug, Clone)]
pub struct ImageTensor {
    width: usize,
    height: usize,
    channels: [Vec<f64>; 3],
}

impl ImageTensor {
    pub fn new(width: usize, height: usize, channels: [Vec<f64>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image("image dimensions must be >= 1".into()));
        }
        for plane in &channels {
            if plane.len() != width * height {
                return Err(Error::Image(format!(
                    "plane has {} values, expected {}",
                    plane.len(),
                    width * height
                )));
            }
            if plane.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Image("intensity outside [0, 1]".into()));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    /// Parse binary PPM (P6, maxval 255); intensities map to `v / 255`.
    pub fn from_ppm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = HeaderCursor::new(bytes);
        let magic = cursor.token()?;
        if magic != b"P6" {
            return Err(Error::Image("expected P6 magic".into()));
        }
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if maxval != 255 {
            return Err(Error::Image(format!("expected maxval 255, got {maxval}")));
        }
        cursor.single_whitespace()?;
        let need = width * height * 3;
        let raster = cursor.rest();
        if raster.len() < need {
            return Err(Error::Image(format!(
                "raster has {} bytes, expected {need}",
                raster.len()
            )));
        }
        let mut channels = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for px in raster[..need].chunks_exact(3) {
            for c in 0..3 {
                channels[c].push(px[c] as f64 / 255.0);
            }
        }
        ImageTensor::new(width, height, channels)
    }

    pub fn from_ppm_reader<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_ppm_bytes(&bytes)
    }

    /// Encode as binary PPM (P6, maxval 255).
    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for i in 0..self.n_pixels() {
            for c in 0..3 {
                out.push(quantize(self.channels[c][i]));
            }
        }
        out
    }
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Minimal PNM header scanner: whitespace-separated tokens with `#`
/// comments running to end of line.
struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Image("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image("bad number in header".into()))
    }

    /// The single whitespace byte separating the header from the raster.
    fn single_whitespace(&mut self) -> Result<()> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Image("missing raster separator".into()))
        }
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

/// Encode a binary label plane (values in {1, 2}) as PGM P5:
/// cluster 1 maps to 0, cluster 2 to 255.
pub fn labels_to_pgm_bytes(labels: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(labels.iter().map(|&l| if l <= 1 { 0u8 } else { 255u8 }));
    out
}

/// Encode one gray plane (intensities in `[0, 1]`) as PPM P6.
pub fn gray_to_ppm_bytes(plane: &[f64], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for &v in plane {
        let q = quantize(v);
        out.extend_from_slice(&[q, q, q]);
    }
    out
}

/// Encode per-pixel RGB triplets as PPM P6.
pub fn rgb_to_ppm_bytes(pixels: &[[f64; 3]], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in pixels {
        out.extend_from_slice(&[quantize(px[0]), quantize(px[1]), quantize(px[2])]);
    }
    out
}

/// Map an intensity into normal-mixture territory:
/// `Phi^{-1}((x + 1/N) / (1 + 2/N))`. The affine squeeze keeps the
/// argument strictly inside (0, 1), so the result is always finite; the
/// map is strictly increasing in `x`.
pub fn transform_intensity(x: f64, n_pixels: usize) -> f64 {
    let n = n_pixels as f64;
    Family::Normal.quantile((x + 1.0 / n) / (1.0 + 2.0 / n))
}

/// One channel's fit and clustering.
#[derive(Debug, Clone)]
pub struct ChannelSegmentation {
    /// The two-component fit on transformed intensities; `None` when the
    /// channel fell back to a single cluster.
    pub fit: Option<FitReport>,
    /// Per-pixel cluster labels in {1, 2} (all 1 on fallback).
    pub labels: Vec<u8>,
    /// Per-pixel mean original intensity of the pixel's cluster.
    pub recolored: Vec<f64>,
    /// Set when the fit failed or the channel was degenerate.
    pub fallback: bool,
}

/// Segmentation under one estimator.
#[derive(Debug, Clone)]
pub struct EstimatorSegmentation {
    pub estimator: Estimator,
    pub channels: [ChannelSegmentation; 3],
    /// Per-pixel mean RGB of the pixel's 3-bit refined cluster.
    pub combined: Vec<[f64; 3]>,
}

/// Full segmentation result across the requested estimators.
#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub width: usize,
    pub height: usize,
    pub runs: Vec<EstimatorSegmentation>,
}

/// Segmentation knobs; fits otherwise use the estimator defaults
/// (multi-start, `a_N = N^{-1/2}`).
#[derive(Debug, Clone)]
pub struct SegmentConfig {
    pub seed: u64,
    pub n_starts: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_starts: 4,
        }
    }
}

/// Segment an image channel-by-channel under each estimator.
///
/// Each channel gets an independent two-component normal fit on its
/// transformed intensities. A channel whose fit fails (constant values,
/// optimizer failure) falls back to a single cluster and is flagged.
pub fn segment(
    image: &ImageTensor,
    estimators: &[Estimator],
    config: &SegmentConfig,
) -> Result<SegmentationResult> {
    if estimators.is_empty() {
        return Err(Error::InvalidParameter("no estimators selected".into()));
    }
    let n = image.n_pixels();
    let transformed: [Vec<f64>; 3] = std::array::from_fn(|c| {
        image
            .channel(c)
            .iter()
            .map(|&x| transform_intensity(x, n))
            .collect()
    });

    let mut runs = Vec::with_capacity(estimators.len());
    for &estimator in estimators {
        let channels: [ChannelSegmentation; 3] = std::array::from_fn(|c| {
            segment_channel(image.channel(c), &transformed[c], estimator, config, c)
        });
        let combined = combine_clusters(image, &channels);
        runs.push(EstimatorSegmentation {
            estimator,
            channels,
            combined,
        });
    }
    Ok(SegmentationResult {
        width: image.width,
        height: image.height,
        runs,
    })
}

fn segment_channel(
    original: &[f64],
    transformed: &[f64],
    estimator: Estimator,
    config: &SegmentConfig,
    channel: usize,
) -> ChannelSegmentation {
    let fit = SortedSample::new(transformed).ok().and_then(|sample| {
        let seed = derive_stream(&[0x0053_4547, config.seed, channel as u64]);
        match estimator {
            Estimator::Mwde => fit_mwde(
                &sample,
                Family::Normal,
                2,
                &MwdeConfig {
                    n_starts: config.n_starts,
                    seed,
                    ..MwdeConfig::default()
                },
            )
            .ok(),
            Estimator::Pmle => fit_pmle(
                &sample,
                Family::Normal,
                2,
                &PmleConfig {
                    n_starts: config.n_starts,
                    seed,
                    ..PmleConfig::default()
                },
            )
            .ok(),
        }
    });

    match fit {
        Some(report) => {
            let labels: Vec<u8> = transformed
                .iter()
                .map(|&y| report.g_hat.classify(Family::Normal, y) as u8 + 1)
                .collect();
            let recolored = recolor(original, &labels);
            ChannelSegmentation {
                fit: Some(report),
                labels,
                recolored,
                fallback: false,
            }
        }
        None => ChannelSegmentation {
            fit: None,
            labels: vec![1; original.len()],
            recolored: recolor(original, &vec![1; original.len()]),
            fallback: true,
        },
    }
}

/// Replace each pixel by the mean original intensity of its cluster.
fn recolor(original: &[f64], labels: &[u8]) -> Vec<f64> {
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for (&x, &l) in original.iter().zip(labels) {
        sums[l as usize] += x;
        counts[l as usize] += 1;
    }
    let means: Vec<f64> = (0..3)
        .map(|l| {
            if counts[l] > 0 {
                sums[l] / counts[l] as f64
            } else {
                0.0
            }
        })
        .collect();
    labels.iter().map(|&l| means[l as usize]).collect()
}

/// Combine the three binary channel labels into 3-bit refined clusters and
/// paint each pixel with its cluster's mean RGB triplet.
fn combine_clusters(image: &ImageTensor, channels: &[ChannelSegmentation; 3]) -> Vec<[f64; 3]> {
    let n = image.n_pixels();
    let mut sums = [[0.0f64; 3]; 8];
    let mut counts = [0usize; 8];
    let cluster_of = |i: usize| -> usize {
        (((channels[0].labels[i] - 1) as usize) << 2)
            | (((channels[1].labels[i] - 1) as usize) << 1)
            | ((channels[2].labels[i] - 1) as usize)
    };
    for i in 0..n {
        let c = cluster_of(i);
        counts[c] += 1;
        for ch in 0..3 {
            sums[c][ch] += image.channel(ch)[i];
        }
    }
    let means: Vec<[f64; 3]> = (0..8)
        .map(|c| {
            if counts[c] == 0 {
                [0.0; 3]
            } else {
                std::array::from_fn(|ch| sums[c][ch] / counts[c] as f64)
            }
        })
        .collect();
    (0..n).map(|i| means[cluster_of(i)]).collect()
}

/// One row of the per-channel parameter table (components ordered by
/// ascending location, weights first).
#[derive(Debug, Clone, Serialize)]
pub struct ParamRow {
    pub channel: String,
    pub estimator: Estimator,
    pub w1: f64,
    pub w2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Parameter table rows for every successfully fitted channel.
pub fn parameter_table(result: &SegmentationResult) -> Vec<ParamRow> {
    let mut rows = Vec::new();
    for run in &result.runs {
        for (c, channel) in run.channels.iter().enumerate() {
            if let Some(report) = &channel.fit {
                let g = &report.g_hat;
                rows.push(ParamRow {
                    channel: CHANNEL_NAMES[c].to_string(),
                    estimator: run.estimator,
                    w1: g.weights()[0],
                    w2: g.weights()[1],
                    mu1: g.locations()[0],
                    mu2: g.locations()[1],
                    sigma1: g.scales()[0],
                    sigma2: g.scales()[1],
                });
            }
        }
    }
    rows
}

/// Histogram of transformed intensities, for external plotting.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramRow {
    pub channel: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

pub fn transformed_histograms(image: &ImageTensor, bins: usize) -> Vec<HistogramRow> {
    let n = image.n_pixels();
    let mut rows = Vec::new();
    for c in 0..3 {
        let ys: Vec<f64> = image
            .channel(c)
            .iter()
            .map(|&x| transform_intensity(x, n))
            .collect();
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        let mut counts = vec![0usize; bins];
        for &y in &ys {
            let b = (((y - lo) / span) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        for (b, &count) in counts.iter().enumerate() {
            rows.push(HistogramRow {
                channel: CHANNEL_NAMES[c].to_string(),
                bin_lo: lo + span * b as f64 / bins as f64,
                bin_hi: lo + span * (b + 1) as f64 / bins as f64,
                count,
            });
        }
    }
    rows
}

/// Synthetic two-region fixture: left half at `left`, right half at
/// `right`, all three channels, with small uniform dither so the fits are
/// nondegenerate. Dither is seeded and clamped to keep intensities valid.
pub fn synthetic_half_split(
    width: usize,
    height: usize,
    left: f64,
    right: f64,
    dither: f64,
    seed: u64,
) -> Result<ImageTensor> {
    let mut rng = stream_rng(seed, 0x494d47);
    let mut channels: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(width * height));
    for _y in 0..height {
        for x in 0..width {
            let base = if x < width / 2 { left } else { right };
            for plane in channels.iter_mut() {
                let noise = rng.random_range(-dither..=dither);
                plane.push((base + noise).clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(width, height, channels)
}

/// Ground-truth half-split labels (1 left, 2 right) for the fixture.
pub fn half_split_labels(width: usize, height: usize) -> Vec<usize> {
    let mut labels = Vec::with_capacity(width * height);
    for _y in 0..height {
        for x in 0..width {
            labels.push(if x < width / 2 { 1 } else { 2 });
        }
    }
    labels
}
