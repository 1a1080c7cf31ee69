//! Burst merging: backwarp every frame onto the reference, weight each
//! frame per pixel by a softmax over its pooled residual against the
//! reference, and take the weighted sum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{backwarp, FlowField};
use crate::imaging::sample::box_mean;
use crate::imaging::{ColorSpace, ImageBuffer, Tensor};
use crate::isp::{linear_to_srgb, srgb_to_linear, IspConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    /// Softmax temperature on squared residuals (intensity² units).
    pub tau: f64,
    /// Side of the residual pooling window; odd.
    pub patch: usize,
    pub use_flow_mag: bool,
    /// Logit penalty per pixel of flow magnitude when `use_flow_mag` is set.
    pub flow_penalty: f64,
    /// Merge in linear RGB instead of sRGB.
    pub linear: bool,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            tau: 0.01,
            patch: 7,
            use_flow_mag: false,
            flow_penalty: 0.1,
            linear: false,
        }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.patch % 2 == 0 {
            return Err(Error::invalid(format!(
                "patch must be odd, got {}",
                self.patch
            )));
        }
        if !(self.flow_penalty >= 0.0) {
            return Err(Error::invalid("flow_penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Per-pixel merge weights, frame-major: `weights[i * w * h + y * w + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    frames: usize,
    weights: Vec<f64>,
}

impl WeightMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, frame: usize, x: usize, y: usize) -> f64 {
        self.weights[(frame * self.height + y) * self.width + x]
    }

    pub fn plane(&self, frame: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.weights[frame * n..(frame + 1) * n]
    }

    /// Largest deviation of a per-pixel weight sum from one.
    pub fn max_sum_error(&self) -> f64 {
        let n = self.width * self.height;
        (0..n)
            .map(|p| {
                let s: f64 = (0..self.frames).map(|i| self.weights[i * n + p]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `(N, H, W)` tensor for the sidecar format.
    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dims: vec![self.frames, self.height, self.width],
            data: self.weights.iter().map(|&v| v as f32).collect(),
        }
    }
}

fn check_burst(frames: &[ImageBuffer], reference: usize) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("burst must contain at least one frame"))?;
    for f in &frames[1..] {
        first.ensure_same_shape(f, "burst")?;
    }
    if reference >= frames.len() {
        return Err(Error::invalid(format!(
            "reference index {reference} out of range for {} frames",
            frames.len()
        )));
    }
    Ok(())
}

pub fn compute_weights(
    warped: &[ImageBuffer],
    reference: usize,
    cfg: &MergeConfig,
) -> Result<WeightMap> {
    compute_weights_with_flows(warped, None, reference, cfg)
}

/// As [`compute_weights`]; with `use_flow_mag` set, `flows` add a penalty
/// proportional to the local flow magnitude.
pub fn compute_weights_with_flows(
    warped: &[ImageBuffer],
    flows: Option<&[FlowField]>,
    reference: usize,
    cfg: &MergeConfig,
) -> Result<WeightMap> {
    cfg.validate()?;
    check_burst(warped, reference)?;
    let (w, h, ch) = (warped[0].width(), warped[0].height(), warped[0].channels());
    let npx = w * h;
    let radius = cfg.patch / 2;
    let refd = warped[reference].data();

    let logits: Vec<Vec<f64>> = warped
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            if i == reference {
                return vec![0.0; npx];
            }
            let sq: Vec<f64> = img
                .data()
                .chunks_exact(ch)
                .zip(refd.chunks_exact(ch))
                .map(|(a, b)| {
                    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / ch as f64
                })
                .collect();
            let mut l: Vec<f64> = box_mean(&sq, w, h, radius)
                .iter()
                .map(|r| -r / cfg.tau)
                .collect();
            if cfg.use_flow_mag {
                if let Some(f) = flows.and_then(|f| f.get(i)) {
                    for (v, uv) in l.iter_mut().zip(f.uv()) {
                        *v -= cfg.flow_penalty * (uv[0] as f64).hypot(uv[1] as f64);
                    }
                }
            }
            l
        })
        .collect();

    let n = warped.len();
    let mut weights = vec![0.0; n * npx];
    let mut col = vec![0.0; n];
    for p in 0..npx {
        let m = (0..n)
            .map(|i| logits[i][p])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for i in 0..n {
            col[i] = (logits[i][p] - m).exp();
            s += col[i];
        }
        for i in 0..n {
            weights[i * npx + p] = col[i] / s;
        }
    }
    Ok(WeightMap {
        width: w,
        height: h,
        frames: n,
        weights,
    })
}

#[derive(Debug, Clone)]
pub struct MergeOutput {
    pub image: ImageBuffer,
    pub weights: WeightMap,
}

pub fn merge_burst(
    burst: &[ImageBuffer],
    flows: &[FlowField],
    cfg: &MergeConfig,
) -> Result<ImageBuffer> {
    Ok(merge_burst_detailed(burst, flows, cfg)?.image)
}

/// Merges around the middle frame, returning the weights as well.
pub fn merge_burst_detailed(
    burst: &[ImageBuffer],
    flows: &[FlowField],
    cfg: &MergeConfig,
) -> Result<MergeOutput> {
    cfg.validate()?;
    let reference = burst.len() / 2;
    check_burst(burst, reference)?;
    if flows.len() != burst.len() {
        return Err(Error::invalid(format!(
            "{} flows given for {} frames",
            flows.len(),
            burst.len()
        )));
    }
    let space = burst[0].space();
    let transfer = IspConfig::default();
    let warped: Vec<ImageBuffer> = burst
        .par_iter()
        .zip(flows)
        .map(|(img, f)| {
            let img = if cfg.linear && space == ColorSpace::Srgb {
                srgb_to_linear(&img.clamped(), &transfer)?
            } else {
                img.clone()
            };
            backwarp(&img, f)
        })
        .collect::<Result<_>>()?;
    let weights = compute_weights_with_flows(&warped, Some(flows), reference, cfg)?;
    let (w, h, ch) = (warped[0].width(), warped[0].height(), warped[0].channels());
    let npx = w * h;
    let mut out = vec![0.0; npx * ch];
    for (i, img) in warped.iter().enumerate() {
        let wp = weights.plane(i);
        for (p, (o, v)) in out
            .chunks_exact_mut(ch)
            .zip(img.data().chunks_exact(ch))
            .enumerate()
        {
            for c in 0..ch {
                o[c] += wp[p] * v[c];
            }
        }
    }
    let mut image = ImageBuffer::from_vec(w, h, ch, warped[0].space(), out)?;
    if cfg.linear && space == ColorSpace::Srgb {
        image = linear_to_srgb(&image.clamped(), &transfer)?;
    }
    Ok(MergeOutput { image, weights })
}
