//! Fusion of the deblurred long exposure with the merged burst, and the
//! end-to-end restoration pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::{merge_burst_detailed, MergeConfig, WeightMap};
use crate::error::{Error, Result};
use crate::flow::{estimate_flow, FlowConfig, FlowField};
use crate::imaging::sample::box_mean;
use crate::imaging::ImageBuffer;
use crate::isp::{linear_to_srgb, srgb_to_linear, IspConfig};
use crate::trajectory::{build_trajectories, deconvolve_traced, DeconvOptions, TrajectoryField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Fine detail of the merged burst over the coarse content of the
    /// deblurred image.
    #[default]
    BandSplit,
    ResidualConfidence,
    LumaChroma,
    Average,
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "band_split" => Ok(Self::BandSplit),
            "residual_confidence" => Ok(Self::ResidualConfidence),
            "luma_chroma" => Ok(Self::LumaChroma),
            "average" => Ok(Self::Average),
            other => Err(Error::invalid(format!(
                "unknown fusion mode '{other}' (expected band_split, residual_confidence, luma_chroma or average)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub window: usize,
    pub epsilon: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::default(),
            window: 11,
            epsilon: 1e-4,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 {
            return Err(Error::invalid(format!(
                "fusion window must be odd, got {}",
                self.window
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("fusion epsilon must be positive"));
        }
        Ok(())
    }
}

const REC601: [f64; 3] = [0.299, 0.587, 0.114];

/// Tent low-pass (box filter applied twice), interleaved like the input.
fn lowpass(img: &ImageBuffer, radius: usize) -> Vec<f64> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = vec![0.0; img.data().len()];
    for c in 0..ch {
        let plane: Vec<f64> = img.data().iter().skip(c).step_by(ch).copied().collect();
        let smooth = box_mean(&box_mean(&plane, w, h, radius), w, h, radius);
        for (p, v) in smooth.into_iter().enumerate() {
            out[p * ch + c] = v;
        }
    }
    out
}

/// Per-pixel inconsistency of a 3×3-blurred candidate with the long
/// exposure, pooled over the fusion window.
fn inconsistency(candidate: &ImageBuffer, long: &ImageBuffer, window: usize) -> Vec<f64> {
    let (w, h, ch) = (candidate.width(), candidate.height(), candidate.channels());
    let mut err = vec![0.0; w * h];
    for c in 0..ch {
        let plane: Vec<f64> = candidate
            .data()
            .iter()
            .skip(c)
            .step_by(ch)
            .copied()
            .collect();
        let blurred = box_mean(&plane, w, h, 1);
        for (p, e) in err.iter_mut().enumerate() {
            let d = blurred[p] - long.data()[p * ch + c];
            *e += d * d;
        }
    }
    box_mean(&err, w, h, window / 2)
}

/// Weight given to `deblurred` at every pixel (the remainder goes to
/// `denoised`). Only defined for the convex modes.
pub fn fusion_weights(
    deblurred: &ImageBuffer,
    denoised: &ImageBuffer,
    long: &ImageBuffer,
    cfg: &FusionConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    deblurred.ensure_same_shape(denoised, "fusion")?;
    deblurred.ensure_same_shape(long, "fusion")?;
    let npx = deblurred.width() * deblurred.height();
    match cfg.mode {
        FusionMode::Average => Ok(vec![0.5; npx]),
        FusionMode::ResidualConfidence => {
            let (ed, en) = rayon::join(
                || inconsistency(deblurred, long, cfg.window),
                || inconsistency(denoised, long, cfg.window),
            );
            Ok(ed
                .iter()
                .zip(&en)
                .map(|(a, b)| {
                    let cd = 1.0 / (cfg.epsilon + a);
                    let cn = 1.0 / (cfg.epsilon + b);
                    cd / (cd + cn)
                })
                .collect())
        }
        FusionMode::LumaChroma | FusionMode::BandSplit => Err(Error::invalid(
            "only average and residual_confidence fusion have per-pixel weights",
        )),
    }
}

pub fn fuse(
    deblurred: &ImageBuffer,
    denoised: &ImageBuffer,
    long: &ImageBuffer,
    cfg: &FusionConfig,
) -> Result<ImageBuffer> {
    cfg.validate()?;
    deblurred.ensure_same_shape(denoised, "fusion")?;
    deblurred.ensure_same_shape(long, "fusion")?;
    if deblurred == denoised {
        return Ok(deblurred.clone());
    }
    let ch = deblurred.channels();
    let mut out = deblurred.clone();
    match cfg.mode {
        FusionMode::LumaChroma if ch == 3 => {
            // luma of the merged burst, colour offsets of the deblurred image
            out.data_mut()
                .par_chunks_exact_mut(3)
                .zip(denoised.data().par_chunks_exact(3))
                .for_each(|(d, n)| {
                    let ld: f64 = d.iter().zip(REC601).map(|(v, k)| v * k).sum();
                    let ln: f64 = n.iter().zip(REC601).map(|(v, k)| v * k).sum();
                    for v in d.iter_mut() {
                        *v = ln + (*v - ld);
                    }
                });
        }
        FusionMode::LumaChroma => out = denoised.clone(),
        FusionMode::BandSplit => {
            let radius = cfg.window / 2;
            let (lo_d, lo_n) =
                rayon::join(|| lowpass(deblurred, radius), || lowpass(denoised, radius));
            out.data_mut()
                .par_iter_mut()
                .zip(denoised.data().par_iter())
                .zip(lo_d.par_iter().zip(lo_n.par_iter()))
                .for_each(|((o, n), (ld, ln))| *o = (n - ln + ld).clamp(0.0, 1.0));
        }
        _ => {
            let wd = fusion_weights(deblurred, denoised, long, cfg)?;
            out.data_mut()
                .par_chunks_exact_mut(ch)
                .zip(denoised.data().par_chunks_exact(ch))
                .zip(wd.par_iter())
                .for_each(|((d, n), &a)| {
                    for (dv, nv) in d.iter_mut().zip(n) {
                        *dv = a * *dv + (1.0 - a) * nv;
                    }
                });
        }
    }
    Ok(out)
}

/// Settings of every restoration stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestoreConfig {
    pub flow: FlowConfig,
    /// Trajectory kernel side `K` (`K²` taps).
    pub kernel: usize,
    pub deconv: DeconvOptions,
    pub merge: MergeConfig,
    pub fusion: FusionConfig,
    /// Transfer curve used to deblur in linear light.
    pub isp: IspConfig,
}

impl Default for RestoreConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            kernel: 3,
            // early stopping is the only regularization: past a few dozen
            // iterations Landweber starts amplifying sensor noise
            deconv: DeconvOptions {
                max_iters: 20,
                ..DeconvOptions::default()
            },
            merge: MergeConfig::default(),
            fusion: FusionConfig::default(),
            isp: IspConfig::default(),
        }
    }
}

impl RestoreConfig {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.kernel == 0 {
            return Err(Error::invalid("trajectory kernel must be >= 1"));
        }
        self.deconv.validate()?;
        self.merge.validate()?;
        self.fusion.validate()
    }
}

#[derive(Debug, Clone)]
pub struct RestoreOutput {
    pub image: ImageBuffer,
    pub deblurred: ImageBuffer,
    pub denoised: ImageBuffer,
    pub weights: WeightMap,
    pub flows: Vec<FlowField>,
    pub trajectory: TrajectoryField,
    /// Data-fit trace of the deconvolution.
    pub residuals: Vec<f64>,
}

/// Flows from the middle frame to every burst frame; the middle entry is
/// zero.
pub fn burst_flows(burst: &[ImageBuffer], cfg: &FlowConfig) -> Result<Vec<FlowField>> {
    check_burst(burst)?;
    let m = burst.len() / 2;
    burst
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            if i == m {
                Ok(FlowField::zeros(img.width(), img.height()))
            } else {
                estimate_flow(&burst[m], img, cfg)
            }
        })
        .collect()
}

fn check_burst(burst: &[ImageBuffer]) -> Result<()> {
    if burst.is_empty() || burst.len() % 2 == 0 {
        return Err(Error::invalid(format!(
            "burst size must be odd, got {}",
            burst.len()
        )));
    }
    for f in &burst[1..] {
        burst[0].ensure_same_shape(f, "burst")?;
    }
    Ok(())
}

/// Non-blind deblurring of `long` in linear light along `traj`.
pub fn deblur_long(
    long: &ImageBuffer,
    traj: &TrajectoryField,
    cfg: &RestoreConfig,
) -> Result<(ImageBuffer, Vec<f64>)> {
    if traj.is_zero() {
        return Ok((long.clone(), vec![]));
    }
    let lin = srgb_to_linear(&long.clamped(), &cfg.isp)?;
    let report = deconvolve_traced(&lin, traj, &cfg.deconv)?;
    Ok((
        linear_to_srgb(&report.image.clamped(), &cfg.isp)?,
        report.residuals,
    ))
}

pub fn restore(
    long: &ImageBuffer,
    burst: &[ImageBuffer],
    cfg: &RestoreConfig,
) -> Result<ImageBuffer> {
    Ok(restore_detailed(long, burst, None, cfg)?.image)
}

/// Full pipeline. `flows`, when given, replace flow estimation.
pub fn restore_detailed(
    long: &ImageBuffer,
    burst: &[ImageBuffer],
    flows: Option<Vec<FlowField>>,
    cfg: &RestoreConfig,
) -> Result<RestoreOutput> {
    cfg.validate()?;
    check_burst(burst)?;
    long.ensure_same_shape(&burst[0], "long exposure vs burst")?;
    let flows = match flows {
        Some(f) => {
            if f.len() != burst.len() || f.iter().any(|f| !f.matches(long)) {
                return Err(Error::shape(format!(
                    "expected {} flows of {}x{}",
                    burst.len(),
                    long.width(),
                    long.height()
                )));
            }
            f
        }
        None => burst_flows(burst, &cfg.flow)?,
    };
    let trajectory = build_trajectories(&flows, cfg.kernel)?;
    let (deblur, merged) = rayon::join(
        || deblur_long(long, &trajectory, cfg),
        || merge_burst_detailed(burst, &flows, &cfg.merge),
    );
    let (deblurred, residuals) = deblur?;
    let merged = merged?;
    let image = fuse(&deblurred, &merged.image, long, &cfg.fusion)?;
    Ok(RestoreOutput {
        image,
        deblurred,
        denoised: merged.image,
        weights: merged.weights,
        flows,
        trajectory,
        residuals,
    })
}
