//! Exposure trajectories and the spatially varying blur they induce.
//!
//! Per-frame flows from the burst give, for every reference pixel, where that
//! scene point sat at each burst time stamp. Resampling those anchors along
//! the exposure yields `K²` offsets per pixel. The long exposure is modelled
//! as the average of the sharp image sampled at those offsets, a linear
//! operator `A` with an exact adjoint, which is then inverted iteratively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::imaging::sample::BilinearTaps;
use crate::imaging::{ImageBuffer, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryField {
    width: usize,
    height: usize,
    kernel: usize,
    /// `(y·width + x)·K² + k` → offset of tap `k` at pixel `(x, y)`.
    offsets: Vec<[f64; 2]>,
}

impl TrajectoryField {
    pub fn zeros(width: usize, height: usize, kernel: usize) -> Self {
        Self {
            width,
            height,
            kernel,
            offsets: vec![[0.0; 2]; width * height * kernel * kernel],
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        kernel: usize,
        offsets: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if kernel == 0 {
            return Err(Error::invalid("trajectory kernel side must be >= 1"));
        }
        if offsets.len() != width * height * kernel * kernel {
            return Err(Error::shape(format!(
                "{width}x{height} trajectory with K = {kernel} needs {} offsets, got {}",
                width * height * kernel * kernel,
                offsets.len()
            )));
        }
        if offsets
            .iter()
            .any(|o| !o[0].is_finite() || !o[1].is_finite())
        {
            return Err(Error::invalid("trajectory offsets must be finite"));
        }
        Ok(Self {
            width,
            height,
            kernel,
            offsets,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Kernel side `K`.
    #[inline]
    pub fn kernel(&self) -> usize {
        self.kernel
    }

    #[inline]
    pub fn taps(&self) -> usize {
        self.kernel * self.kernel
    }

    pub fn offsets(&self) -> &[[f64; 2]] {
        &self.offsets
    }

    /// The `K²` time-ordered offsets of pixel `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> &[[f64; 2]] {
        let t = self.taps();
        let i = (y * self.width + x) * t;
        &self.offsets[i..i + t]
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(|o| o[0] == 0.0 && o[1] == 0.0)
    }

    fn ensure_matches(&self, img: &ImageBuffer, what: &str) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::shape(format!(
                "{what}: image {}x{} vs trajectory {}x{}",
                img.width(),
                img.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    /// Rank-4 tensor `(H, W, K², 2)`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self
            .offsets
            .iter()
            .flat_map(|o| [o[0] as f32, o[1] as f32])
            .collect();
        Tensor {
            dims: vec![self.height, self.width, self.taps(), 2],
            data,
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.dims.len() != 4 || t.dims[3] != 2 {
            return Err(Error::shape(format!(
                "trajectory tensor must be (H, W, K², 2), got {:?}",
                t.dims
            )));
        }
        let taps = t.dims[2];
        let kernel = (taps as f64).sqrt().round() as usize;
        if kernel * kernel != taps {
            return Err(Error::shape(format!("{taps} taps is not a square count")));
        }
        let offsets = t
            .data
            .chunks_exact(2)
            .map(|p| [p[0] as f64, p[1] as f64])
            .collect();
        Self::from_vec(t.dims[1], t.dims[0], kernel, offsets)
    }
}

/// Time parameters at which the trajectory is resampled.
pub fn tap_times(kernel: usize) -> Vec<f64> {
    let taps = kernel * kernel;
    if taps == 1 {
        return vec![0.5];
    }
    (0..taps).map(|k| k as f64 / (taps - 1) as f64).collect()
}

/// Piecewise-linear resampling of per-frame flows into `K²` offsets.
///
/// Flow `i` (0-based) is anchored at time `i/(N−1)`; the middle flow is the
/// reference self-flow. Taps sit at `k/(K²−1)`, so the trajectory never
/// extends beyond the first and last anchors.
pub fn build_trajectories(flows: &[FlowField], kernel: usize) -> Result<TrajectoryField> {
    let n = flows.len();
    if n == 0 || n % 2 == 0 {
        return Err(Error::invalid(format!(
            "trajectories need an odd number of flows, got {n}"
        )));
    }
    if kernel == 0 {
        return Err(Error::invalid("trajectory kernel side must be >= 1"));
    }
    let (w, h) = (flows[0].width(), flows[0].height());
    if flows.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(Error::shape("flows differ in size"));
    }
    let times = tap_times(kernel);
    let taps = times.len();
    // segment index and blend factor for every tap
    let segs: Vec<(usize, f64)> = times
        .iter()
        .map(|&u| {
            if n == 1 {
                return (0, 0.0);
            }
            let s = u * (n - 1) as f64;
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        })
        .collect();

    let mut offsets = vec![[0.0; 2]; w * h * taps];
    offsets
        .par_chunks_exact_mut(w * taps)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                for (k, &(i, f)) in segs.iter().enumerate() {
                    let a = flows[i].get(x, y);
                    let o = if n == 1 || f == 0.0 {
                        [a.0, a.1]
                    } else {
                        let b = flows[i + 1].get(x, y);
                        [(1.0 - f) * a.0 + f * b.0, (1.0 - f) * a.1 + f * b.1]
                    };
                    row[x * taps + k] = o;
                }
            }
        });
    TrajectoryField::from_vec(w, h, kernel, offsets)
}

/// The trajectory blur `A` with precomputed bilinear taps.
pub struct BlurOperator {
    width: usize,
    height: usize,
    taps: usize,
    identity: bool,
    table: Vec<BilinearTaps>,
}

impl BlurOperator {
    pub fn new(traj: &TrajectoryField) -> Self {
        let (w, h, taps) = (traj.width, traj.height, traj.taps());
        let identity = traj.is_zero();
        let table = if identity {
            Vec::new()
        } else {
            let mut table = Vec::with_capacity(w * h * taps);
            for y in 0..h {
                for x in 0..w {
                    for o in traj.at(x, y) {
                        table.push(BilinearTaps::new(x as f64 + o[0], y as f64 + o[1], w, h));
                    }
                }
            }
            table
        };
        Self {
            width: w,
            height: h,
            taps,
            identity,
            table,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    fn check(&self, img: &ImageBuffer) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::shape(format!(
                "blur operator is {}x{}, image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    /// `out(p) = (1/K²) Σ_k bilinear(img, p + δ_k(p))`.
    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        self.check(img)?;
        if self.identity {
            return Ok(img.clone());
        }
        let (w, ch, taps) = (self.width, img.channels(), self.taps);
        let src = img.data();
        let scale = 1.0 / taps as f64;
        let mut out = vec![0.0; src.len()];
        out.par_chunks_exact_mut(w * ch)
            .enumerate()
            .for_each(|(y, row)| {
                for x in 0..w {
                    let base = (y * w + x) * taps;
                    for c in 0..ch {
                        let s: f64 = self.table[base..base + taps]
                            .iter()
                            .map(|t| t.sample(src, ch, c))
                            .sum();
                        row[x * ch + c] = s * scale;
                    }
                }
            });
        ImageBuffer::from_vec(w, self.height, ch, img.space(), out)
    }

    /// Exact transpose of [`apply`](Self::apply): every pixel splats
    /// `img(p)/K²` onto the bilinear neighbors of each of its taps.
    ///
    /// Runs sequentially in a fixed pixel order so the floating-point result
    /// does not depend on the worker count.
    pub fn adjoint(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        self.check(img)?;
        if self.identity {
            return Ok(img.clone());
        }
        let (w, h, ch, taps) = (self.width, self.height, img.channels(), self.taps);
        let src = img.data();
        let scale = 1.0 / taps as f64;
        let mut out = vec![0.0; src.len()];
        for p in 0..w * h {
            for t in &self.table[p * taps..(p + 1) * taps] {
                for c in 0..ch {
                    t.splat(&mut out, ch, c, src[p * ch + c] * scale);
                }
            }
        }
        ImageBuffer::from_vec(w, h, ch, img.space(), out)
    }

    /// Estimate of `‖A‖₂` by power iteration on `AᵀA`.
    pub fn norm_estimate(&self, channels: usize, iterations: usize) -> f64 {
        if self.identity {
            return 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let n = self.width * self.height * channels;
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
        normalize(&mut v);
        let mut est = 0.0;
        for _ in 0..iterations {
            let x = ImageBuffer::from_vec(self.width, self.height, channels, Default::default(), v)
                .expect("shape");
            let av = self.apply(&x).expect("shape");
            let atav = self.adjoint(&av).expect("shape");
            v = atav.into_data();
            est = normalize(&mut v);
        }
        est.sqrt()
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

pub fn blur_apply(sharp: &ImageBuffer, traj: &TrajectoryField) -> Result<ImageBuffer> {
    traj.ensure_matches(sharp, "blur_apply")?;
    BlurOperator::new(traj).apply(sharp)
}

pub fn blur_adjoint(img: &ImageBuffer, traj: &TrajectoryField) -> Result<ImageBuffer> {
    traj.ensure_matches(img, "blur_adjoint")?;
    BlurOperator::new(traj).adjoint(img)
}

/// Samples `img` at every trajectory tap; plane `k` holds
/// `bilinear(img, p + δ_k(p))`.
pub fn sample_deformable(img: &ImageBuffer, traj: &TrajectoryField) -> Result<Vec<ImageBuffer>> {
    traj.ensure_matches(img, "sample_deformable")?;
    let (w, h, ch, taps) = (img.width(), img.height(), img.channels(), traj.taps());
    let src = img.data();
    (0..taps)
        .map(|k| {
            let mut out = vec![0.0; src.len()];
            out.par_chunks_exact_mut(w * ch)
                .enumerate()
                .for_each(|(y, row)| {
                    for x in 0..w {
                        let o = traj.at(x, y)[k];
                        let t = BilinearTaps::new(x as f64 + o[0], y as f64 + o[1], w, h);
                        for c in 0..ch {
                            row[x * ch + c] = t.sample(src, ch, c);
                        }
                    }
                });
            ImageBuffer::from_vec(w, h, ch, img.space(), out)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeconvMethod {
    #[default]
    Landweber,
    RichardsonLucy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvOptions {
    pub max_iters: usize,
    /// Stop once the data fit drops by less than this fraction in one step.
    pub tol: f64,
    /// Landweber step; `None` picks `1.9/‖A‖²` from 20 power iterations.
    pub step: Option<f64>,
    /// Clamp iterates to [0, 1].
    pub nonneg: bool,
    pub method: DeconvMethod,
}

impl Default for DeconvOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-5,
            step: None,
            nonneg: true,
            method: DeconvMethod::Landweber,
        }
    }
}

impl DeconvOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(Error::invalid(format!(
                    "deconvolution step must be positive, got {s}"
                )));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        Ok(())
    }
}

const RL_FLOOR: f64 = 1e-6;
const POWER_ITERS: usize = 20;

#[derive(Debug, Clone)]
pub struct DeconvReport {
    pub image: ImageBuffer,
    /// Data fit `‖long − A x‖²` of the starting point and after every update.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub step: f64,
}

impl DeconvReport {
    pub fn is_monotone(&self) -> bool {
        self.residuals.windows(2).all(|w| w[1] <= w[0])
    }
}

pub fn deconvolve(
    long: &ImageBuffer,
    traj: &TrajectoryField,
    opts: &DeconvOptions,
) -> Result<ImageBuffer> {
    Ok(deconvolve_traced(long, traj, opts)?.image)
}

/// Non-blind deconvolution of `long` under the trajectory blur, starting
/// from `long` itself.
pub fn deconvolve_traced(
    long: &ImageBuffer,
    traj: &TrajectoryField,
    opts: &DeconvOptions,
) -> Result<DeconvReport> {
    opts.validate()?;
    traj.ensure_matches(long, "deconvolve")?;
    let op = BlurOperator::new(traj);
    match opts.method {
        DeconvMethod::Landweber => landweber(long, &op, opts),
        DeconvMethod::RichardsonLucy => richardson_lucy(long, &op, opts),
    }
}

fn data_fit(long: &ImageBuffer, ax: &ImageBuffer) -> (Vec<f64>, f64) {
    let r: Vec<f64> = long
        .data()
        .iter()
        .zip(ax.data())
        .map(|(a, b)| a - b)
        .collect();
    let f = r.iter().map(|v| v * v).sum();
    (r, f)
}

fn landweber(long: &ImageBuffer, op: &BlurOperator, opts: &DeconvOptions) -> Result<DeconvReport> {
    let (w, h, ch, space) = (long.width(), long.height(), long.channels(), long.space());
    let mut step = match opts.step {
        Some(s) => s,
        None => {
            let n = op.norm_estimate(ch, POWER_ITERS);
            1.9 / (n * n)
        }
    };
    let mut x = long.clone();
    let (mut resid, mut fit) = data_fit(long, &op.apply(&x)?);
    let mut trace = vec![fit];
    let mut iterations = 0;
    while iterations < opts.max_iters && fit > 0.0 {
        let grad = op.adjoint(&ImageBuffer::from_vec(w, h, ch, space, resid.clone())?)?;
        // backtrack if the estimated step overshoots
        let (cand, cand_resid, cand_fit) = loop {
            let data: Vec<f64> = x
                .data()
                .iter()
                .zip(grad.data())
                .map(|(v, g)| {
                    let u = v + step * g;
                    if opts.nonneg {
                        u.clamp(0.0, 1.0)
                    } else {
                        u
                    }
                })
                .collect();
            let cand = ImageBuffer::from_vec(w, h, ch, space, data)?;
            let (r, f) = data_fit(long, &op.apply(&cand)?);
            if f <= fit || step < 1e-12 {
                break (cand, r, f);
            }
            step *= 0.5;
        };
        iterations += 1;
        let decrease = (fit - cand_fit) / fit;
        if cand_fit > fit {
            break;
        }
        x = cand;
        resid = cand_resid;
        fit = cand_fit;
        trace.push(fit);
        if decrease < opts.tol {
            break;
        }
    }
    Ok(DeconvReport {
        image: x,
        residuals: trace,
        iterations,
        step,
    })
}

fn richardson_lucy(
    long: &ImageBuffer,
    op: &BlurOperator,
    opts: &DeconvOptions,
) -> Result<DeconvReport> {
    let (w, h, ch, space) = (long.width(), long.height(), long.channels(), long.space());
    let mut x = long.map(|v| v.max(RL_FLOOR));
    let ones = ImageBuffer::filled(w, h, ch, space, 1.0);
    let norm = op.adjoint(&ones)?;
    let mut ax = op.apply(&x)?;
    let (_, mut fit) = data_fit(long, &ax);
    let mut trace = vec![fit];
    let mut iterations = 0;
    while iterations < opts.max_iters && fit > 0.0 {
        let ratio: Vec<f64> = long
            .data()
            .iter()
            .zip(ax.data())
            .map(|(l, a)| l.max(RL_FLOOR) / a.max(RL_FLOOR))
            .collect();
        let corr = op.adjoint(&ImageBuffer::from_vec(w, h, ch, space, ratio)?)?;
        let data: Vec<f64> = x
            .data()
            .iter()
            .zip(corr.data())
            .zip(norm.data())
            .map(|((v, c), n)| {
                let u = v * c / n.max(RL_FLOOR);
                if opts.nonneg {
                    u.clamp(RL_FLOOR, 1.0)
                } else {
                    u
                }
            })
            .collect();
        x = ImageBuffer::from_vec(w, h, ch, space, data)?;
        ax = op.apply(&x)?;
        let prev = fit;
        fit = data_fit(long, &ax).1;
        trace.push(fit);
        iterations += 1;
        if ((prev - fit) / prev).abs() < opts.tol {
            break;
        }
    }
    Ok(DeconvReport {
        image: x,
        residuals: trace,
        iterations,
        step: 1.0,
    })
}
