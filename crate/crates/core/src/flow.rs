//! Dense optical flow and backward warping.
//!
//! Flow follows the reference→target convention: for a flow `Δp` between a
//! reference `R` and a target `T`, `R(p) ≈ T(p + Δp(p))`, so warping `T`
//! with [`backwarp`] aligns it to `R`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::sample::{box_mean, BilinearTaps};
use crate::imaging::ImageBuffer;

/// Magic number opening every Middlebury `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    uv: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            uv: vec![[0.0; 2]; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        Self {
            width,
            height,
            uv: vec![[dx, dy]; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, uv: Vec<[f32; 2]>) -> Result<Self> {
        if uv.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} flow needs {} vectors, got {}",
                width * height,
                uv.len()
            )));
        }
        Ok(Self { width, height, uv })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 2],
    ) -> Self {
        let mut uv = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                uv.push(f(x, y));
            }
        }
        Self { width, height, uv }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn uv(&self) -> &[[f32; 2]] {
        &self.uv
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let v = self.uv[y * self.width + x];
        (v[0] as f64, v[1] as f64)
    }

    pub fn is_zero(&self) -> bool {
        self.uv.iter().all(|v| v[0] == 0.0 && v[1] == 0.0)
    }

    pub fn matches(&self, img: &ImageBuffer) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.uv
            .iter()
            .map(|v| (v[0] as f64).hypot(v[1] as f64))
            .sum::<f64>()
            / self.uv.len().max(1) as f64
    }

    /// Mean endpoint error against a constant flow over pixels at least
    /// `margin` away from the border.
    pub fn mean_endpoint_error(&self, dx: f64, dy: f64, margin: usize) -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                let (u, v) = self.get(x, y);
                acc += (u - dx).hypot(v - dy);
                n += 1;
            }
        }
        acc / n.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub levels: usize,
    pub window: usize,
    pub iters_per_level: usize,
    pub min_eigen: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 21,
            iters_per_level: 10,
            min_eigen: 1e-4,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::invalid(format!(
                "flow window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.levels == 0 {
            return Err(Error::invalid("flow needs at least one pyramid level"));
        }
        if !(self.min_eigen >= 0.0) {
            return Err(Error::invalid("min_eigen must be non-negative"));
        }
        Ok(())
    }
}

/// Smallest accepted input side, and smallest side of the coarsest level.
const MIN_INPUT_SIDE: usize = 32;
const MIN_LEVEL_SIDE: usize = 8;

/// Single-channel plane used inside the estimator.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn from_image(img: &ImageBuffer) -> Self {
        let l = img.luma();
        Plane {
            w: l.width(),
            h: l.height(),
            v: l.into_data(),
        }
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> f64 {
        let xx = x.clamp(0, self.w as isize - 1) as usize;
        let yy = y.clamp(0, self.h as isize - 1) as usize;
        self.v[yy * self.w + xx]
    }

    /// Binomial 1-4-6-4-1 blur followed by 2× decimation.
    fn downsample(&self) -> Plane {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (w, h) = (self.w, self.h);
        let mut horiz = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                horiz[y * w + x] = (0..5)
                    .map(|i| K[i] * self.at(x as isize + i as isize - 2, y as isize))
                    .sum();
            }
        }
        let tmp = Plane { w, h, v: horiz };
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        let mut v = vec![0.0; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                v[y * nw + x] = (0..5)
                    .map(|i| K[i] * tmp.at(2 * x as isize, 2 * y as isize + i as isize - 2))
                    .sum();
            }
        }
        Plane { w: nw, h: nh, v }
    }

    fn gradients(&self) -> (Vec<f64>, Vec<f64>) {
        let mut gx = vec![0.0; self.w * self.h];
        let mut gy = vec![0.0; self.w * self.h];
        for y in 0..self.h {
            for x in 0..self.w {
                let (xi, yi) = (x as isize, y as isize);
                gx[y * self.w + x] = 0.5 * (self.at(xi + 1, yi) - self.at(xi - 1, yi));
                gy[y * self.w + x] = 0.5 * (self.at(xi, yi + 1) - self.at(xi, yi - 1));
            }
        }
        (gx, gy)
    }

    fn warp(&self, flow: &[[f64; 2]]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let mut out = vec![0.0; w * h];
        out.par_chunks_exact_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, o) in row.iter_mut().enumerate() {
                    let d = flow[y * w + x];
                    let t = BilinearTaps::new(x as f64 + d[0], y as f64 + d[1], w, h);
                    *o = t.sample(&self.v, 1, 0);
                }
            });
        out
    }
}

/// Coarse-to-fine dense Lucas-Kanade.
///
/// At every level the window structure tensor of the reference gradients is
/// solved against the box-filtered temporal residual of the warped target.
/// Pixels whose smallest structure-tensor eigenvalue is below `min_eigen`
/// keep the flow propagated from the coarser level.
pub fn estimate_flow(
    reference: &ImageBuffer,
    target: &ImageBuffer,
    cfg: &FlowConfig,
) -> Result<FlowField> {
    cfg.validate()?;
    if reference.width() != target.width() || reference.height() != target.height() {
        return Err(Error::shape(format!(
            "flow inputs differ: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            target.width(),
            target.height()
        )));
    }
    let (w, h) = (reference.width(), reference.height());
    if w < MIN_INPUT_SIDE || h < MIN_INPUT_SIDE {
        return Err(Error::invalid(format!(
            "flow needs at least {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE} pixels, got {w}x{h}"
        )));
    }
    let mut ref_pyr = vec![Plane::from_image(reference)];
    let mut tgt_pyr = vec![Plane::from_image(target)];
    for _ in 1..cfg.levels {
        let r = ref_pyr.last().unwrap().downsample();
        let t = tgt_pyr.last().unwrap().downsample();
        ref_pyr.push(r);
        tgt_pyr.push(t);
    }
    let coarsest = ref_pyr.last().unwrap();
    if coarsest.w < MIN_LEVEL_SIDE || coarsest.h < MIN_LEVEL_SIDE {
        return Err(Error::invalid(format!(
            "{w}x{h} image is too small for {} pyramid levels",
            cfg.levels
        )));
    }

    let radius = cfg.window / 2;
    let mut flow: Vec<[f64; 2]> = vec![[0.0; 2]; coarsest.w * coarsest.h];
    let mut flow_dims = (coarsest.w, coarsest.h);

    for level in (0..cfg.levels).rev() {
        let rp = &ref_pyr[level];
        let tp = &tgt_pyr[level];
        if flow_dims != (rp.w, rp.h) {
            flow = upsample_flow(&flow, flow_dims, (rp.w, rp.h));
            flow_dims = (rp.w, rp.h);
        }
        lk_level(rp, tp, &mut flow, radius, cfg);
    }

    let uv = flow.iter().map(|d| [d[0] as f32, d[1] as f32]).collect();
    FlowField::from_vec(w, h, uv)
}

fn lk_level(rp: &Plane, tp: &Plane, flow: &mut [[f64; 2]], radius: usize, cfg: &FlowConfig) {
    let (w, h) = (rp.w, rp.h);
    let (gx, gy) = rp.gradients();
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let sxx = box_mean(&prod(&gx, &gx), w, h, radius);
    let sxy = box_mean(&prod(&gx, &gy), w, h, radius);
    let syy = box_mean(&prod(&gy, &gy), w, h, radius);

    let trusted: Vec<bool> = (0..w * h)
        .map(|i| {
            let (a, b, c) = (sxx[i], sxy[i], syy[i]);
            let half_tr = 0.5 * (a + c);
            let lmin = half_tr - (0.25 * (a - c) * (a - c) + b * b).sqrt();
            lmin >= cfg.min_eigen && lmin > 0.0
        })
        .collect();

    for _ in 0..cfg.iters_per_level {
        let warped = tp.warp(flow);
        // per-pixel constraint g·d = g·d_q − It_q, linearized at each
        // pixel's own flow, then solved in the least-squares sense per window
        let mut zx = vec![0.0; w * h];
        let mut zy = vec![0.0; w * h];
        for i in 0..w * h {
            let it = warped[i] - rp.v[i];
            let proj = gx[i] * flow[i][0] + gy[i] * flow[i][1] - it;
            zx[i] = gx[i] * proj;
            zy[i] = gy[i] * proj;
        }
        let bx = box_mean(&zx, w, h, radius);
        let by = box_mean(&zy, w, h, radius);
        let mut max_step = 0.0f64;
        for i in 0..w * h {
            if !trusted[i] {
                continue;
            }
            let (a, b, c) = (sxx[i], sxy[i], syy[i]);
            let det = a * c - b * b;
            let u = (c * bx[i] - b * by[i]) / det;
            let v = (a * by[i] - b * bx[i]) / det;
            // a step longer than the window radius is not supported by the data
            if (u - flow[i][0]).hypot(v - flow[i][1]) > radius as f64 {
                continue;
            }
            max_step = max_step
                .max((u - flow[i][0]).abs())
                .max((v - flow[i][1]).abs());
            flow[i] = [u, v];
        }
        if max_step < 1e-4 {
            break;
        }
    }
}

fn upsample_flow(flow: &[[f64; 2]], from: (usize, usize), to: (usize, usize)) -> Vec<[f64; 2]> {
    let (fw, fh) = from;
    let (tw, th) = to;
    let u: Vec<f64> = flow.iter().map(|d| d[0]).collect();
    let v: Vec<f64> = flow.iter().map(|d| d[1]).collect();
    let mut out = Vec::with_capacity(tw * th);
    for y in 0..th {
        for x in 0..tw {
            // decimation keeps even samples, so fine x maps to coarse x/2
            let t = BilinearTaps::new(0.5 * x as f64, 0.5 * y as f64, fw, fh);
            out.push([2.0 * t.sample(&u, 1, 0), 2.0 * t.sample(&v, 1, 0)]);
        }
    }
    out
}

/// Resamples `img` at `p + Δp(p)` with edge-clamped bilinear interpolation.
pub fn backwarp(img: &ImageBuffer, flow: &FlowField) -> Result<ImageBuffer> {
    if !flow.matches(img) {
        return Err(Error::shape(format!(
            "backwarp: image {}x{} vs flow {}x{}",
            img.width(),
            img.height(),
            flow.width,
            flow.height
        )));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    if flow.is_zero() {
        return Ok(img.clone());
    }
    let src = img.data();
    let mut out = vec![0.0; w * h * ch];
    out.par_chunks_exact_mut(w * ch)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let (u, v) = flow.get(x, y);
                let t = BilinearTaps::new(x as f64 + u, y as f64 + v, w, h);
                for c in 0..ch {
                    row[x * ch + c] = t.sample(src, ch, c);
                }
            }
        });
    ImageBuffer::from_vec(w, h, ch, img.space(), out)
}

pub fn flo_to_bytes(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.uv.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for v in &flow.uv {
        out.extend_from_slice(&v[0].to_le_bytes());
        out.extend_from_slice(&v[1].to_le_bytes());
    }
    out
}

pub fn flo_from_bytes(bytes: &[u8]) -> std::result::Result<FlowField, String> {
    if bytes.len() < 12 {
        return Err("truncated header".into());
    }
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let i32_at = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if f32_at(0) != FLO_MAGIC {
        return Err(format!("bad magic {}", f32_at(0)));
    }
    let (w, h) = (i32_at(4), i32_at(8));
    if w < 0 || h < 0 {
        return Err(format!("negative dimensions {w}x{h}"));
    }
    let (w, h) = (w as usize, h as usize);
    let need = 12 + 8 * w * h;
    if bytes.len() != need {
        return Err(format!("expected {need} bytes, found {}", bytes.len()));
    }
    let uv = (0..w * h)
        .map(|i| [f32_at(12 + 8 * i), f32_at(16 + 8 * i)])
        .collect();
    Ok(FlowField {
        width: w,
        height: h,
        uv,
    })
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, flo_to_bytes(flow)).map_err(|e| Error::io(path, e))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    flo_from_bytes(&bytes).map_err(|reason| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    })
}
