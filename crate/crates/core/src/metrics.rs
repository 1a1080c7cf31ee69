//! PSNR and SSIM against a reference image, plus batch reporting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{load_image, ImageBuffer};

/// Value returned by [`psnr`] for identical images.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// PSNR with peak 1 over all channels, capped at [`PSNR_CAP`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_shape(b, "psnr")?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.data().len().max(1) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k
                .iter()
                .zip(&row[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW)
                .map(|i| k[i] * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM on Rec.601 luma with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let la = a.luma();
    let lb = b.luma();
    let (pa, pb) = (la.data(), lb.data());
    let k = gaussian_window();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        pa.iter().zip(pb).map(|(&x, &y)| f(x, y)).collect()
    };
    let mu_a = filter_valid(pa, w, h, &k);
    let mu_b = filter_valid(pb, w, h, &k);
    let aa = filter_valid(&prod(&|x, _| x * x), w, h, &k);
    let bb = filter_valid(&prod(&|_, y| y * y), w, h, &k);
    let ab = filter_valid(&prod(&|x, y| x * y), w, h, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub psnr: f64,
    pub ssim: f64,
}

pub fn score(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<PairScore> {
    Ok(PairScore {
        psnr: psnr(pred, gt)?,
        ssim: ssim(pred, gt)?,
    })
}

pub fn evaluate_pair(pred_path: impl AsRef<Path>, gt_path: impl AsRef<Path>) -> Result<PairScore> {
    let pred = load_image(pred_path, None)?;
    let gt = load_image(gt_path, None)?;
    score(&pred, &gt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
    pub mean: PairScore,
}

impl EvalReport {
    pub fn from_entries(entries: Vec<EvalEntry>) -> Self {
        let n = entries.len().max(1) as f64;
        let mean = PairScore {
            psnr: entries.iter().map(|e| e.psnr).sum::<f64>() / n,
            ssim: entries.iter().map(|e| e.ssim).sum::<f64>() / n,
        };
        Self { entries, mean }
    }
}

/// Scores every PNG in `pred_dir` against the same-named file in `gt_dir`.
pub fn evaluate_dirs(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>) -> Result<EvalReport> {
    let pred_dir = pred_dir.as_ref();
    let gt_dir = gt_dir.as_ref();
    let mut names: Vec<String> = std::fs::read_dir(pred_dir)
        .map_err(|e| Error::io(pred_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
        .collect();
    names.sort();
    let mut entries = Vec::with_capacity(names.len());
    for name in names {
        let s = evaluate_pair(pred_dir.join(&name), gt_dir.join(&name))?;
        entries.push(EvalEntry {
            name,
            psnr: s.psnr,
            ssim: s.ssim,
        });
    }
    Ok(EvalReport::from_entries(entries))
}
