//! Edge-clamped bilinear sampling and box filtering on interleaved buffers.

/// The four taps of an edge-clamped bilinear lookup.
///
/// Forward sampling and its adjoint splat both go through this struct so
/// that the two stay exact transposes of each other.
#[derive(Debug, Clone, Copy)]
pub struct BilinearTaps {
    pub idx: [usize; 4],
    pub weight: [f64; 4],
}

impl BilinearTaps {
    /// Taps for position `(x, y)`; out-of-frame positions clamp to the edge.
    #[inline]
    pub fn new(x: f64, y: f64, width: usize, height: usize) -> Self {
        let xc = x.clamp(0.0, (width - 1) as f64);
        let yc = y.clamp(0.0, (height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(width - 1);
        let y1 = (y0 + 1).min(height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        BilinearTaps {
            idx: [
                y0 * width + x0,
                y0 * width + x1,
                y1 * width + x0,
                y1 * width + x1,
            ],
            weight: [
                (1.0 - fx) * (1.0 - fy),
                fx * (1.0 - fy),
                (1.0 - fx) * fy,
                fx * fy,
            ],
        }
    }

    /// Interpolated value of channel `c` in an interleaved buffer.
    #[inline]
    pub fn sample(&self, data: &[f64], channels: usize, c: usize) -> f64 {
        let mut acc = 0.0;
        for t in 0..4 {
            if self.weight[t] != 0.0 {
                acc += self.weight[t] * data[self.idx[t] * channels + c];
            }
        }
        acc
    }

    #[inline]
    pub fn splat(&self, data: &mut [f64], channels: usize, c: usize, value: f64) {
        for t in 0..4 {
            if self.weight[t] != 0.0 {
                data[self.idx[t] * channels + c] += self.weight[t] * value;
            }
        }
    }
}

/// Mean over a `(2r+1)²` window of a single plane, replicating edges.
pub fn box_mean(plane: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    if radius == 0 {
        return plane.to_vec();
    }
    let horiz = box_1d(plane, width, height, radius, true);
    box_1d(&horiz, width, height, radius, false)
}

fn box_1d(plane: &[f64], width: usize, height: usize, radius: usize, along_x: bool) -> Vec<f64> {
    let (len, lines) = if along_x {
        (width, height)
    } else {
        (height, width)
    };
    let at = |line: usize, i: usize| -> usize {
        if along_x {
            line * width + i
        } else {
            i * width + line
        }
    };
    let r = radius as isize;
    let norm = 1.0 / (2 * radius + 1) as f64;
    let mut out = vec![0.0; plane.len()];
    let clamp = |i: isize| -> usize { i.clamp(0, len as isize - 1) as usize };
    for line in 0..lines {
        // running sum over the clamped window
        let mut acc: f64 = (-r..=r).map(|k| plane[at(line, clamp(k))]).sum();
        for i in 0..len {
            out[at(line, i)] = acc * norm;
            let leaving = clamp(i as isize - r);
            let entering = clamp(i as isize + r + 1);
            acc += plane[at(line, entering)] - plane[at(line, leaving)];
        }
    }
    out
}
