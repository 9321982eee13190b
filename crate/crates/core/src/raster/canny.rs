use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::BinaryImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CannyParams {
    /// Gaussian blur standard deviation, pixels.
    pub sigma: f64,
    /// Low hysteresis threshold as a fraction of the peak gradient.
    pub low: f64,
    /// High hysteresis threshold as a fraction of the peak gradient.
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams { sigma: 1.4, low: 0.1, high: 0.3 }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be finite and non-negative"));
        }
        if !(0.0 < self.low && self.low < self.high && self.high <= 1.0) {
            return Err(Error::invalid("thresholds", "need 0 < low < high <= 1"));
        }
        Ok(())
    }
}

/// Per-pixel gradient magnitude and orientation in `[-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl GradientField {
    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable Gaussian blur with replicated borders. `sigma == 0` copies.
pub fn gaussian_blur(data: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let radius = libm::ceil(3.0 * sigma) as isize;
    let mut kernel: Vec<f64> =
        (-radius..=radius).map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma))).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut tmp = vec![0.0; data.len()];
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let c = clamp_idx(col as isize + k as isize - radius, width);
                acc += w * data[row * width + c];
            }
            tmp[row * width + col] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let r = clamp_idx(row as isize + k as isize - radius, height);
                acc += w * tmp[r * width + col];
            }
            out[row * width + col] = acc;
        }
    }
    out
}

/// 3x3 Sobel gradients with replicated borders.
pub fn sobel(data: &[f64], width: usize, height: usize) -> GradientField {
    let at = |c: isize, r: isize| data[clamp_idx(r, height) * width + clamp_idx(c, width)];
    let mut magnitude = vec![0.0; data.len()];
    let mut orientation = vec![0.0; data.len()];
    for row in 0..height as isize {
        for col in 0..width as isize {
            let gx = (at(col + 1, row - 1) + 2.0 * at(col + 1, row) + at(col + 1, row + 1))
                - (at(col - 1, row - 1) + 2.0 * at(col - 1, row) + at(col - 1, row + 1));
            let gy = (at(col - 1, row + 1) + 2.0 * at(col, row + 1) + at(col + 1, row + 1))
                - (at(col - 1, row - 1) + 2.0 * at(col, row - 1) + at(col + 1, row - 1));
            let i = row as usize * width + col as usize;
            magnitude[i] = libm::hypot(gx, gy);
            orientation[i] = libm::atan2(gy, gx);
        }
    }
    GradientField { width, height, magnitude, orientation }
}

/// Quantized gradient direction: 0 = horizontal, 1 = diagonal down-right,
/// 2 = vertical, 3 = diagonal up-right.
pub(crate) fn direction_sector(theta: f64) -> usize {
    let mut deg = theta.to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if !(22.5..157.5).contains(&deg) {
        0
    } else if deg < 67.5 {
        1
    } else if deg < 112.5 {
        2
    } else {
        3
    }
}

fn non_maximum_suppression(g: &GradientField) -> Vec<f64> {
    let (w, h) = (g.width, g.height);
    let m = |c: isize, r: isize| -> f64 {
        if c < 0 || r < 0 || c >= w as isize || r >= h as isize {
            0.0
        } else {
            g.magnitude[r as usize * w + c as usize]
        }
    };
    let mut out = vec![0.0; w * h];
    for row in 0..h as isize {
        for col in 0..w as isize {
            let i = row as usize * w + col as usize;
            let mag = g.magnitude[i];
            if mag <= 0.0 {
                continue;
            }
            let (dc, dr) = match direction_sector(g.orientation[i]) {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (1, -1),
            };
            // Ties along the gradient go to the pixel on the positive side,
            // so a plateau two pixels wide yields a single edge pixel.
            let ahead = m(col + dc, row + dr);
            let behind = m(col - dc, row - dr);
            if mag >= ahead && mag > behind {
                out[i] = mag;
            }
        }
    }
    out
}

/// Canny edge map: Gaussian blur, Sobel gradients, non-maximum suppression
/// and double-threshold hysteresis over 8-connected neighbors. The output
/// keeps `img`'s transform.
pub fn canny(img: &BinaryImage, params: &CannyParams) -> Result<BinaryImage> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let blurred = gaussian_blur(&img.to_f64(), w, h, params.sigma);
    let grad = sobel(&blurred, w, h);
    let peak = grad.max_magnitude();
    let mut edges = img.clone();
    edges.pixels.iter_mut().for_each(|p| *p = false);
    if peak <= 1e-12 {
        return Ok(edges);
    }
    let thin = non_maximum_suppression(&grad);
    let (low, high) = (params.low * peak, params.high * peak);

    let mut stack: Vec<usize> = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            edges.pixels[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (c, r) = ((i % w) as isize, (i / w) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if !edges.pixels[j] && thin[j] >= low {
                    edges.pixels[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}
