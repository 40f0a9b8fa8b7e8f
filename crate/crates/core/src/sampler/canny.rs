//! Canny edge strength: Gaussian blur, Sobel gradients, non-maximum
//! suppression and hysteresis, keeping the gradient magnitude of surviving
//! pixels.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CannyConfig {
    pub sigma: f64,
    /// Strong-edge threshold on the gradient magnitude (intensity units per pixel).
    pub high: f64,
    /// `high / low`.
    pub ratio: f64,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            high: 0.04,
            ratio: 2.0,
        }
    }
}

/// Grayscale map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureIntensityMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl TextureIntensityMap {
    pub fn nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }
}

pub fn to_gray(image: &[[f64; 3]]) -> Vec<f64> {
    image
        .iter()
        .map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2])
        .collect()
}

fn gaussian_blur(img: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-r..=r)
                .map(|i| k[(i + r) as usize] * img[y * w + clamp(x as isize + i, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-r..=r)
                .map(|i| k[(i + r) as usize] * tmp[clamp(y as isize + i, h) * w + x])
                .sum();
        }
    }
    out
}

/// Edge strength of a grayscale image with hysteresis thresholds
/// `low <= high`. Pixels that are not kept are zero.
pub fn texture_intensity(gray: &[f64], width: usize, height: usize, low: f64, high: f64, sigma: f64) -> TextureIntensityMap {
    assert_eq!(gray.len(), width * height);
    let (w, h) = (width, height);
    let b = gaussian_blur(gray, w, h, sigma);
    let at = |x: isize, y: isize| b[(y.clamp(0, h as isize - 1) as usize) * w + x.clamp(0, w as isize - 1) as usize];
    let mut mag = vec![0.0; w * h];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 8.0;
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 8.0;
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.hypot(dy);
        }
    }
    // Non-maximum suppression along the quantized gradient direction.
    let m = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let v = mag[i];
            if v <= 1e-12 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            let (ox, oy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            // Ties keep the pixel on one side only so plateaus stay one wide.
            if v > m(x - ox, y - oy) && v >= m(x + ox, y + oy) {
                thin[i] = v;
            }
        }
    }
    // Hysteresis: keep weak pixels 8-connected to a strong one.
    let mut keep = vec![false; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] >= high && thin[i] > 0.0).collect();
    for &i in &stack {
        keep[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !keep[j] && thin[j] >= low && thin[j] > 0.0 {
                    keep[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    TextureIntensityMap {
        width,
        height,
        data: (0..w * h).map(|i| if keep[i] { thin[i] } else { 0.0 }).collect(),
    }
}

/// Edge strength of an RGB image using `cfg`.
pub fn texture_intensity_rgb(image: &[[f64; 3]], width: usize, height: usize, cfg: &CannyConfig) -> TextureIntensityMap {
    texture_intensity(&to_gray(image), width, height, cfg.high / cfg.ratio, cfg.high, cfg.sigma)
}
