//! Multi-resolution dense feature grids over `[-1, 1]^3`.

use serde::{Deserialize, Serialize};

use super::param::{ParamBlock, Parameterized};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub levels: usize,
    pub channels: usize,
    /// Vertices per axis of the coarsest level.
    pub min_resolution: usize,
    /// Vertices per axis of the finest level.
    pub max_resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            channels: 4,
            min_resolution: 16,
            max_resolution: 512,
        }
    }
}

impl GridConfig {
    /// Geometric progression from `min_resolution` to `max_resolution`,
    /// bumped where rounding would repeat a value.
    pub fn resolutions(&self) -> Vec<usize> {
        let lo = self.min_resolution.max(2) as f64;
        let hi = (self.max_resolution.max(2) as f64).max(lo);
        let mut out: Vec<usize> = Vec::with_capacity(self.levels);
        for l in 0..self.levels {
            let t = if self.levels > 1 {
                l as f64 / (self.levels - 1) as f64
            } else {
                1.0
            };
            let mut r = (lo * (hi / lo).powf(t)).round() as usize;
            if let Some(&prev) = out.last() {
                r = r.max(prev + 1);
            }
            out.push(r);
        }
        out
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub resolutions: Vec<usize>,
    pub channels: usize,
    /// One block per level, `res^3 x channels`, index `(z * res + y) * res + x`.
    pub levels: Vec<ParamBlock>,
}

/// Interpolation stencil of one point on one level.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Stencil {
    pub corners: [usize; 8],
    pub weights: [f64; 8],
    /// `d weight / d x_k` for each corner.
    pub dweights: [[f64; 3]; 8],
}

fn axis_coord(x: f64, res: usize) -> (usize, f64, f64) {
    let scale = (res - 1) as f64 * 0.5;
    let inside = (-1.0..=1.0).contains(&x);
    let u = (x.clamp(-1.0, 1.0) + 1.0) * scale;
    let i0 = (u.floor() as usize).min(res - 2);
    let f = u - i0 as f64;
    (i0, f, if inside { scale } else { 0.0 })
}

impl FeatureGrid {
    pub fn zeros(cfg: &GridConfig) -> Self {
        let resolutions = cfg.resolutions();
        let levels = resolutions
            .iter()
            .enumerate()
            .map(|(l, &r)| ParamBlock::zeros(format!("grid.{l}"), vec![r, r, r, cfg.channels]))
            .collect();
        Self {
            resolutions,
            channels: cfg.channels,
            levels,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.resolutions.len() * self.channels
    }

    pub(crate) fn stencil(&self, level: usize, x: &[f64; 3]) -> Stencil {
        let res = self.resolutions[level];
        let a = [
            axis_coord(x[0], res),
            axis_coord(x[1], res),
            axis_coord(x[2], res),
        ];
        let mut s = Stencil::default();
        for c in 0..8 {
            let bits = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let mut w = [0.0; 3];
            let mut dw = [0.0; 3];
            for d in 0..3 {
                let (_, f, scale) = a[d];
                if bits[d] == 1 {
                    w[d] = f;
                    dw[d] = scale;
                } else {
                    w[d] = 1.0 - f;
                    dw[d] = -scale;
                }
            }
            let (ix, iy, iz) = (a[0].0 + bits[0], a[1].0 + bits[1], a[2].0 + bits[2]);
            s.corners[c] = (iz * res + iy) * res + ix;
            s.weights[c] = w[0] * w[1] * w[2];
            s.dweights[c] = [dw[0] * w[1] * w[2], w[0] * dw[1] * w[2], w[0] * w[1] * dw[2]];
        }
        s
    }

    /// Features of one point, concatenated coarse to fine.
    pub fn interpolate(&self, x: &[f64; 3]) -> Vec<f64> {
        let ch = self.channels;
        let mut out = vec![0.0; self.output_dim()];
        for (l, block) in self.levels.iter().enumerate() {
            let st = self.stencil(l, x);
            for c in 0..8 {
                let base = st.corners[c] * ch;
                for k in 0..ch {
                    out[l * ch + k] += st.weights[c] * block.data[base + k];
                }
            }
        }
        out
    }

    /// Writes value and tangent rows for `points` into `out`, which has
    /// `4 * points.len()` rows of `stride` columns starting at `offset`.
    pub(crate) fn forward_streams(
        &self,
        points: &[[f64; 3]],
        out: &mut [f64],
        stride: usize,
        offset: usize,
    ) -> Vec<Stencil> {
        let p = points.len();
        let ch = self.channels;
        let mut stencils = Vec::with_capacity(p * self.levels.len());
        for (i, x) in points.iter().enumerate() {
            for (l, block) in self.levels.iter().enumerate() {
                let st = self.stencil(l, x);
                for c in 0..8 {
                    let base = st.corners[c] * ch;
                    let w = st.weights[c];
                    let dw = st.dweights[c];
                    for k in 0..ch {
                        let v = block.data[base + k];
                        let col = offset + l * ch + k;
                        out[i * stride + col] += w * v;
                        for d in 0..3 {
                            out[((1 + d) * p + i) * stride + col] += dw[d] * v;
                        }
                    }
                }
                stencils.push(st);
            }
        }
        stencils
    }

    /// Scatters gradients of value and tangent rows into `grad`.
    pub(crate) fn backward_streams(
        &self,
        stencils: &[Stencil],
        points: usize,
        g: &[f64],
        stride: usize,
        offset: usize,
        grad: &mut FeatureGrid,
    ) {
        let ch = self.channels;
        let nl = self.levels.len();
        for i in 0..points {
            for l in 0..nl {
                let st = &stencils[i * nl + l];
                let data = &mut grad.levels[l].data;
                for k in 0..ch {
                    let col = offset + l * ch + k;
                    let gv = g[i * stride + col];
                    let gt = [
                        g[(points + i) * stride + col],
                        g[(2 * points + i) * stride + col],
                        g[(3 * points + i) * stride + col],
                    ];
                    if gv == 0.0 && gt == [0.0; 3] {
                        continue;
                    }
                    for c in 0..8 {
                        let dw = st.dweights[c];
                        data[st.corners[c] * ch + k] +=
                            st.weights[c] * gv + dw[0] * gt[0] + dw[1] * gt[1] + dw[2] * gt[2];
                    }
                }
            }
        }
    }
}

impl Parameterized for FeatureGrid {
    fn blocks(&self) -> Vec<&ParamBlock> {
        self.levels.iter().collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        self.levels.iter_mut().collect()
    }
}
