//! Hybrid geometry field: a smooth encoded MLP branch and a multi-resolution
//! grid branch, fused by a decoder that outputs the signed distance and a
//! geometry feature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::encoding::{encode_into, encode_tangent_into, encoded_dim};
use super::grid::{FeatureGrid, GridConfig, Stencil};
use super::mlp::{Activation, Mlp, MlpTape};
use super::param::{ParamBlock, Parameterized};
use crate::scene::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub smooth_width: usize,
    pub smooth_layers: usize,
    pub decoder_width: usize,
    pub decoder_layers: usize,
    /// Width of the feature handed to the color and compensation fields.
    pub feature_dim: usize,
    pub n_freq: usize,
    /// `None` disables the grid branch (MLP-only model).
    pub grid: Option<GridConfig>,
    pub softplus_beta: f64,
    pub init_radius: f64,
    /// Initialize to the negated sphere so the sphere interior is free space.
    /// Suited to rooms observed from the inside.
    pub inside_out: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            smooth_width: 256,
            smooth_layers: 4,
            decoder_width: 256,
            decoder_layers: 4,
            feature_dim: 256,
            n_freq: 6,
            grid: Some(GridConfig::default()),
            softplus_beta: 100.0,
            init_radius: 0.6,
            inside_out: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridGeometryField {
    pub config: GeometryConfig,
    pub smooth: Mlp,
    pub grid: Option<FeatureGrid>,
    pub decoder: Mlp,
}

/// Batched geometry output.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryOutput {
    pub sdf: Vec<f64>,
    pub gradient: Vec<Vec3>,
    /// `points x feature_dim`, row-major.
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeometryTape {
    points: usize,
    smooth: MlpTape,
    decoder: MlpTape,
    stencils: Vec<Stencil>,
}

impl HybridGeometryField {
    pub fn new(config: GeometryConfig, seed: u64) -> Self {
        let act = Activation::Softplus {
            beta: config.softplus_beta,
        };
        let pe = encoded_dim(3, config.n_freq);
        let mut dims = vec![pe];
        dims.extend(std::iter::repeat_n(config.smooth_width, config.smooth_layers.max(1)));
        let smooth = Mlp::zeros("geometry.smooth", &dims, act, true);
        let grid = config.grid.as_ref().map(FeatureGrid::zeros);
        let grid_dim = grid.as_ref().map_or(0, |g| g.output_dim());
        let mut ddims = vec![config.smooth_width + grid_dim];
        ddims.extend(std::iter::repeat_n(config.decoder_width, config.decoder_layers));
        ddims.push(1 + config.feature_dim);
        let decoder = Mlp::zeros("geometry.decoder", &ddims, act, false);
        let mut field = Self {
            config,
            smooth,
            grid,
            decoder,
        };
        if let Some(g) = field.grid.as_mut() {
            for (l, b) in g.levels.iter_mut().enumerate() {
                b.name = format!("geometry.grid.{l}");
            }
        }
        field.geometric_init(seed);
        field
    }

    /// Sphere initialization of the whole chain (smooth branch then
    /// decoder). The first layer holds `m` pairs of opposite unit directions
    /// spread over the sphere, so its activations sum to roughly
    /// `m * |x| / 2`; later hidden layers start near the identity and pass
    /// those activations through; the output row averages them into
    /// `|x| - r`. Encoded frequency inputs start disconnected.
    fn geometric_init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = self
            .smooth
            .layers
            .iter()
            .chain(&self.decoder.layers[..self.decoder.layers.len() - 1])
            .map(|l| l.output_dim());
        let m = widths.min().unwrap_or(2) / 2;
        let dirs = fibonacci_sphere(m);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let sw = self.config.smooth_width;
        let mut first = true;
        let n_dec = self.decoder.layers.len();
        let n_smooth = self.smooth.layers.len();
        for (li, l) in self
            .smooth
            .layers
            .iter_mut()
            .chain(self.decoder.layers.iter_mut().take(n_dec - 1))
            .enumerate()
        {
            l.bias.fill(0.0);
            l.weight.fill(0.0);
            let (out, inp) = (l.output_dim(), l.input_dim());
            if first {
                for (i, d) in dirs.iter().enumerate() {
                    for c in 0..3 {
                        *l.weight_at_mut(2 * i, c) = d[c];
                        *l.weight_at_mut(2 * i + 1, c) = -d[c];
                    }
                }
                for r in 2 * m..out {
                    let d = random_unit(&mut rng);
                    for c in 0..3 {
                        *l.weight_at_mut(r, c) = d[c];
                    }
                }
                first = false;
            } else {
                for r in 0..out {
                    for c in 0..inp {
                        *l.weight_at_mut(r, c) = noise.sample(&mut rng);
                    }
                }
                let id = if li == n_smooth { out.min(sw) } else { out.min(inp) };
                for r in 0..id {
                    *l.weight_at_mut(r, r) += 1.0;
                }
                if li == n_smooth {
                    // Grid columns of the fusion layer: small random weights
                    // so grid features influence the output from the start.
                    let dist = Normal::new(0.0, 1e-2).unwrap();
                    for r in 0..out {
                        for c in sw..inp {
                            *l.weight_at_mut(r, c) = dist.sample(&mut rng);
                        }
                    }
                }
            }
        }
        let last = self.decoder.layers.last_mut().unwrap();
        let inp = last.input_dim();
        let std = (1.0 / inp as f64).sqrt();
        last.init_normal(&mut rng, 0.0, std);
        let sign = if self.config.inside_out { -1.0 } else { 1.0 };
        for c in 0..inp {
            *last.weight_at_mut(0, c) = if c < 2 * m {
                sign * 2.0 / m.max(1) as f64
            } else {
                0.0
            };
        }
        last.bias.data[0] = -sign * self.config.init_radius;
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn grid_dim(&self) -> usize {
        self.grid.as_ref().map_or(0, |g| g.output_dim())
    }

    /// Signed distance and feature without derivatives.
    pub fn eval_batch(&self, xs: &[Vec3]) -> (Vec<f64>, Vec<f64>) {
        let p = xs.len();
        if p == 0 {
            return (Vec::new(), Vec::new());
        }
        let pe = encoded_dim(3, self.config.n_freq);
        let mut enc = Vec::with_capacity(p * pe);
        for x in xs {
            encode_into(x.as_slice(), self.config.n_freq, &mut enc);
        }
        let f_smooth = self.smooth.eval(&enc, p);
        let (sw, gd) = (self.config.smooth_width, self.grid_dim());
        let width = sw + gd;
        let mut fused = vec![0.0; p * width];
        for i in 0..p {
            fused[i * width..i * width + sw].copy_from_slice(&f_smooth[i * sw..(i + 1) * sw]);
            if let Some(g) = &self.grid {
                let f = g.interpolate(&[xs[i].x, xs[i].y, xs[i].z]);
                fused[i * width + sw..(i + 1) * width].copy_from_slice(&f);
            }
        }
        let out = self.decoder.eval(&fused, p);
        let od = 1 + self.config.feature_dim;
        let mut sdf = Vec::with_capacity(p);
        let mut feat = Vec::with_capacity(p * self.config.feature_dim);
        for i in 0..p {
            sdf.push(out[i * od]);
            feat.extend_from_slice(&out[i * od + 1..(i + 1) * od]);
        }
        (sdf, feat)
    }

    pub fn sdf_batch(&self, xs: &[Vec3]) -> Vec<f64> {
        self.eval_batch(xs).0
    }

    /// `(s, F_g)` at one point.
    pub fn eval(&self, x: &Vec3) -> (f64, Vec<f64>) {
        let (s, f) = self.eval_batch(std::slice::from_ref(x));
        (s[0], f)
    }

    pub fn sdf(&self, x: &Vec3) -> f64 {
        self.eval(x).0
    }

    /// Exact spatial gradient of the signed distance.
    pub fn sdf_normal(&self, x: &Vec3) -> Vec3 {
        self.forward(std::slice::from_ref(x)).0.gradient[0]
    }

    /// Values, spatial gradients and features with a tape for [`Self::backward`].
    pub fn forward(&self, xs: &[Vec3]) -> (GeometryOutput, GeometryTape) {
        let p = xs.len();
        let nf = self.config.n_freq;
        let pe = encoded_dim(3, nf);
        let mut enc = Vec::with_capacity(4 * p * pe);
        for x in xs {
            encode_into(x.as_slice(), nf, &mut enc);
        }
        for axis in 0..3 {
            for x in xs {
                encode_tangent_into(&[x.x, x.y, x.z], nf, axis, &mut enc);
            }
        }
        let (f_smooth, smooth_tape) = self.smooth.forward(enc, p, 4);
        let (sw, gd) = (self.config.smooth_width, self.grid_dim());
        let width = sw + gd;
        let mut fused = vec![0.0; 4 * p * width];
        for r in 0..4 * p {
            fused[r * width..r * width + sw].copy_from_slice(&f_smooth[r * sw..(r + 1) * sw]);
        }
        let stencils = match &self.grid {
            Some(g) => {
                let pts: Vec<[f64; 3]> = xs.iter().map(|x| [x.x, x.y, x.z]).collect();
                g.forward_streams(&pts, &mut fused, width, sw)
            }
            None => Vec::new(),
        };
        let (out, decoder_tape) = self.decoder.forward(fused, p, 4);
        let od = 1 + self.config.feature_dim;
        let mut sdf = Vec::with_capacity(p);
        let mut gradient = Vec::with_capacity(p);
        let mut feature = Vec::with_capacity(p * self.config.feature_dim);
        for i in 0..p {
            sdf.push(out[i * od]);
            gradient.push(Vec3::new(
                out[(p + i) * od],
                out[(2 * p + i) * od],
                out[(3 * p + i) * od],
            ));
            feature.extend_from_slice(&out[i * od + 1..(i + 1) * od]);
        }
        (
            GeometryOutput {
                sdf,
                gradient,
                feature,
            },
            GeometryTape {
                points: p,
                smooth: smooth_tape,
                decoder: decoder_tape,
                stencils,
            },
        )
    }

    /// Accumulates parameter gradients given upstream gradients with respect
    /// to the signed distances, their spatial gradients, and the features.
    pub fn backward(
        &self,
        tape: &GeometryTape,
        g_sdf: &[f64],
        g_gradient: &[Vec3],
        g_feature: &[f64],
        grad: &mut HybridGeometryField,
    ) {
        let p = tape.points;
        let fd = self.config.feature_dim;
        let od = 1 + fd;
        let mut g = vec![0.0; 4 * p * od];
        for i in 0..p {
            g[i * od] = g_sdf[i];
            g[i * od + 1..(i + 1) * od].copy_from_slice(&g_feature[i * fd..(i + 1) * fd]);
            for d in 0..3 {
                g[((1 + d) * p + i) * od] = g_gradient[i][d];
            }
        }
        let g_fused = self.decoder.backward(&tape.decoder, g, &mut grad.decoder);
        let (sw, gd) = (self.config.smooth_width, self.grid_dim());
        let width = sw + gd;
        let mut g_smooth = vec![0.0; 4 * p * sw];
        for r in 0..4 * p {
            g_smooth[r * sw..(r + 1) * sw].copy_from_slice(&g_fused[r * width..r * width + sw]);
        }
        if let (Some(gr), Some(gg)) = (&self.grid, grad.grid.as_mut()) {
            gr.backward_streams(&tape.stencils, p, &g_fused, width, sw, gg);
        }
        self.smooth.backward(&tape.smooth, g_smooth, &mut grad.smooth);
    }

    /// Fills grid features with uniform noise; used by tests that need a
    /// non-trivial grid branch.
    pub fn randomize_grid<R: Rng>(&mut self, rng: &mut R, amplitude: f64) {
        if let Some(g) = self.grid.as_mut() {
            for b in g.levels.iter_mut() {
                for v in b.data.iter_mut() {
                    *v = rng.random_range(-amplitude..amplitude);
                }
            }
        }
    }
}

/// `n` roughly evenly spread unit vectors.
fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), y, r * phi.sin()]
        })
        .collect()
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    let n = Normal::new(0.0, 1.0).unwrap();
    let v = Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)).normalize();
    [v.x, v.y, v.z]
}

impl Parameterized for HybridGeometryField {
    fn blocks(&self) -> Vec<&ParamBlock> {
        let mut v = self.smooth.blocks();
        if let Some(g) = &self.grid {
            v.extend(g.blocks());
        }
        v.extend(self.decoder.blocks());
        v
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        let mut v = self.smooth.blocks_mut();
        if let Some(g) = self.grid.as_mut() {
            v.extend(g.blocks_mut());
        }
        v.extend(self.decoder.blocks_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reduced() -> GeometryConfig {
        GeometryConfig {
            smooth_width: 8,
            smooth_layers: 2,
            decoder_width: 8,
            decoder_layers: 2,
            feature_dim: 4,
            n_freq: 2,
            grid: Some(GridConfig {
                levels: 2,
                channels: 4,
                min_resolution: 4,
                max_resolution: 6,
            }),
            softplus_beta: 10.0,
            init_radius: 0.5,
            inside_out: false,
        }
    }

    #[test]
    fn sphere_init_signs() {
        let cfg = GeometryConfig {
            smooth_width: 64,
            decoder_width: 64,
            feature_dim: 16,
            grid: Some(GridConfig {
                max_resolution: 32,
                ..GridConfig::default()
            }),
            ..GeometryConfig::default()
        };
        let f = HybridGeometryField::new(cfg.clone(), 0);
        assert!(f.sdf(&Vec3::zeros()) < 0.0);
        assert!(f.sdf(&Vec3::new(1.0, 1.0, 1.0)) > 0.0);
        for x in [Vec3::new(0.6, 0.0, 0.0), Vec3::new(0.0, -0.6, 0.0), Vec3::new(0.35, 0.35, 0.35)] {
            let s = f.sdf(&x);
            assert!((s - (x.norm() - 0.6)).abs() < 0.06, "{x:?}: {s}");
        }
        let inv = HybridGeometryField::new(
            GeometryConfig {
                inside_out: true,
                ..cfg
            },
            0,
        );
        assert!(inv.sdf(&Vec3::zeros()) > 0.0);
        assert!(inv.sdf(&Vec3::new(1.0, 1.0, 1.0)) < 0.0);
    }

    #[test]
    fn sphere_init_normal_points_outward() {
        let f = HybridGeometryField::new(
            GeometryConfig {
                smooth_width: 64,
                decoder_width: 64,
                feature_dim: 8,
                grid: None,
                ..GeometryConfig::default()
            },
            1,
        );
        let n = f.sdf_normal(&Vec3::new(0.5, 0.0, 0.0)).normalize();
        assert!(n.x > 0.9, "{n:?}");
    }

    #[test]
    fn pure() {
        let f = HybridGeometryField::new(reduced(), 4);
        let x = Vec3::new(0.1, 0.2, -0.3);
        assert_eq!(f.eval(&x), f.eval(&x));
        let (out, _) = f.forward(&[x, x]);
        assert_eq!(out.sdf[0].to_bits(), out.sdf[1].to_bits());
    }

    #[test]
    fn forward_matches_eval() {
        let mut f = HybridGeometryField::new(reduced(), 4);
        f.randomize_grid(&mut ChaCha8Rng::seed_from_u64(2), 0.5);
        let xs = [Vec3::new(0.1, 0.2, -0.3), Vec3::new(-0.7, 0.4, 0.05)];
        let (out, _) = f.forward(&xs);
        let (s, feat) = f.eval_batch(&xs);
        for i in 0..2 {
            assert!((out.sdf[i] - s[i]).abs() < 1e-12);
        }
        for (a, b) in out.feature.iter().zip(&feat) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_grid_leaves_smooth_output() {
        let f = HybridGeometryField::new(reduced(), 4);
        let mut g = f.clone();
        let sw = g.config.smooth_width;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = &mut g.decoder.layers[0];
        for r in 0..l.output_dim() {
            for c in sw..l.input_dim() {
                *l.weight_at_mut(r, c) = rng.random_range(-3.0..3.0);
            }
        }
        let x = Vec3::new(0.3, -0.1, 0.2);
        assert_eq!(f.eval(&x), g.eval(&x));
    }

    #[test]
    fn linear_field_gradient_is_constant() {
        // Single linear decoder with no hidden layers and an identity-like
        // smooth branch makes s affine in the encoded input.
        let mut f = HybridGeometryField::new(
            GeometryConfig {
                decoder_layers: 0,
                n_freq: 0,
                grid: None,
                smooth_width: 3,
                smooth_layers: 1,
                feature_dim: 1,
                ..reduced()
            },
            0,
        );
        f.smooth.activation = Activation::Relu;
        for r in 0..3 {
            for c in 0..3 {
                *f.smooth.layers[0].weight_at_mut(r, c) = if r == c { 1.0 } else { 0.0 };
            }
            f.smooth.layers[0].bias.data[r] = 10.0;
        }
        let a = [0.5, -2.0, 1.5];
        for (c, v) in a.iter().enumerate() {
            *f.decoder.layers[0].weight_at_mut(0, c) = *v;
        }
        for x in [Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.8, 0.5, 0.0)] {
            let g = f.sdf_normal(&x);
            assert!((g - Vec3::from(a)).norm() < 1e-12);
        }
    }

    #[test]
    fn sdf_normal_matches_finite_difference() {
        let mut f = HybridGeometryField::new(
            GeometryConfig {
                smooth_width: 16,
                decoder_width: 16,
                feature_dim: 4,
                grid: Some(GridConfig {
                    levels: 2,
                    channels: 4,
                    min_resolution: 4,
                    max_resolution: 8,
                }),
                ..GeometryConfig::default()
            },
            2,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        f.randomize_grid(&mut rng, 0.2);
        let h = 1e-3;
        let mut checked = 0;
        while checked < 100 {
            let x = Vec3::new(
                rng.random_range(-0.9..0.9),
                rng.random_range(-0.9..0.9),
                rng.random_range(-0.9..0.9),
            );
            // Keep the finite-difference stencil within one cell of every level.
            let near_boundary = f.grid.as_ref().unwrap().resolutions.iter().any(|&r| {
                x.iter().any(|c| {
                    let u = (c + 1.0) * 0.5 * (r - 1) as f64;
                    let frac = u - u.floor();
                    let margin = h * 0.5 * (r - 1) as f64;
                    frac < margin || frac > 1.0 - margin
                })
            });
            if near_boundary {
                continue;
            }
            let g = f.sdf_normal(&x);
            for d in 0..3 {
                let mut xp = x;
                xp[d] += h;
                let mut xm = x;
                xm[d] -= h;
                let fd = (f.sdf(&xp) - f.sdf(&xm)) / (2.0 * h);
                let err = (g[d] - fd).abs() / g.norm().max(1e-3);
                assert!(err < 1e-2, "x={x:?} d={d}: {} vs {fd}", g[d]);
            }
            checked += 1;
        }
    }

    /// Scalar loss touching s, its gradient and the feature; every parameter
    /// block is checked against central differences.
    #[test]
    fn parameter_gradients() {
        let mut f = HybridGeometryField::new(reduced(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        f.randomize_grid(&mut rng, 0.3);
        let xs: Vec<Vec3> = (0..3)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.9..0.9),
                    rng.random_range(-0.9..0.9),
                    rng.random_range(-0.9..0.9),
                )
            })
            .collect();
        let loss = |m: &HybridGeometryField| -> f64 {
            let (o, _) = m.forward(&xs);
            let mut l = 0.0;
            for i in 0..xs.len() {
                l += o.sdf[i] * (1.0 + i as f64);
                l += (o.gradient[i].norm() - 1.0).powi(2);
                l += o.feature[i * 4..(i + 1) * 4].iter().map(|v| v * v).sum::<f64>();
            }
            l
        };
        let (o, tape) = f.forward(&xs);
        let g_s: Vec<f64> = (0..xs.len()).map(|i| 1.0 + i as f64).collect();
        let g_n: Vec<Vec3> = o
            .gradient
            .iter()
            .map(|g| g * (2.0 * (g.norm() - 1.0) / g.norm()))
            .collect();
        let g_f: Vec<f64> = o.feature.iter().map(|v| 2.0 * v).collect();
        let mut grad = f.zeros_like();
        f.backward(&tape, &g_s, &g_n, &g_f, &mut grad);
        let h = 1e-4;
        let nb = f.blocks().len();
        for bi in 0..nb {
            let n = f.blocks()[bi].len();
            for i in 0..n {
                let an = grad.blocks()[bi].data[i];
                let mut p = f.clone();
                p.blocks_mut()[bi].data[i] += h;
                let mut m = f.clone();
                m.blocks_mut()[bi].data[i] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                let scale = an.abs().max(fd.abs()).max(1e-2);
                assert!(
                    (an - fd).abs() / scale < 1e-3,
                    "{}[{i}]: {an} vs {fd}",
                    f.blocks()[bi].name
                );
            }
        }
    }
}
