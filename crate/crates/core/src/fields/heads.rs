//! Color and compensation fields. Both read `(x, encoded v, n, F_g)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use super::encoding::{encode_into, encoded_dim};
use super::mlp::{sigmoid, Activation, Mlp, MlpTape};
use super::param::{ParamBlock, Parameterized};
use super::rotation::Angles;
use crate::scene::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub width: usize,
    pub layers: usize,
    pub view_freq: usize,
}

impl HeadConfig {
    pub fn color_default() -> Self {
        Self {
            width: 256,
            layers: 4,
            view_freq: 4,
        }
    }

    pub fn compensation_default() -> Self {
        Self {
            width: 128,
            layers: 4,
            view_freq: 4,
        }
    }
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self::color_default()
    }
}

fn input_dim(view_freq: usize, feature_dim: usize) -> usize {
    3 + encoded_dim(3, view_freq) + 3 + feature_dim
}

/// Column offset of the normal inside a head input row.
fn normal_offset(view_freq: usize) -> usize {
    3 + encoded_dim(3, view_freq)
}

/// Inputs of one batch of head evaluations.
#[derive(Debug, Clone, Copy)]
pub struct HeadInput<'a> {
    pub x: &'a [Vec3],
    pub view: &'a [Vec3],
    /// Unit normals.
    pub normal: &'a [Vec3],
    /// `points x feature_dim`.
    pub feature: &'a [f64],
}

impl HeadInput<'_> {
    fn rows(&self, view_freq: usize, feature_dim: usize) -> Vec<f64> {
        let p = self.x.len();
        let mut out = Vec::with_capacity(p * input_dim(view_freq, feature_dim));
        for i in 0..p {
            out.extend_from_slice(self.x[i].as_slice());
            encode_into(self.view[i].as_slice(), view_freq, &mut out);
            out.extend_from_slice(self.normal[i].as_slice());
            out.extend_from_slice(&self.feature[i * feature_dim..(i + 1) * feature_dim]);
        }
        out
    }
}

/// Gradients with respect to the differentiable head inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadInputGrad {
    pub normal: Vec<Vec3>,
    pub feature: Vec<f64>,
}

fn split_input_grad(g: &[f64], p: usize, view_freq: usize, feature_dim: usize) -> HeadInputGrad {
    let w = input_dim(view_freq, feature_dim);
    let no = normal_offset(view_freq);
    let mut normal = Vec::with_capacity(p);
    let mut feature = Vec::with_capacity(p * feature_dim);
    for i in 0..p {
        let r = &g[i * w..(i + 1) * w];
        normal.push(Vec3::new(r[no], r[no + 1], r[no + 2]));
        feature.extend_from_slice(&r[no + 3..]);
    }
    HeadInputGrad { normal, feature }
}

fn build_mlp(name: &str, cfg: &HeadConfig, feature_dim: usize, out: usize) -> Mlp {
    let mut dims = vec![input_dim(cfg.view_freq, feature_dim)];
    dims.extend(std::iter::repeat_n(cfg.width, cfg.layers));
    dims.push(out);
    Mlp::zeros(name, &dims, Activation::Relu, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorField {
    pub config: HeadConfig,
    pub feature_dim: usize,
    pub mlp: Mlp,
}

#[derive(Debug, Clone)]
pub struct HeadTape {
    points: usize,
    mlp: MlpTape,
    out: Vec<f64>,
}

impl ColorField {
    pub fn new(config: HeadConfig, feature_dim: usize, seed: u64) -> Self {
        let mut mlp = build_mlp("color", &config, feature_dim, 3);
        mlp.init_default(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            config,
            feature_dim,
            mlp,
        }
    }

    pub fn eval(&self, input: &HeadInput) -> Vec<[f64; 3]> {
        self.forward(input).0
    }

    pub fn forward(&self, input: &HeadInput) -> (Vec<[f64; 3]>, HeadTape) {
        let p = input.x.len();
        let rows = input.rows(self.config.view_freq, self.feature_dim);
        let (y, tape) = self.mlp.forward(rows, p, 1);
        let out: Vec<f64> = y.iter().map(|v| sigmoid(*v)).collect();
        let c = out.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        (
            c,
            HeadTape {
                points: p,
                mlp: tape,
                out,
            },
        )
    }

    pub fn backward(&self, tape: &HeadTape, g_color: &[[f64; 3]], grad: &mut ColorField) -> HeadInputGrad {
        let g: Vec<f64> = g_color
            .iter()
            .flatten()
            .zip(&tape.out)
            .map(|(g, c)| g * c * (1.0 - c))
            .collect();
        let gi = self.mlp.backward(&tape.mlp, g, &mut grad.mlp);
        split_input_grad(&gi, tape.points, self.config.view_freq, self.feature_dim)
    }
}

impl Parameterized for ColorField {
    fn blocks(&self) -> Vec<&ParamBlock> {
        self.mlp.blocks()
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        self.mlp.blocks_mut()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationField {
    pub config: HeadConfig,
    pub feature_dim: usize,
    /// Angle cap `A`; outputs are `A * tanh(y)`.
    pub angle_cap: f64,
    pub mlp: Mlp,
}

impl CompensationField {
    /// Hidden layers are randomly initialized; the output layer starts at
    /// zero so every angle is zero until training moves it.
    pub fn new(config: HeadConfig, feature_dim: usize, seed: u64) -> Self {
        let mut mlp = build_mlp("compensation", &config, feature_dim, 3);
        mlp.init_default(&mut ChaCha8Rng::seed_from_u64(seed));
        let last = mlp.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
        Self {
            config,
            feature_dim,
            angle_cap: FRAC_PI_4,
            mlp,
        }
    }

    pub fn eval(&self, input: &HeadInput) -> Vec<Angles> {
        self.forward(input).0
    }

    pub fn forward(&self, input: &HeadInput) -> (Vec<Angles>, HeadTape) {
        let p = input.x.len();
        let rows = input.rows(self.config.view_freq, self.feature_dim);
        let (y, tape) = self.mlp.forward(rows, p, 1);
        let out: Vec<f64> = y.iter().map(|v| v.tanh()).collect();
        let a = out
            .chunks_exact(3)
            .map(|t| Angles::new(self.angle_cap * t[0], self.angle_cap * t[1], self.angle_cap * t[2]))
            .collect();
        (
            a,
            HeadTape {
                points: p,
                mlp: tape,
                out,
            },
        )
    }

    pub fn backward(&self, tape: &HeadTape, g_angles: &[[f64; 3]], grad: &mut CompensationField) -> HeadInputGrad {
        let g: Vec<f64> = g_angles
            .iter()
            .flatten()
            .zip(&tape.out)
            .map(|(g, t)| g * self.angle_cap * (1.0 - t * t))
            .collect();
        let gi = self.mlp.backward(&tape.mlp, g, &mut grad.mlp);
        split_input_grad(&gi, tape.points, self.config.view_freq, self.feature_dim)
    }
}

impl Parameterized for CompensationField {
    fn blocks(&self) -> Vec<&ParamBlock> {
        self.mlp.blocks()
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        self.mlp.blocks_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    struct Batch {
        x: Vec<Vec3>,
        v: Vec<Vec3>,
        n: Vec<Vec3>,
        f: Vec<f64>,
    }

    fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize()
    }

    fn batch(p: usize, fd: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch {
            x: (0..p).map(|_| unit(&mut rng) * 0.7).collect(),
            v: (0..p).map(|_| unit(&mut rng)).collect(),
            n: (0..p).map(|_| unit(&mut rng)).collect(),
            f: (0..p * fd).map(|_| rng.random_range(-2.0..2.0)).collect(),
        }
    }

    impl Batch {
        fn input(&self) -> HeadInput<'_> {
            HeadInput {
                x: &self.x,
                view: &self.v,
                normal: &self.n,
                feature: &self.f,
            }
        }
    }

    fn tiny() -> HeadConfig {
        HeadConfig {
            width: 8,
            layers: 2,
            view_freq: 2,
        }
    }

    #[test]
    fn color_in_unit_cube() {
        let c = ColorField::new(HeadConfig { width: 32, ..tiny() }, 8, 1);
        let b = batch(1000, 8, 2);
        let out = c.eval(&b.input());
        assert!(out.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(out, c.eval(&b.input()));
    }

    #[test]
    fn zero_init_compensation_is_identity() {
        let nc = CompensationField::new(tiny(), 8, 1);
        let b = batch(50, 8, 3);
        assert!(nc.eval(&b.input()).iter().all(|a| *a == Angles::default()));
    }

    #[test]
    fn compensation_angles_capped() {
        let mut nc = CompensationField::new(HeadConfig { width: 32, ..tiny() }, 8, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for v in nc.mlp.layers.last_mut().unwrap().weight.data.iter_mut() {
            *v = rng.random_range(-50.0..50.0);
        }
        let b = batch(1000, 8, 5);
        let cap = nc.angle_cap;
        assert!(nc
            .eval(&b.input())
            .iter()
            .all(|a| a.as_array().iter().all(|v| v.abs() <= cap)));
    }

    #[test]
    fn color_parameter_and_input_gradients() {
        let c = ColorField::new(tiny(), 3, 7);
        let b = batch(4, 3, 8);
        let w = [0.3, -1.2, 0.8];
        let loss = |m: &ColorField, b: &Batch| -> f64 {
            m.eval(&b.input())
                .iter()
                .map(|c| c.iter().zip(&w).map(|(a, w)| a * a * w).sum::<f64>())
                .sum()
        };
        let (out, tape) = c.forward(&b.input());
        let g: Vec<[f64; 3]> = out
            .iter()
            .map(|c| [2.0 * c[0] * w[0], 2.0 * c[1] * w[1], 2.0 * c[2] * w[2]])
            .collect();
        let mut grad = c.zeros_like();
        let gi = c.backward(&tape, &g, &mut grad);
        let h = 1e-6;
        for bi in 0..c.blocks().len() {
            for i in 0..c.blocks()[bi].len() {
                let mut p = c.clone();
                p.blocks_mut()[bi].data[i] += h;
                let mut m = c.clone();
                m.blocks_mut()[bi].data[i] -= h;
                let fd = (loss(&p, &b) - loss(&m, &b)) / (2.0 * h);
                let an = grad.blocks()[bi].data[i];
                assert!((an - fd).abs() <= 1e-4 * an.abs().max(fd.abs()).max(1e-3));
            }
        }
        for i in 0..4 {
            for d in 0..3 {
                let mut bp = batch(4, 3, 8);
                bp.n[i][d] += h;
                let mut bm = batch(4, 3, 8);
                bm.n[i][d] -= h;
                let fd = (loss(&c, &bp) - loss(&c, &bm)) / (2.0 * h);
                assert!((gi.normal[i][d] - fd).abs() < 1e-7);
            }
            for k in 0..3 {
                let mut bp = batch(4, 3, 8);
                bp.f[i * 3 + k] += h;
                let mut bm = batch(4, 3, 8);
                bm.f[i * 3 + k] -= h;
                let fd = (loss(&c, &bp) - loss(&c, &bm)) / (2.0 * h);
                assert!((gi.feature[i * 3 + k] - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn compensation_parameter_gradients() {
        let mut nc = CompensationField::new(tiny(), 3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for v in nc.mlp.layers.last_mut().unwrap().weight.data.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        let b = batch(4, 3, 10);
        let loss = |m: &CompensationField| -> f64 {
            m.eval(&b.input())
                .iter()
                .map(|a| a.gamma.sin() + a.beta * a.beta - 0.5 * a.theta)
                .sum()
        };
        let (out, tape) = nc.forward(&b.input());
        let g: Vec<[f64; 3]> = out
            .iter()
            .map(|a| [a.gamma.cos(), 2.0 * a.beta, -0.5])
            .collect();
        let mut grad = nc.zeros_like();
        nc.backward(&tape, &g, &mut grad);
        let h = 1e-6;
        for bi in 0..nc.blocks().len() {
            for i in 0..nc.blocks()[bi].len() {
                let mut p = nc.clone();
                p.blocks_mut()[bi].data[i] += h;
                let mut m = nc.clone();
                m.blocks_mut()[bi].data[i] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                let an = grad.blocks()[bi].data[i];
                assert!((an - fd).abs() <= 1e-4 * an.abs().max(fd.abs()).max(1e-3));
            }
        }
    }
}
