//! Batched differentiable rendering of rays through the scene model.

use serde::{Deserialize, Serialize};

use super::alpha::{alpha_with_grad, AlphaGrad};
use super::composite::{composite_alpha_grad, transmittances};
use super::ray::Ray;
use super::sampling::{sample_rays, SamplingConfig};
use crate::fields::{
    compensate_normal, compensate_normal_jacobian, rotation_matrix, Angles, GeometryTape, HeadInput,
    HeadTape, SceneModel,
};
use crate::scene::Vec3;

/// Training stage. In stage one the compensation field is bypassed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Stage {
    One,
    Two,
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        match s {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Stage::One),
            2 => Ok(Stage::Two),
            _ => Err(format!("stage must be 1 or 2, got {v}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub stage: Stage,
    pub sampling: SamplingConfig,
    /// Add the learnable background color weighted by leftover transmittance.
    pub background: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            stage: Stage::Two,
            sampling: SamplingConfig::default(),
            background: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderedPixel {
    /// Composited radiance plus the background term.
    pub color: [f64; 3],
    /// Composited radiance only.
    pub foreground: [f64; 3],
    pub normal_comp: [f64; 3],
    pub normal_sdf: [f64; 3],
    /// `sum_i w_i`.
    pub weight: f64,
    /// `sum_i w_i t_i`.
    pub depth: f64,
}

/// Everything computed along one ray.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RaySampleSet {
    pub t: Vec<f64>,
    pub sdf: Vec<f64>,
    /// `len x feature_dim`.
    pub feature: Vec<f64>,
    /// Raw spatial gradient of the signed distance.
    pub n_sdf: Vec<Vec3>,
    /// Unit gradient direction after compensation.
    pub n_comp: Vec<Vec3>,
    pub angles: Vec<Angles>,
    pub color: Vec<[f64; 3]>,
    /// `alpha_i` for the interval after sample `i`; the last one is zero.
    pub alpha: Vec<f64>,
    /// `T_i`, plus the transmittance left after the last sample.
    pub transmittance: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RaySampleSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn unit_normals(&self) -> Vec<Vec3> {
        self.n_sdf.iter().map(|g| unit(g)).collect()
    }
}

fn unit(g: &Vec3) -> Vec3 {
    g / g.norm().max(1e-12)
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// State kept for [`backward`].
pub struct BatchTape {
    offsets: Vec<usize>,
    stage: Stage,
    background: bool,
    geometry: GeometryTape,
    color: HeadTape,
    compensation: Option<HeadTape>,
    alpha_grads: Vec<AlphaGrad>,
}

pub struct RenderBatch {
    pub pixels: Vec<RenderedPixel>,
    pub samples: Vec<RaySampleSet>,
    pub tape: BatchTape,
}

/// Upstream gradient of a scalar loss with respect to one rendered pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelGrad {
    pub color: [f64; 3],
    pub normal_comp: [f64; 3],
    pub normal_sdf: [f64; 3],
}

/// Places samples on every ray and renders them.
pub fn render_rays(model: &SceneModel, rays: &[Ray], opts: &RenderOptions, seeds: Option<&[u64]>) -> RenderBatch {
    let ts = sample_rays(rays, &opts.sampling, seeds, |p| model.geometry.sdf_batch(p));
    render_with_samples(model, rays, ts, opts)
}

/// Renders rays at given sample distances.
pub fn render_with_samples(model: &SceneModel, rays: &[Ray], ts: Vec<Vec<f64>>, opts: &RenderOptions) -> RenderBatch {
    let mut offsets = Vec::with_capacity(rays.len() + 1);
    offsets.push(0);
    let mut xs = Vec::new();
    let mut views = Vec::new();
    for (r, t) in rays.iter().zip(&ts) {
        for v in t {
            xs.push(r.at(*v));
            views.push(r.dir);
        }
        offsets.push(xs.len());
    }
    let (geo, geometry_tape) = model.geometry.forward(&xs);
    let nhat: Vec<Vec3> = geo.gradient.iter().map(unit).collect();
    let head_in = HeadInput {
        x: &xs,
        view: &views,
        normal: &nhat,
        feature: &geo.feature,
    };
    let (colors, color_tape) = model.color.forward(&head_in);
    let (angles, comp_tape) = match opts.stage {
        Stage::One => (vec![Angles::default(); xs.len()], None),
        Stage::Two => {
            let (a, t) = model.compensation.forward(&head_in);
            (a, Some(t))
        }
    };
    let n_comp: Vec<Vec3> = match opts.stage {
        Stage::One => nhat.clone(),
        Stage::Two => nhat
            .iter()
            .zip(&angles)
            .map(|(n, a)| compensate_normal(n, a))
            .collect(),
    };
    let tau = model.tau();
    let bg = if opts.background {
        model.background_color()
    } else {
        [0.0; 3]
    };
    let fd = model.geometry.feature_dim();
    let mut alpha_grads = Vec::with_capacity(xs.len());
    let mut pixels = Vec::with_capacity(rays.len());
    let mut samples = Vec::with_capacity(rays.len());
    for (ri, t) in ts.into_iter().enumerate() {
        let (a, b) = (offsets[ri], offsets[ri + 1]);
        let n = b - a;
        let mut alpha = Vec::with_capacity(n);
        for i in a..b {
            let g = if i + 1 < b {
                alpha_with_grad(geo.sdf[i], geo.sdf[i + 1], tau)
            } else {
                AlphaGrad {
                    alpha: 0.0,
                    d_s: 0.0,
                    d_next: 0.0,
                    d_tau: 0.0,
                }
            };
            alpha.push(g.alpha);
            alpha_grads.push(g);
        }
        let trans = transmittances(&alpha);
        let weights: Vec<f64> = alpha.iter().zip(&trans).map(|(a, t)| a * t).collect();
        let mut px = RenderedPixel::default();
        for (k, i) in (a..b).enumerate() {
            let w = weights[k];
            for c in 0..3 {
                px.foreground[c] += w * colors[i][c];
                px.normal_comp[c] += w * n_comp[i][c];
                px.normal_sdf[c] += w * nhat[i][c];
            }
            px.weight += w;
            px.depth += w * t[k];
        }
        let t_end = trans[n];
        for c in 0..3 {
            px.color[c] = px.foreground[c] + t_end * bg[c];
        }
        pixels.push(px);
        samples.push(RaySampleSet {
            t,
            sdf: geo.sdf[a..b].to_vec(),
            feature: geo.feature[a * fd..b * fd].to_vec(),
            n_sdf: geo.gradient[a..b].to_vec(),
            n_comp: n_comp[a..b].to_vec(),
            angles: angles[a..b].to_vec(),
            color: colors[a..b].to_vec(),
            alpha,
            transmittance: trans,
            weights,
        });
    }
    RenderBatch {
        pixels,
        samples,
        tape: BatchTape {
            offsets,
            stage: opts.stage,
            background: opts.background,
            geometry: geometry_tape,
            color: color_tape,
            compensation: comp_tape,
            alpha_grads,
        },
    }
}

/// Accumulates parameter gradients into `grad`.
///
/// `pixel_grads` holds the loss gradient per rendered pixel and
/// `grad_norm[r][i]` the gradient with respect to `|n_sdf|` of sample `i` on
/// ray `r` (the Eikonal term). Compensation parameters only receive gradient
/// in stage two.
pub fn backward(
    model: &SceneModel,
    batch: &RenderBatch,
    pixel_grads: &[PixelGrad],
    grad_norm: &[Vec<f64>],
    grad: &mut SceneModel,
) {
    let tape = &batch.tape;
    let total = *tape.offsets.last().unwrap();
    let fd = model.geometry.feature_dim();
    let tau = model.tau();
    let bg = if tape.background {
        model.background_color()
    } else {
        [0.0; 3]
    };
    let mut g_s = vec![0.0; total];
    let mut g_color = vec![[0.0; 3]; total];
    let mut g_ncomp = vec![[0.0; 3]; total];
    let mut g_nhat = vec![Vec3::zeros(); total];
    let mut g_tau = 0.0;
    let mut g_bg = [0.0; 3];
    for (ri, smp) in batch.samples.iter().enumerate() {
        let (a, b) = (tape.offsets[ri], tape.offsets[ri + 1]);
        let pg = &pixel_grads[ri];
        let n = b - a;
        let nhat = smp.unit_normals();
        let ncomp: Vec<[f64; 3]> = smp.n_comp.iter().map(arr).collect();
        let nh: Vec<[f64; 3]> = nhat.iter().map(arr).collect();
        let mut g_alpha = vec![0.0; n];
        composite_alpha_grad(&smp.color, &smp.alpha, bg, pg.color, &mut g_alpha);
        composite_alpha_grad(&ncomp, &smp.alpha, [0.0; 3], pg.normal_comp, &mut g_alpha);
        composite_alpha_grad(&nh, &smp.alpha, [0.0; 3], pg.normal_sdf, &mut g_alpha);
        let t_end = smp.transmittance[n];
        if tape.background {
            for c in 0..3 {
                g_bg[c] += pg.color[c] * t_end;
            }
        }
        for k in 0..n {
            let i = a + k;
            let w = smp.weights[k];
            let ag = &tape.alpha_grads[i];
            g_s[i] += g_alpha[k] * ag.d_s;
            if k + 1 < n {
                g_s[i + 1] += g_alpha[k] * ag.d_next;
            }
            g_tau += g_alpha[k] * ag.d_tau;
            for c in 0..3 {
                g_color[i][c] = w * pg.color[c];
                g_ncomp[i][c] = w * pg.normal_comp[c];
                g_nhat[i][c] = w * pg.normal_sdf[c];
            }
        }
    }
    let mut g_feat = vec![0.0; total * fd];
    let nhat_all: Vec<Vec3> = batch
        .samples
        .iter()
        .flat_map(|s| s.n_sdf.iter().map(unit))
        .collect();
    match (tape.stage, &tape.compensation) {
        (Stage::Two, Some(ct)) => {
            let mut g_angles = vec![[0.0; 3]; total];
            let mut i = 0;
            for smp in &batch.samples {
                for k in 0..smp.len() {
                    let gn = Vec3::from(g_ncomp[i]);
                    let a = &smp.angles[k];
                    g_nhat[i] += rotation_matrix(a).transpose() * gn;
                    let j = compensate_normal_jacobian(&nhat_all[i], a);
                    g_angles[i] = [j[0].dot(&gn), j[1].dot(&gn), j[2].dot(&gn)];
                    i += 1;
                }
            }
            let gi = model.compensation.backward(ct, &g_angles, &mut grad.compensation);
            for i in 0..total {
                g_nhat[i] += gi.normal[i];
            }
            for (d, s) in g_feat.iter_mut().zip(&gi.feature) {
                *d += s;
            }
        }
        _ => {
            for i in 0..total {
                g_nhat[i] += Vec3::from(g_ncomp[i]);
            }
        }
    }
    let gi = model.color.backward(&tape.color, &g_color, &mut grad.color);
    for i in 0..total {
        g_nhat[i] += gi.normal[i];
    }
    for (d, s) in g_feat.iter_mut().zip(&gi.feature) {
        *d += s;
    }
    let mut g_grad = Vec::with_capacity(total);
    let mut i = 0;
    for (ri, smp) in batch.samples.iter().enumerate() {
        for k in 0..smp.len() {
            let g = smp.n_sdf[k];
            let norm = g.norm().max(1e-12);
            let nh = g / norm;
            let gn = g_nhat[i];
            let mut v = (gn - nh * nh.dot(&gn)) / norm;
            v += nh * grad_norm[ri][k];
            g_grad.push(v);
            i += 1;
        }
    }
    model
        .geometry
        .backward(&tape.geometry, &g_s, &g_grad, &g_feat, &mut grad.geometry);
    grad.log_tau.data[0] += g_tau * tau;
    for c in 0..3 {
        grad.background.data[c] += g_bg[c] * bg[c] * (1.0 - bg[c]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{GeometryConfig, GridConfig, HeadConfig, ModelConfig, Parameterized};
    use crate::render::composite::composite;
    use crate::render::ray::PixelId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_model(seed: u64) -> SceneModel {
        let head = HeadConfig {
            width: 8,
            layers: 2,
            view_freq: 2,
        };
        SceneModel::new(
            ModelConfig {
                geometry: GeometryConfig {
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
                },
                color: head.clone(),
                compensation: head,
                init_tau: 5.0,
                ..ModelConfig::default()
            },
            seed,
        )
    }

    fn rays(n: usize, seed: u64) -> Vec<Ray> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let target = Vec3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                );
                let origin = Vec3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    0.95,
                );
                Ray {
                    origin,
                    dir: (target - origin).normalize(),
                    near: 0.05,
                    far: 1.6,
                    pixel: PixelId {
                        view: 0,
                        row: i,
                        col: 0,
                    },
                }
            })
            .collect()
    }

    fn opts(stage: Stage, n: usize) -> RenderOptions {
        RenderOptions {
            stage,
            sampling: SamplingConfig {
                n_uniform: n,
                n_importance: 0,
                ..Default::default()
            },
            background: true,
        }
    }

    fn perturb(m: &mut SceneModel, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.geometry.randomize_grid(&mut rng, 0.05);
        for v in m.compensation.mlp.layers.last_mut().unwrap().weight.data.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        for v in m.background.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }

    #[test]
    fn stage_one_bypasses_compensation() {
        let mut m = tiny_model(1);
        perturb(&mut m, 2);
        let rs = rays(5, 3);
        let b = render_rays(&m, &rs, &opts(Stage::One, 16), None);
        for p in &b.pixels {
            assert_eq!(p.normal_comp, p.normal_sdf);
        }
    }

    #[test]
    fn zero_compensation_head_is_identity_in_stage_two() {
        let m = tiny_model(1);
        let b = render_rays(&m, &rays(5, 3), &opts(Stage::Two, 16), None);
        for p in &b.pixels {
            for c in 0..3 {
                assert!((p.normal_comp[c] - p.normal_sdf[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invariants_and_brute_force() {
        let mut m = tiny_model(4);
        perturb(&mut m, 5);
        let rs = rays(20, 6);
        let b = render_rays(&m, &rs, &opts(Stage::Two, 5), None);
        for (p, s) in b.pixels.iter().zip(&b.samples) {
            assert!(s.t.windows(2).all(|w| w[0] < w[1]));
            assert!(s.transmittance.windows(2).all(|w| w[1] <= w[0]));
            assert!(p.weight <= 1.0 + 1e-6);
            assert!(p.foreground.iter().all(|c| *c >= 0.0 && *c <= p.weight + 1e-12));
            let c = composite(&s.color, &s.alpha);
            for k in 0..3 {
                assert!((c[k] - p.foreground[k]).abs() < 1e-12);
            }
        }
    }

    fn scalar_loss(m: &SceneModel, rs: &[Ray], ts: &[Vec<f64>], stage: Stage, pg: &[PixelGrad], en: &[f64]) -> f64 {
        let b = render_with_samples(m, rs, ts.to_vec(), &opts(stage, 0));
        let mut l = 0.0;
        for (ri, (p, s)) in b.pixels.iter().zip(&b.samples).enumerate() {
            for c in 0..3 {
                l += pg[ri].color[c] * p.color[c]
                    + pg[ri].normal_comp[c] * p.normal_comp[c]
                    + pg[ri].normal_sdf[c] * p.normal_sdf[c];
            }
            for g in &s.n_sdf {
                l += en[ri] * g.norm();
            }
        }
        l
    }

    /// Linear loss in every rendered output plus a norm term; analytic
    /// gradients of all parameter blocks are compared to central differences.
    #[test]
    fn parameter_gradients_end_to_end() {
        for stage in [Stage::One, Stage::Two] {
            let mut m = tiny_model(7);
            perturb(&mut m, 8);
            let rs = rays(3, 9);
            let ts: Vec<Vec<f64>> = rs
                .iter()
                .map(|r| (0..6).map(|i| r.near + (i as f64 + 0.5) * (r.far - r.near) / 6.0).collect())
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            let mut rv = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let pg: Vec<PixelGrad> = (0..3)
                .map(|_| PixelGrad {
                    color: rv(),
                    normal_comp: rv(),
                    normal_sdf: rv(),
                })
                .collect();
            let en = [0.3, -0.2, 0.5];
            let b = render_with_samples(&m, &rs, ts.clone(), &opts(stage, 0));
            let gn: Vec<Vec<f64>> = b.samples.iter().enumerate().map(|(r, s)| vec![en[r]; s.len()]).collect();
            let mut grad = m.zeros_like();
            backward(&m, &b, &pg, &gn, &mut grad);
            let h = 1e-5;
            let groups = m.groups();
            for bi in 0..m.blocks().len() {
                let len = m.blocks()[bi].len();
                let stride = (len / 25).max(1);
                for i in (0..len).step_by(stride) {
                    let an = grad.blocks()[bi].data[i];
                    let mut p = m.clone();
                    p.blocks_mut()[bi].data[i] += h;
                    let mut q = m.clone();
                    q.blocks_mut()[bi].data[i] -= h;
                    let fd = (scalar_loss(&p, &rs, &ts, stage, &pg, &en) - scalar_loss(&q, &rs, &ts, stage, &pg, &en))
                        / (2.0 * h);
                    let scale = an.abs().max(fd.abs()).max(1e-3);
                    assert!(
                        (an - fd).abs() / scale < 1e-3,
                        "{stage:?} {}[{i}]: {an} vs {fd}",
                        m.blocks()[bi].name
                    );
                    if stage == Stage::One && groups[bi] == crate::fields::Group::Compensation {
                        assert_eq!(an, 0.0);
                    }
                }
            }
        }
    }
}
