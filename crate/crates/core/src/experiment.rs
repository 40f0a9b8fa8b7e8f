//! Evaluation of trained models against synthetic ground truth, and the
//! controlled runs built on it.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fields::{compensate_normal, HeadInput, SceneModel};
use crate::mesh::{
    cull_to_views, eval_metrics, extract_mesh, gt_point_cloud, sample_surface, subsample, EvalReport, Mesh,
    MeshOptions, ViewFrustum,
};
use crate::render::unit_domain;
use crate::scene::{rotation_from_axis_angle, AnalyticScene, BiasSpec, AxisRule, SynthConfig, SynthData, Vec3};
use crate::train::{TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub mesh: MeshOptions,
    /// Points sampled from each cloud.
    pub points: usize,
    /// World units.
    pub threshold: f64,
    /// Predicted points further than this behind the oracle surface of
    /// every view are treated as unobserved and dropped.
    pub cull_margin: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mesh: MeshOptions {
                resolution: 128,
                ..Default::default()
            },
            points: 200_000,
            threshold: 0.05,
            cull_margin: 0.1,
            seed: 0,
        }
    }
}

/// Extracts the zero level set over the normalized domain and maps it back
/// to world units.
pub fn world_mesh(model: &SceneModel, ds: &Dataset, opts: &MeshOptions) -> Result<Mesh> {
    let mesh = extract_mesh(&model.geometry, opts, &unit_domain())?;
    Ok(mesh.transformed(&ds.transform.inverse()))
}

/// Compares a world-unit mesh with the fused oracle depth of `ds`.
pub fn evaluate_mesh(mesh: &Mesh, ds: &Dataset, opts: &EvalOptions) -> Result<EvalReport> {
    let views = ViewFrustum::from_dataset(ds)?;
    let raw = sample_surface(mesh, 2 * opts.points, opts.seed)?;
    let seen = cull_to_views(&raw, &views, opts.cull_margin);
    if seen.is_empty() {
        return Err(Error::Empty("no reconstructed surface is visible from the views".into()));
    }
    let pred = subsample(&seen, opts.points, opts.seed);
    let gt = subsample(&gt_point_cloud(ds)?, opts.points, opts.seed.wrapping_add(1));
    eval_metrics(&pred, &gt, opts.threshold)
}

pub fn evaluate_model(model: &SceneModel, ds: &Dataset, opts: &EvalOptions) -> Result<(EvalReport, Mesh)> {
    let mesh = world_mesh(model, ds, &opts.mesh)?;
    if mesh.is_empty() {
        return Err(Error::Empty("extracted mesh is empty".into()));
    }
    let report = evaluate_mesh(&mesh, ds, opts)?;
    Ok((report, mesh))
}

/// Angle between learned and injected normal rotations, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub per_view: Vec<f64>,
    pub mean: f64,
    pub pixels: usize,
}

/// For every `stride`-th pixel with an oracle surface point, evaluates the
/// compensation field there and compares where it sends the true normal with
/// where the injected bias sent it. Rotation about the normal itself does not
/// change the prior, so only the rotated normals are compared.
pub fn bias_angular_error(model: &SceneModel, ds: &Dataset, stride: usize) -> Result<BiasReport> {
    let gt = ds
        .gt
        .as_ref()
        .ok_or_else(|| Error::Empty("dataset has no ground-truth assets".into()))?;
    let inv = ds.transform.inverse();
    let rot = ds.transform.rotation;
    let stride = stride.max(1);
    let mut per_view = Vec::with_capacity(ds.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for (v, frame) in ds.frames.iter().enumerate() {
        let cam_world = inv.apply_pose(&frame.pose);
        let mut xs = Vec::new();
        let mut dirs = Vec::new();
        let mut truth = Vec::new();
        let mut target = Vec::new();
        for row in (0..ds.height).step_by(stride) {
            for col in (0..ds.width).step_by(stride) {
                let i = row * ds.width + col;
                let d = gt.depth[v][i];
                if d <= 0.0 {
                    continue;
                }
                let dir = cam_world.world_direction(row, col);
                let p = cam_world.center + dir * d;
                let n = Vec3::from_column_slice(&gt.normals[v][i]);
                let biased = rotation_from_axis_angle(&gt.bias[v][i]) * n;
                xs.push(ds.transform.apply(&p));
                dirs.push(frame.pose.world_direction(row, col));
                truth.push(rot * n);
                target.push(rot * biased);
            }
        }
        if xs.is_empty() {
            per_view.push(f64::NAN);
            continue;
        }
        let (geo, _) = model.geometry.forward(&xs);
        let nhat: Vec<Vec3> = geo
            .gradient
            .iter()
            .map(|g| {
                let l = g.norm();
                if l > 1e-12 {
                    g / l
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
        let angles = model.compensation.eval(&HeadInput {
            x: &xs,
            view: &dirs,
            normal: &nhat,
            feature: &geo.feature,
        });
        let mut view_sum = 0.0;
        for ((n, t), a) in truth.iter().zip(&target).zip(&angles) {
            let learned = compensate_normal(n, a);
            let c = (learned.dot(t) / (learned.norm() * t.norm())).clamp(-1.0, 1.0);
            view_sum += c.acos().to_degrees();
        }
        per_view.push(view_sum / xs.len() as f64);
        sum += view_sum;
        count += xs.len();
    }
    if count == 0 {
        return Err(Error::Empty("no oracle surface pixels".into()));
    }
    Ok(BiasReport {
        per_view,
        mean: sum / count as f64,
        pixels: count,
    })
}

/// Trains `config` on `ds` to completion.
pub fn train_on(ds: &Dataset, config: TrainConfig) -> Result<SceneModel> {
    let mut t = Trainer::new(config, ds)?;
    let total = t.config.total_iters() as u64;
    t.run_until(total, |_| {})?;
    Ok(t.state.model)
}

/// Settings of the controlled bias run.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRun {
    pub scene: AnalyticScene,
    pub views: usize,
    pub resolution: usize,
    pub amplitude_deg: f64,
    pub seed: u64,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl BiasRun {
    pub fn new(train: TrainConfig) -> Self {
        Self {
            scene: AnalyticScene::default_room(),
            views: 12,
            resolution: 128,
            amplitude_deg: 10.0,
            seed: 0,
            train,
            eval: EvalOptions::default(),
        }
    }

    pub fn synth(&self) -> Result<SynthData> {
        let bias = if self.amplitude_deg == 0.0 {
            BiasSpec::none()
        } else {
            BiasSpec::constant_per_view(self.amplitude_deg.to_radians(), AxisRule::Horizontal)
        };
        let mut cfg = SynthConfig::new(self.scene.clone(), self.views, bias, self.seed);
        cfg.rig.width = self.resolution;
        cfg.rig.height = self.resolution;
        SynthData::generate(&cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRunResult {
    pub with_compensation: EvalReport,
    pub without_compensation: EvalReport,
    pub angular: BiasReport,
}

impl BiasRunResult {
    /// Relative Chamfer reduction of compensation over the ablation.
    pub fn chamfer_reduction(&self) -> f64 {
        1.0 - self.with_compensation.chamfer() / self.without_compensation.chamfer()
    }
}

/// Trains with and without compensation on the same biased data.
pub fn run_bias_recovery(run: &BiasRun) -> Result<BiasRunResult> {
    let ds = run.synth()?.to_dataset()?;
    let with = train_on(&ds, TrainConfig { compensation: true, ..run.train.clone() })?;
    let without = train_on(&ds, TrainConfig { compensation: false, ..run.train.clone() })?;
    Ok(BiasRunResult {
        with_compensation: evaluate_model(&with, &ds, &run.eval)?.0,
        without_compensation: evaluate_model(&without, &ds, &run.eval)?.0,
        angular: bias_angular_error(&with, &ds, 2)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub mlp_only: EvalReport,
    pub hybrid: EvalReport,
    pub hybrid_sampling: EvalReport,
}

/// Geometry and sampling ablation on unbiased data: smooth branch only,
/// hybrid, and hybrid with informative sampling. Compensation is off.
pub fn run_ablation(run: &BiasRun) -> Result<AblationResult> {
    let run = BiasRun {
        amplitude_deg: 0.0,
        ..run.clone()
    };
    let ds = run.synth()?.to_dataset()?;
    let base = TrainConfig {
        compensation: false,
        ..run.train.clone()
    };
    let mut mlp = base.clone();
    mlp.model.geometry.grid = None;
    mlp.informative_sampling = false;
    let hybrid = TrainConfig {
        informative_sampling: false,
        ..base.clone()
    };
    let ips = TrainConfig {
        informative_sampling: true,
        ..base
    };
    let eval = |c: TrainConfig| -> Result<EvalReport> { Ok(evaluate_model(&train_on(&ds, c)?, &ds, &run.eval)?.0) };
    Ok(AblationResult {
        mlp_only: eval(mlp)?,
        hybrid: eval(hybrid)?,
        hybrid_sampling: eval(ips)?,
    })
}
