use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    generate_cameras_with, inject_view_bias, render_gt_frame, AnalyticScene, BiasSpec,
    BiasedNormals, CameraPose, CameraRig, GtFrame,
};
use crate::dataset::{self, Dataset, FloatMap, GtAssets};
use crate::error::{Error, Result};

/// Everything needed to reproduce a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub scene: AnalyticScene,
    pub n_views: usize,
    pub rig: CameraRig,
    pub bias: BiasSpec,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(scene: AnalyticScene, n_views: usize, bias: BiasSpec, seed: u64) -> Self {
        Self {
            scene,
            n_views,
            rig: CameraRig::default(),
            bias,
            seed,
        }
    }
}

/// In-memory synthetic capture.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub scene: AnalyticScene,
    pub cameras: Vec<CameraPose>,
    pub frames: Vec<GtFrame>,
    pub biased: Vec<BiasedNormals>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub n_views: usize,
    pub width: usize,
    pub height: usize,
    pub valid_fraction: f64,
}

fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

impl SynthData {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        cfg.bias.validate()?;
        let cameras = generate_cameras_with(&cfg.scene, &cfg.rig, cfg.n_views, cfg.seed)?;
        let frames: Vec<GtFrame> = cameras
            .iter()
            .map(|c| render_gt_frame(&cfg.scene, c))
            .collect();
        let biased = frames
            .iter()
            .zip(&cameras)
            .enumerate()
            .map(|(i, (f, c))| inject_view_bias(f, c, &cfg.bias, cfg.seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scene: cfg.scene.clone(),
            cameras,
            frames,
            biased,
        })
    }

    /// Training dataset exactly as the loader would produce it from disk:
    /// 8-bit colors and 32-bit priors.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let views = self
            .frames
            .iter()
            .zip(&self.biased)
            .zip(&self.cameras)
            .map(|((f, b), c)| {
                let image = f
                    .color
                    .iter()
                    .map(|p| p.map(|v| quantize(v) as f64 / 255.0))
                    .collect();
                let prior = b
                    .normals
                    .iter()
                    .map(|n| {
                        let v = n.map(|x| x as f32 as f64);
                        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                        if len > 1e-9 {
                            v.map(|x| x / len)
                        } else {
                            [0.0; 3]
                        }
                    })
                    .collect();
                (image, prior, c.clone())
            })
            .collect();
        let gt = GtAssets {
            depth: self.frames.iter().map(|f| f.depth.clone()).collect(),
            normals: self.frames.iter().map(|f| f.normals.clone()).collect(),
            bias: self.biased.iter().map(|b| b.rotations.clone()).collect(),
        };
        Dataset::from_views(views, self.scene.bounds, Some(gt), Some(self.scene.clone()))
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes the canonical dataset layout (see [`crate::dataset`]).
pub fn write_dataset(dir: &Path, data: &SynthData) -> Result<SynthSummary> {
    for sub in ["images", "normals", "normals_gt", "bias", "depth"] {
        mkdir(&dir.join(sub))?;
    }
    let first = data
        .cameras
        .first()
        .ok_or_else(|| Error::Empty("no views to write".into()))?;
    let (w, h) = (first.width, first.height);
    let mut valid = 0usize;
    for (i, (frame, biased)) in data.frames.iter().zip(&data.biased).enumerate() {
        let id = format!("{i:03}");
        let [img, nrm, nrm_gt, bias, depth] = dataset::canonical_paths(dir, &id);
        let bytes: Vec<u8> = frame.color.iter().flat_map(|c| c.map(quantize)).collect();
        image::RgbImage::from_raw(w as u32, h as u32, bytes)
            .expect("buffer size matches")
            .save(&img)?;
        FloatMap::from_vec3(h, w, &biased.normals).write(&nrm)?;
        FloatMap::from_vec3(h, w, &frame.normals).write(&nrm_gt)?;
        FloatMap::from_vec3(h, w, &biased.rotations).write(&bias)?;
        FloatMap::from_scalar(h, w, &frame.depth).write(&depth)?;
        valid += frame.valid_count();
    }
    dataset::write_poses(&dir.join("poses.txt"), &data.cameras)?;
    dataset::write_intrinsics(&dir.join("intrinsics.txt"), &first.intrinsics, w, h)?;
    let scene_path = dir.join("scene.json");
    fs::write(&scene_path, serde_json::to_string_pretty(&data.scene)?)
        .map_err(|e| Error::io(&scene_path, e))?;
    Ok(SynthSummary {
        n_views: data.cameras.len(),
        width: w,
        height: h,
        valid_fraction: valid as f64 / (data.cameras.len() * w * h) as f64,
    })
}
