use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossWeights;
use crate::error::{Error, Result};
use crate::fields::{GeometryConfig, GridConfig, Group, HeadConfig, ModelConfig};
use crate::render::{NearFar, SamplingConfig};
use crate::sampler::{CannyConfig, SamplingSchedule};

/// Everything that determines a training run.
///
/// The schedule carries the batch size and stage lengths as well; they are
/// copied from the fields here whenever a config is read (see
/// [`TrainConfig::sync_schedule`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Final learning rate as a fraction of `lr` after cosine decay.
    pub lr_final_fraction: f64,
    /// Absolute initial learning rate per parameter group.
    pub lr_overrides: BTreeMap<GroupKey, f64>,
    pub seed: u64,
    pub weights: LossWeights,
    pub schedule: SamplingSchedule,
    pub canny: CannyConfig,
    pub sampling: SamplingConfig,
    pub model: ModelConfig,
    /// Enables the compensation field in stage two. Off reproduces the
    /// "no compensation" ablation: stage two keeps supervising the SDF normal.
    pub compensation: bool,
    /// Off forces `r = 0`, i.e. uniform pixel sampling throughout.
    pub informative_sampling: bool,
    pub background: bool,
    pub near_far: NearFar,
    /// Rays rendered per forward/backward pass; bounds tape memory.
    pub ray_chunk: usize,
    /// Checkpoint period in iterations; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
}

/// [`Group`] as a map key in text configs.
pub type GroupKey = Group;

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// CPU-sized defaults used by the synthetic experiments.
    pub fn desk() -> Self {
        let stage1_iters = 2000;
        let stage2_iters = 8000;
        let batch_size = 256;
        let model = ModelConfig {
            geometry: GeometryConfig {
                smooth_width: 32,
                smooth_layers: 2,
                decoder_width: 32,
                decoder_layers: 2,
                feature_dim: 16,
                grid: Some(GridConfig {
                    levels: 8,
                    channels: 4,
                    min_resolution: 8,
                    max_resolution: 64,
                }),
                inside_out: true,
                init_radius: 0.9,
                ..GeometryConfig::default()
            },
            color: HeadConfig {
                width: 32,
                layers: 2,
                view_freq: 4,
            },
            compensation: HeadConfig {
                width: 32,
                layers: 2,
                view_freq: 4,
            },
            ..ModelConfig::default()
        };
        Self {
            stage1_iters,
            stage2_iters,
            batch_size,
            lr: 1e-3,
            lr_final_fraction: 0.05,
            lr_overrides: BTreeMap::from([(Group::Grid, 1e-2)]),
            seed: 0,
            weights: LossWeights::default(),
            schedule: SamplingSchedule {
                n_sample: batch_size,
                stage1_iters,
                stage2_iters,
                ..SamplingSchedule::default()
            },
            canny: CannyConfig::default(),
            sampling: SamplingConfig {
                n_uniform: 32,
                n_importance: 16,
                rounds: 2,
                base_tau: 64.0,
            },
            model,
            compensation: true,
            informative_sampling: true,
            background: true,
            near_far: NearFar::default(),
            ray_chunk: 256,
            checkpoint_every: 1000,
        }
    }

    /// Network sizes and iteration budgets of the original GPU setting.
    pub fn full_scale() -> Self {
        let (stage1_iters, stage2_iters, batch_size) = (20_000, 70_000, 1024);
        Self {
            stage1_iters,
            stage2_iters,
            batch_size,
            lr_overrides: BTreeMap::new(),
            schedule: SamplingSchedule {
                n_sample: batch_size,
                stage1_iters,
                stage2_iters,
                ..SamplingSchedule::default()
            },
            sampling: SamplingConfig::default(),
            model: ModelConfig {
                geometry: GeometryConfig {
                    inside_out: true,
                    ..GeometryConfig::default()
                },
                ..ModelConfig::default()
            },
            ray_chunk: 512,
            checkpoint_every: 5000,
            ..Self::desk()
        }
    }

    /// Sets both stage lengths here and in the schedule.
    pub fn with_stages(mut self, stage1: usize, stage2: usize) -> Self {
        self.stage1_iters = stage1;
        self.stage2_iters = stage2;
        self.schedule.stage1_iters = stage1;
        self.schedule.stage2_iters = stage2;
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n;
        self.schedule.n_sample = n;
        self
    }

    /// Copies batch size and stage lengths into the schedule.
    pub fn sync_schedule(mut self) -> Self {
        self.schedule.n_sample = self.batch_size;
        self.schedule.stage1_iters = self.stage1_iters;
        self.schedule.stage2_iters = self.stage2_iters;
        self
    }

    pub fn total_iters(&self) -> usize {
        self.stage1_iters + self.stage2_iters
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.schedule.n_sample != self.batch_size {
            return bad(format!(
                "schedule.n_sample ({}) must equal batch_size ({})",
                self.schedule.n_sample, self.batch_size
            ));
        }
        if (self.schedule.stage1_iters, self.schedule.stage2_iters) != (self.stage1_iters, self.stage2_iters) {
            return bad("schedule stage lengths must equal stage1_iters/stage2_iters".into());
        }
        if !(self.lr > 0.0) || !(0.0..=1.0).contains(&self.lr_final_fraction) {
            return bad("lr must be positive and lr_final_fraction in [0, 1]".into());
        }
        if self.lr_overrides.values().any(|v| !(*v >= 0.0)) {
            return bad("lr_overrides must be nonnegative".into());
        }
        if !(self.weights.normal >= 0.0 && self.weights.eikonal >= 0.0) {
            return bad("loss weights must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.schedule.r_max) {
            return bad("schedule.r_max must lie in [0, 1]".into());
        }
        if self.ray_chunk == 0 || self.sampling.n_uniform < 2 {
            return bad("ray_chunk must be positive and sampling.n_uniform at least 2".into());
        }
        if !(self.near_far.far > self.near_far.near && self.near_far.near >= 0.0) {
            return bad("near_far must satisfy 0 <= near < far".into());
        }
        if self.model.init_tau <= 0.0 || self.model.angle_cap <= 0.0 {
            return bad("init_tau and angle_cap must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let c = c.sync_schedule();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Initial learning rate of a group.
    pub fn group_lr(&self, g: Group) -> f64 {
        self.lr_overrides.get(&g).copied().unwrap_or(self.lr)
    }
}
