//! Two-stage optimization loop with checkpointing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adam::{cosine_lr, Adam};
use super::config::TrainConfig;
use super::log::{LogRow, MetricsLog};
use super::loss::{
    color_loss_grad, eikonal_loss, eikonal_loss_grad, normal_loss_grad, total_loss, LossParts,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fields::{read_checkpoint, restore_blocks, write_checkpoint, Group, ParamBlock, Parameterized, SceneModel};
use crate::render::{backward, mix_seed, pixel_to_ray, render_rays, unit_domain, PixelGrad, RenderOptions, Stage};
use crate::sampler::{InformativeSampler, PixelBatch};

/// Exponential moving averages of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningStats {
    pub color: f64,
    pub normal: f64,
    pub eikonal: f64,
    pub total: f64,
    pub steps: u64,
}

impl RunningStats {
    const DECAY: f64 = 0.98;

    fn update(&mut self, p: &LossParts, total: f64) {
        let a = if self.steps == 0 { 0.0 } else { Self::DECAY };
        let mix = |old: f64, new: f64| a * old + (1.0 - a) * new;
        self.color = mix(self.color, p.color);
        self.normal = mix(self.normal, p.normal);
        self.eikonal = mix(self.eikonal, p.eikonal);
        self.total = mix(self.total, total);
        self.steps += 1;
    }
}

/// Model, optimizer moments and progress.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: SceneModel,
    pub adam: Adam,
    pub iteration: u64,
    pub stats: RunningStats,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Self {
        let model = SceneModel::new(config.model.clone(), config.seed);
        let adam = Adam::new(&model.blocks());
        Self {
            model,
            adam,
            iteration: 0,
            stats: RunningStats::default(),
        }
    }

    /// Stage of the next step.
    pub fn stage(&self, config: &TrainConfig) -> Stage {
        stage_at(config, self.iteration)
    }
}

/// `Stage::One` iff `iter < stage1_iters`.
pub fn stage_at(config: &TrainConfig, iter: u64) -> Stage {
    if iter < config.stage1_iters as u64 {
        Stage::One
    } else {
        Stage::Two
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: TrainConfig,
    pub iteration: u64,
    pub adam_steps: Vec<u64>,
    pub stats: RunningStats,
}

/// Writes the full training state.
pub fn save_state(path: &Path, config: &TrainConfig, state: &TrainState) -> Result<()> {
    let meta = CheckpointMeta {
        config: config.clone(),
        iteration: state.iteration,
        adam_steps: state.adam.steps.clone(),
        stats: state.stats,
    };
    let mut tensors: Vec<&ParamBlock> = state.model.blocks();
    tensors.extend(state.adam.m.iter());
    tensors.extend(state.adam.v.iter());
    write_checkpoint(path, &meta, &tensors)
}

/// Reads a checkpoint written by [`save_state`].
pub fn load_state(path: &Path) -> Result<(TrainConfig, TrainState)> {
    let (meta, tensors): (CheckpointMeta, Vec<ParamBlock>) = read_checkpoint(path)?;
    let config = meta.config.sync_schedule();
    let mut state = TrainState::new(&config);
    restore_blocks(path, state.model.blocks_mut(), &tensors)?;
    let moments: Vec<&mut ParamBlock> = state.adam.m.iter_mut().chain(state.adam.v.iter_mut()).collect();
    restore_blocks(path, moments, &tensors)?;
    if meta.adam_steps.len() != state.adam.steps.len() {
        return Err(Error::malformed(path, "optimizer step counters do not match the model"));
    }
    state.adam.steps = meta.adam_steps;
    state.iteration = meta.iteration;
    state.stats = meta.stats;
    Ok((config, state))
}

/// Loads only the model from a checkpoint.
pub fn load_model(path: &Path) -> Result<(TrainConfig, SceneModel)> {
    let (meta, tensors): (CheckpointMeta, Vec<ParamBlock>) = read_checkpoint(path)?;
    let mut model = SceneModel::new(meta.config.model.clone(), meta.config.seed);
    restore_blocks(path, model.blocks_mut(), &tensors)?;
    Ok((meta.config.sync_schedule(), model))
}

/// Result of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iteration: u64,
    pub stage: Stage,
    pub parts: LossParts,
    pub total: f64,
    pub r: f64,
    pub l_i: f64,
    pub lr: f64,
}

pub struct Trainer<'a> {
    pub config: TrainConfig,
    pub dataset: &'a Dataset,
    pub sampler: InformativeSampler,
    pub state: TrainState,
    out_dir: Option<PathBuf>,
    log: Option<MetricsLog>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, dataset: &'a Dataset) -> Result<Self> {
        let state = TrainState::new(&config);
        Self::with_state(config, dataset, state)
    }

    pub fn with_state(config: TrainConfig, dataset: &'a Dataset, state: TrainState) -> Result<Self> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::Empty("dataset has no frames".into()));
        }
        let mut schedule = config.schedule.clone();
        if !config.informative_sampling {
            schedule.r_max = 0.0;
        }
        let sampler = InformativeSampler::new(dataset, schedule, &config.canny);
        Ok(Self {
            config,
            dataset,
            sampler,
            state,
            out_dir: None,
            log: None,
        })
    }

    /// Resumes from a checkpoint written by an earlier run.
    pub fn resume(path: &Path, dataset: &'a Dataset) -> Result<Self> {
        let (config, state) = load_state(path)?;
        Self::with_state(config, dataset, state)
    }

    /// Enables checkpoints and the CSV log under `dir`.
    pub fn with_output(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
        self.log = Some(MetricsLog::open(&dir.join("train_log.csv"))?);
        self.out_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
        dir.join("checkpoints").join(format!("ckpt_{iteration:07}.bin"))
    }

    /// Highest-iteration checkpoint under `dir`, if any.
    pub fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
        let entries = std::fs::read_dir(dir.join("checkpoints")).ok()?;
        entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("ckpt_") && n.ends_with(".bin"))
            })
            .max()
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.config.total_iters() as u64
    }

    /// Per-group learning rates at the current iteration; `None` freezes a block.
    fn learning_rates(&self, stage: Stage) -> Vec<Option<f64>> {
        let it = self.state.iteration as usize;
        let total = self.config.total_iters();
        let comp_active = stage == Stage::Two && self.config.compensation;
        self.state
            .model
            .groups()
            .into_iter()
            .map(|g| {
                if g == Group::Compensation && !comp_active {
                    return None;
                }
                if g == Group::Background && !self.config.background {
                    return None;
                }
                let lr = self.config.group_lr(g);
                Some(cosine_lr(lr, self.config.lr_final_fraction, it, total))
            })
            .collect()
    }

    /// Loss and gradient of one pixel batch, accumulated into `grad`.
    fn loss_and_grad(&self, batch: &PixelBatch, stage: Stage, grad: &mut SceneModel) -> LossParts {
        let model = &self.state.model;
        let cfg = &self.config;
        let opts = RenderOptions {
            stage: if stage == Stage::Two && cfg.compensation {
                Stage::Two
            } else {
                Stage::One
            },
            sampling: cfg.sampling.clone(),
            background: cfg.background,
        };
        let domain = unit_domain();
        let mut parts = LossParts::default();
        for (ci, chunk) in batch.pixels.chunks(cfg.ray_chunk).enumerate() {
            let rays: Vec<_> = chunk
                .iter()
                .map(|p| {
                    let cam = &self.dataset.frames[p.pixel.view].pose;
                    pixel_to_ray(cam, p.pixel.view, p.pixel.row, p.pixel.col, &domain, cfg.near_far)
                        .expect("sampled pixel lies inside the image")
                })
                .collect();
            let base = (ci * cfg.ray_chunk) as u64;
            let seeds: Vec<u64> = (0..rays.len() as u64)
                .map(|k| mix_seed(cfg.seed, &[self.state.iteration, base + k]))
                .collect();
            let out = render_rays(model, &rays, &opts, Some(&seeds));
            let mut pgrads = Vec::with_capacity(chunk.len());
            let mut gnorm = Vec::with_capacity(chunk.len());
            let mut norms_all = Vec::with_capacity(chunk.len());
            for ((px, target), smp) in out.pixels.iter().zip(chunk).zip(&out.samples) {
                for k in 0..3 {
                    parts.color += (px.color[k] - target.color[k]).abs();
                }
                let mut g = PixelGrad {
                    color: color_loss_grad(&px.color, &target.color),
                    normal_comp: [0.0; 3],
                    normal_sdf: [0.0; 3],
                };
                if target.prior_valid {
                    let n = &target.prior;
                    parts.normal += super::loss::normal_loss(&[px.normal_comp], &[*n]);
                    g.normal_comp = normal_loss_grad(&px.normal_comp, n).map(|v| cfg.weights.normal * v);
                }
                pgrads.push(g);
                let norms: Vec<f64> = smp.n_sdf.iter().map(|v| v.norm()).collect();
                gnorm.push(
                    eikonal_loss_grad(&norms)
                        .into_iter()
                        .map(|v| cfg.weights.eikonal * v)
                        .collect(),
                );
                norms_all.push(norms);
            }
            parts.eikonal += eikonal_loss(&norms_all);
            backward(model, &out, &pgrads, &gnorm, grad);
        }
        parts
    }

    /// Runs one optimization step.
    pub fn step(&mut self) -> Result<StepReport> {
        let iteration = self.state.iteration;
        let stage = self.state.stage(&self.config);
        let batch = self.sampler.sample_batch(self.dataset, iteration as usize, self.config.seed);
        let mut grad = self.state.model.zeros_like();
        let parts = self.loss_and_grad(&batch, stage, &mut grad);
        let total = match total_loss(&parts, &self.config.weights, iteration) {
            Ok(t) => t,
            Err(e) => return Err(self.abort(e)),
        };
        if let Some(b) = grad.blocks().iter().find(|b| b.data.iter().any(|v| !v.is_finite())) {
            let e = Error::NonFinite {
                iteration,
                detail: format!("gradient of {} is not finite", b.name),
            };
            return Err(self.abort(e));
        }
        let lrs = self.learning_rates(stage);
        self.state
            .adam
            .step(self.state.model.blocks_mut(), grad.blocks(), &lrs);
        self.state.stats.update(&parts, total);
        let l_i = if batch.thresholds.is_empty() {
            0.0
        } else {
            let finite: Vec<f64> = batch.thresholds.iter().copied().filter(|v| v.is_finite()).collect();
            finite.iter().sum::<f64>() / finite.len().max(1) as f64
        };
        let report = StepReport {
            iteration,
            stage,
            parts,
            total,
            r: batch.r,
            l_i,
            lr: cosine_lr(
                self.config.lr,
                self.config.lr_final_fraction,
                iteration as usize,
                self.config.total_iters(),
            ),
        };
        self.state.iteration += 1;
        if let Some(log) = &mut self.log {
            log.append(&LogRow {
                iter: iteration,
                stage: stage.into(),
                color: parts.color,
                normal: parts.normal,
                eikonal: parts.eikonal,
                total,
                r: report.r,
                l_i,
                lr: report.lr,
            })?;
        }
        let every = self.config.checkpoint_every as u64;
        if every > 0 && self.state.iteration % every == 0 {
            self.checkpoint()?;
        }
        Ok(report)
    }

    /// Saves the pre-step state as the last good checkpoint and passes the error on.
    fn abort(&mut self, e: Error) -> Error {
        if let Some(dir) = &self.out_dir {
            if let Err(io) = save_state(&dir.join("last_good.bin"), &self.config, &self.state) {
                return io;
            }
        }
        e
    }

    /// Writes a checkpoint for the current iteration; returns its path.
    pub fn checkpoint(&mut self) -> Result<Option<PathBuf>> {
        let Some(dir) = self.out_dir.clone() else {
            return Ok(None);
        };
        if let Some(log) = &mut self.log {
            log.flush()?;
        }
        let p = Self::checkpoint_path(&dir, self.state.iteration);
        save_state(&p, &self.config, &self.state)?;
        Ok(Some(p))
    }

    /// Steps until `until` iterations are done (or the configured total),
    /// calling `on_step` after each step.
    pub fn run_until(&mut self, until: u64, mut on_step: impl FnMut(&StepReport)) -> Result<()> {
        let end = until.min(self.config.total_iters() as u64);
        while self.state.iteration < end {
            let r = self.step()?;
            on_step(&r);
        }
        Ok(())
    }

    /// Trains to completion and writes a final checkpoint plus `model.bin`.
    pub fn run(&mut self, on_step: impl FnMut(&StepReport)) -> Result<()> {
        self.run_until(self.config.total_iters() as u64, on_step)?;
        if let Some(dir) = self.out_dir.clone() {
            self.checkpoint()?;
            save_state(&dir.join("model.bin"), &self.config, &self.state)?;
        }
        Ok(())
    }
}
