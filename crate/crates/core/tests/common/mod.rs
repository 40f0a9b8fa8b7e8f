#![allow(dead_code)]

use ncsdf::dataset::Dataset;
use ncsdf::fields::{GeometryConfig, GridConfig, HeadConfig, ModelConfig};
use ncsdf::render::SamplingConfig;
use ncsdf::scene::{AnalyticScene, BiasSpec, CameraRig, SynthConfig, SynthData};
use ncsdf::train::TrainConfig;

pub fn synth(scene: AnalyticScene, views: usize, res: usize, bias: BiasSpec, seed: u64) -> SynthData {
    let mut cfg = SynthConfig::new(scene, views, bias, seed);
    cfg.rig = CameraRig {
        width: res,
        height: res,
        ..CameraRig::default()
    };
    SynthData::generate(&cfg).unwrap()
}

pub fn tiny_dataset(res: usize, views: usize) -> Dataset {
    synth(AnalyticScene::smoke_box(), views, res, BiasSpec::none(), 5)
        .to_dataset()
        .unwrap()
}

/// A model and schedule small enough for unit-speed training tests.
pub fn tiny_config(stage1: usize, stage2: usize, batch: usize) -> TrainConfig {
    let mut c = TrainConfig::desk().with_stages(stage1, stage2).with_batch_size(batch);
    c.model = ModelConfig {
        geometry: GeometryConfig {
            smooth_width: 16,
            smooth_layers: 2,
            decoder_width: 16,
            decoder_layers: 2,
            feature_dim: 8,
            n_freq: 4,
            grid: Some(GridConfig {
                levels: 4,
                channels: 2,
                min_resolution: 4,
                max_resolution: 16,
            }),
            inside_out: true,
            ..GeometryConfig::default()
        },
        color: HeadConfig {
            width: 16,
            layers: 2,
            view_freq: 2,
        },
        compensation: HeadConfig {
            width: 16,
            layers: 2,
            view_freq: 2,
        },
        ..ModelConfig::default()
    };
    c.sampling = SamplingConfig {
        n_uniform: 16,
        n_importance: 8,
        rounds: 2,
        base_tau: 64.0,
    };
    c.checkpoint_every = 0;
    c
}
