use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use super::geometry::{GeometryConfig, HybridGeometryField};
use super::heads::{ColorField, CompensationField, HeadConfig};
use super::mlp::sigmoid;
use super::param::{ParamBlock, Parameterized};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub geometry: GeometryConfig,
    pub color: HeadConfig,
    pub compensation: HeadConfig,
    /// Bound on every compensation angle, radians.
    pub angle_cap: f64,
    /// Initial sharpness of the logistic CDF turning distances into opacity.
    pub init_tau: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            color: HeadConfig::color_default(),
            compensation: HeadConfig::compensation_default(),
            angle_cap: FRAC_PI_4,
            init_tau: 40.0,
        }
    }
}

/// Parameter groups, used for stage gating and per-group learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Geometry,
    Grid,
    Color,
    Compensation,
    Tau,
    Background,
}

/// All learnable state: the three fields, the opacity sharpness and the
/// background color.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    pub config: ModelConfig,
    pub geometry: HybridGeometryField,
    pub color: ColorField,
    pub compensation: CompensationField,
    /// `tau = exp(log_tau)`.
    pub log_tau: ParamBlock,
    /// Background color is `sigmoid(raw)`.
    pub background: ParamBlock,
}

impl SceneModel {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let geometry = HybridGeometryField::new(config.geometry.clone(), seed);
        let fd = geometry.feature_dim();
        let color = ColorField::new(config.color.clone(), fd, seed.wrapping_add(1));
        let mut compensation =
            CompensationField::new(config.compensation.clone(), fd, seed.wrapping_add(2));
        compensation.angle_cap = config.angle_cap;
        let log_tau = ParamBlock::new("log_tau", vec![1], vec![config.init_tau.ln()]);
        let background = ParamBlock::zeros("background", vec![3]);
        Self {
            config,
            geometry,
            color,
            compensation,
            log_tau,
            background,
        }
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.data[0].exp()
    }

    pub fn background_color(&self) -> [f64; 3] {
        let b = &self.background.data;
        [sigmoid(b[0]), sigmoid(b[1]), sigmoid(b[2])]
    }

    /// Group of every block, aligned with [`Parameterized::blocks`].
    pub fn groups(&self) -> Vec<Group> {
        let geo = &self.geometry;
        let mut g = vec![Group::Geometry; geo.smooth.blocks().len()];
        if let Some(grid) = &geo.grid {
            g.extend(vec![Group::Grid; grid.blocks().len()]);
        }
        g.extend(vec![Group::Geometry; geo.decoder.blocks().len()]);
        g.extend(vec![Group::Color; self.color.blocks().len()]);
        g.extend(vec![Group::Compensation; self.compensation.blocks().len()]);
        g.push(Group::Tau);
        g.push(Group::Background);
        g
    }
}

impl Parameterized for SceneModel {
    fn blocks(&self) -> Vec<&ParamBlock> {
        let mut v = self.geometry.blocks();
        v.extend(self.color.blocks());
        v.extend(self.compensation.blocks());
        v.push(&self.log_tau);
        v.push(&self.background);
        v
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        let mut v = self.geometry.blocks_mut();
        v.extend(self.color.blocks_mut());
        v.extend(self.compensation.blocks_mut());
        v.push(&mut self.log_tau);
        v.push(&mut self.background);
        v
    }
}
