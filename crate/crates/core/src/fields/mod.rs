//! Neural fields: hybrid geometry, color and normal compensation.
//!
//! Networks are evaluated in batches. Geometry carries forward-mode tangents
//! so that the spatial gradient of the signed distance is exact and itself
//! differentiable with respect to every parameter.

pub mod checkpoint;
pub mod encoding;
pub mod geometry;
pub mod grid;
pub mod heads;
pub mod mlp;
pub mod model;
pub mod param;
pub mod rotation;

pub use checkpoint::{read_checkpoint, restore_blocks, write_checkpoint};
pub use encoding::{encoded_dim, positional_encoding};
pub use geometry::{GeometryConfig, GeometryOutput, GeometryTape, HybridGeometryField};
pub use grid::{FeatureGrid, GridConfig};
pub use heads::{ColorField, CompensationField, HeadConfig, HeadInput, HeadInputGrad, HeadTape};
pub use mlp::{Activation, Dense, Mlp};
pub use model::{Group, ModelConfig, SceneModel};
pub use param::{ParamBlock, Parameterized};
pub use rotation::{compensate_normal, compensate_normal_jacobian, rotation_matrix, Angles};
