//! Differentiable volume rendering of the scene model.
//!
//! Rays are sampled, the fields are evaluated at every sample, opacities are
//! derived from consecutive signed distances, and color, compensated normals
//! and SDF normals are composited with the same transmittance weights.
//! Normals are composited from unit per-sample directions; the composite
//! itself is not re-normalized.

pub mod alpha;
pub mod bias_map;
pub mod composite;
pub mod pixel;
pub mod ray;
pub mod sampling;
pub mod view;

pub use alpha::{alpha_from_sdf, alpha_with_grad, AlphaGrad};
pub use bias_map::normal_bias_map;
pub use composite::{composite, transmittances, weights};
pub use pixel::{backward, render_rays, render_with_samples, BatchTape, PixelGrad, RaySampleSet, RenderBatch, RenderOptions, RenderedPixel, Stage};
pub use ray::{pixel_to_ray, unit_domain, NearFar, PixelId, Ray};
pub use sampling::{mix_seed, sample_points, sample_rays, stratified, SamplingConfig};
pub use view::{render_view, RenderedView};
