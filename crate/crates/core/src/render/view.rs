use super::pixel::{render_rays, RenderOptions};
use super::ray::{pixel_to_ray, unit_domain, NearFar, Ray};
use crate::fields::SceneModel;
use crate::scene::CameraPose;

/// Rendered maps of one view, row-major at the rendered resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub width: usize,
    pub height: usize,
    /// Pixel stride relative to the camera resolution.
    pub stride: usize,
    pub color: Vec<[f64; 3]>,
    pub normal_comp: Vec<[f64; 3]>,
    pub normal_sdf: Vec<[f64; 3]>,
    pub weight: Vec<f64>,
    pub depth: Vec<f64>,
}

/// Renders every `stride`-th pixel of `cam` with deterministic sample
/// placement, `chunk` rays at a time.
pub fn render_view(
    model: &SceneModel,
    cam: &CameraPose,
    view: usize,
    opts: &RenderOptions,
    stride: usize,
    chunk: usize,
) -> RenderedView {
    let stride = stride.max(1);
    let (h, w) = (cam.height.div_ceil(stride), cam.width.div_ceil(stride));
    let rays: Vec<Ray> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r * stride, c * stride)))
        .map(|(r, c)| pixel_to_ray(cam, view, r, c, &unit_domain(), NearFar::default()).expect("pixel in range"))
        .collect();
    let mut out = RenderedView {
        width: w,
        height: h,
        stride,
        color: Vec::with_capacity(rays.len()),
        normal_comp: Vec::with_capacity(rays.len()),
        normal_sdf: Vec::with_capacity(rays.len()),
        weight: Vec::with_capacity(rays.len()),
        depth: Vec::with_capacity(rays.len()),
    };
    for part in rays.chunks(chunk.max(1)) {
        let b = render_rays(model, part, opts, None);
        for p in b.pixels {
            out.color.push(p.color);
            out.normal_comp.push(p.normal_comp);
            out.normal_sdf.push(p.normal_sdf);
            out.weight.push(p.weight);
            out.depth.push(p.depth);
        }
    }
    out
}
