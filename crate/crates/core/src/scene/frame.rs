use rayon::prelude::*;

use super::{sphere_trace, AnalyticScene, CameraPose, TraceParams, Vec3};

/// Fixed world-space light direction (unit length).
pub const LIGHT_DIRECTION: [f64; 3] = [2.0 / 7.0, 6.0 / 7.0, 3.0 / 7.0];

const AMBIENT: f64 = 0.2;

/// Ground-truth render of one view.
///
/// `depth` holds the distance along the pixel ray (0 for misses) and `normals`
/// world-frame unit normals (zero for misses).
#[derive(Debug, Clone, PartialEq)]
pub struct GtFrame {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
    pub normals: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl GtFrame {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Luminance image used for edge extraction.
    pub fn gray(&self) -> Vec<f64> {
        self.color
            .iter()
            .map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2])
            .collect()
    }
}

/// Lambertian shading under one directional light plus ambient.
pub fn shade(albedo: &[f64; 3], normal: &Vec3) -> [f64; 3] {
    let l = Vec3::from_column_slice(&LIGHT_DIRECTION);
    let k = (AMBIENT + normal.dot(&l).max(0.0)).min(1.0);
    [albedo[0] * k, albedo[1] * k, albedo[2] * k]
}

/// Sphere traces every pixel of `cam`.
pub fn render_gt_frame(scene: &AnalyticScene, cam: &CameraPose) -> GtFrame {
    let (w, h) = (cam.width, cam.height);
    let far = scene.bounds.extent().norm() * 2.0;
    let params = TraceParams {
        far,
        ..TraceParams::default()
    };
    let rows: Vec<Vec<([f64; 3], f64, [f64; 3], bool)>> = (0..h)
        .into_par_iter()
        .map(|row| {
            (0..w)
                .map(|col| {
                    let dir = cam.world_direction(row, col);
                    match sphere_trace(scene, &cam.center, &dir, &params) {
                        Some(hit) => {
                            let albedo = scene
                                .closest_primitive(&hit.point)
                                .map(|i| scene.primitives[i].albedo_at(&hit.point, &hit.normal))
                                .unwrap_or([0.5; 3]);
                            (
                                shade(&albedo, &hit.normal),
                                hit.t,
                                [hit.normal.x, hit.normal.y, hit.normal.z],
                                true,
                            )
                        }
                        None => ([0.0; 3], 0.0, [0.0; 3], false),
                    }
                })
                .collect()
        })
        .collect();
    let mut frame = GtFrame {
        width: w,
        height: h,
        color: Vec::with_capacity(w * h),
        depth: Vec::with_capacity(w * h),
        normals: Vec::with_capacity(w * h),
        valid: Vec::with_capacity(w * h),
    };
    for (c, d, n, v) in rows.into_iter().flatten() {
        frame.color.push(c);
        frame.depth.push(d);
        frame.normals.push(n);
        frame.valid.push(v);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Aabb, Intrinsics, Primitive, Shape};

    fn frontal(scene_dist: f64) -> CameraPose {
        CameraPose::look_at(
            Vec3::new(0.0, 0.0, scene_dist),
            Vec3::zeros(),
            Vec3::new(0.0, 1.0, 0.0),
            Intrinsics::from_fov(33, 33, 60.0),
            33,
            33,
        )
    }

    #[test]
    fn light_is_unit() {
        assert!((Vec3::from_column_slice(&LIGHT_DIRECTION).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_center_depth_matches_intersection() {
        let scene = AnalyticScene::unit_sphere();
        let frame = render_gt_frame(&scene, &frontal(3.0));
        let i = frame.index(16, 16);
        assert!(frame.valid[i]);
        assert!((frame.depth[i] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn wall_normals_constant_and_unit() {
        let scene = AnalyticScene::new(
            vec![Primitive {
                shape: Shape::Box {
                    center: [0.0, 0.0, -1.0],
                    half_extents: [5.0, 5.0, 0.5],
                },
                albedo: [0.5; 3],
                pattern: None,
            }],
            Aabb::cube(6.0),
        );
        let frame = render_gt_frame(&scene, &frontal(1.0));
        for i in 0..frame.valid.len() {
            assert!(frame.valid[i]);
            let n = Vec3::from_column_slice(&frame.normals[i]);
            assert!((n.norm() - 1.0).abs() < 1e-5);
            assert!((n - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn render_is_deterministic() {
        let scene = AnalyticScene::default_room();
        let cam = crate::scene::generate_cameras(&scene, 3, 4).unwrap().remove(0);
        assert_eq!(render_gt_frame(&scene, &cam), render_gt_frame(&scene, &cam));
    }
}
