use nalgebra::{Matrix3, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnalyticScene, Vec3};
use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn from_fov(width: usize, height: usize, fov_x_deg: f64) -> Self {
        let fx = 0.5 * width as f64 / (0.5 * fov_x_deg.to_radians()).tan();
        Self {
            fx,
            fy: fx,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
        }
    }
}

/// Camera-to-world pose plus intrinsics.
///
/// Convention: right-handed camera frame looking down `-z`, `+x` to the
/// right and `+y` up. Image rows grow downward, so a pixel at row `r` maps to
/// camera `y = -(r + 0.5 - cy) / fy`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub center: Vec3,
    pub intrinsics: Intrinsics,
    pub width: usize,
    pub height: usize,
}

impl CameraPose {
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        intrinsics: Intrinsics,
        width: usize,
        height: usize,
    ) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let z = -forward;
        let y = z.cross(&right);
        let rotation = Matrix3::from_columns(&[right, y, z]);
        Self {
            rotation,
            center: eye,
            intrinsics,
            width,
            height,
        }
    }

    /// Direction through the pixel center in the camera frame (unnormalized,
    /// `z = -1`).
    pub fn camera_direction(&self, row: f64, col: f64) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new(
            (col + 0.5 - k.cx) / k.fx,
            -(row + 0.5 - k.cy) / k.fy,
            -1.0,
        )
    }

    /// Unit world-space direction through a pixel center.
    pub fn world_direction(&self, row: usize, col: usize) -> Vec3 {
        (self.rotation * self.camera_direction(row as f64, col as f64)).normalize()
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        -self.rotation.column(2).into_owned()
    }

    /// Projects a world point, returning fractional `(row, col)` of the pixel
    /// grid and the distance along the ray from the camera center.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let local = self.rotation.transpose() * (p - self.center);
        if local.z >= -1e-9 {
            return None;
        }
        let depth = -local.z;
        let k = &self.intrinsics;
        let col = k.fx * local.x / depth + k.cx - 0.5;
        let row = -k.fy * local.y / depth + k.cy - 0.5;
        Some((row, col, local.norm()))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.center);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>, intrinsics: Intrinsics, width: usize, height: usize) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            center: m.fixed_view::<3, 1>(0, 3).into_owned(),
            intrinsics,
            width,
            height,
        }
    }

    /// Largest absolute entry of `R^T R - I`, plus the determinant error.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let dev = (r.transpose() * r - Matrix3::identity()).abs().max();
        dev.max((r.determinant() - 1.0).abs())
    }
}

/// Placement of the synthetic camera orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    /// Orbit radius as a fraction of the smallest bounds half-extent.
    pub radius_frac: f64,
    /// Camera height above the bounds center, as a fraction of the y half-extent.
    pub height_frac: f64,
    /// Look-at target height, as a fraction of the y half-extent.
    pub target_frac: f64,
    /// Angular jitter in radians applied to each orbit slot.
    pub jitter: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            fov_deg: 75.0,
            radius_frac: 0.5,
            height_frac: 0.15,
            target_frac: -0.45,
            jitter: 0.25,
        }
    }
}

/// Cameras on a jittered orbit with the default rig.
pub fn generate_cameras(scene: &AnalyticScene, n_views: usize, seed: u64) -> Result<Vec<CameraPose>> {
    generate_cameras_with(scene, &CameraRig::default(), n_views, seed)
}

pub fn generate_cameras_with(
    scene: &AnalyticScene,
    rig: &CameraRig,
    n_views: usize,
    seed: u64,
) -> Result<Vec<CameraPose>> {
    if n_views < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 views, got {n_views}"
        )));
    }
    if scene.bounds.volume() <= 0.0 {
        return Err(Error::DegenerateBounds(format!("{:?}", scene.bounds)));
    }
    let center = scene.bounds.center();
    let half = scene.bounds.extent() * 0.5;
    let radius = rig.radius_frac * half.x.min(half.z);
    let intrinsics = Intrinsics::from_fov(rig.width, rig.height, rig.fov_deg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cams = Vec::with_capacity(n_views);
    for i in 0..n_views {
        let phi = std::f64::consts::TAU * i as f64 / n_views as f64
            + rng.random_range(-rig.jitter..=rig.jitter);
        let r = radius * rng.random_range(0.85..=1.0);
        let h = rig.height_frac * half.y * rng.random_range(0.5..=1.5);
        let eye = center + Vec3::new(r * phi.cos(), h, r * phi.sin());
        // Look across the room toward the opposite side, slightly downward.
        let across = center
            + Vec3::new(
                -0.35 * half.x * phi.cos(),
                rig.target_frac * half.y,
                -0.35 * half.z * phi.sin(),
            );
        let target = across
            + Vec3::new(
                rng.random_range(-0.1..=0.1) * half.x,
                0.0,
                rng.random_range(-0.1..=0.1) * half.z,
            );
        cams.push(CameraPose::look_at(
            eye,
            target,
            Vec3::new(0.0, 1.0, 0.0),
            intrinsics,
            rig.width,
            rig.height,
        ));
    }
    Ok(cams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Aabb;

    #[test]
    fn deterministic_for_seed() {
        let scene = AnalyticScene::default_room();
        let a = generate_cameras(&scene, 8, 0).unwrap();
        let b = generate_cameras(&scene, 8, 0).unwrap();
        assert_eq!(a, b);
        let c = generate_cameras(&scene, 8, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rotations_are_proper() {
        let scene = AnalyticScene::default_room();
        for cam in generate_cameras(&scene, 16, 5).unwrap() {
            assert!(cam.orthonormality_error() < 1e-6);
            assert!((cam.rotation.determinant() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn centers_inside_bounds() {
        let scene = AnalyticScene::default_room();
        for cam in generate_cameras(&scene, 16, 9).unwrap() {
            assert!(scene.bounds.contains_strict(&cam.center));
            assert!(scene.sdf(&cam.center) > 0.05);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let scene = AnalyticScene::default_room();
        assert!(generate_cameras(&scene, 1, 0).is_err());
        let flat = AnalyticScene::new(scene.primitives.clone(), Aabb::new([0.0; 3], [1.0, 0.0, 1.0]));
        assert!(matches!(
            generate_cameras(&flat, 4, 0),
            Err(Error::DegenerateBounds(_))
        ));
    }

    #[test]
    fn projection_inverts_direction() {
        let scene = AnalyticScene::default_room();
        let cam = &generate_cameras(&scene, 4, 2).unwrap()[1];
        let d = cam.world_direction(17, 90);
        let p = cam.center + d * 0.8;
        let (row, col, dist) = cam.project(&p).unwrap();
        assert!((row - 17.0).abs() < 1e-9 && (col - 90.0).abs() < 1e-9);
        assert!((dist - 0.8).abs() < 1e-12);
    }
}
