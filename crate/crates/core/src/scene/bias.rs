use nalgebra::{Rotation3, Unit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use super::{CameraPose, GtFrame, Vec3};
use crate::error::{Error, Result};

/// How the injected rotation varies across pixels and views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    None,
    /// One rotation per view, derived from the optical axis.
    ConstantPerView,
    /// Per-pixel rotation derived from the pixel's viewing direction.
    DirectionDependent,
}

/// Rotation axis as a function of a viewing direction `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AxisRule {
    Fixed { axis: [f64; 3] },
    /// Axis parallel to `v`.
    ViewDirection,
    /// Horizontal axis perpendicular to `v`: `normalize(v x up)` with world
    /// `+y` up. Tilts what the camera sees up or down.
    Horizontal,
}

impl AxisRule {
    pub fn axis(&self, view: &Vec3) -> Vec3 {
        match self {
            AxisRule::Fixed { axis } => Vec3::from_column_slice(axis).normalize(),
            AxisRule::ViewDirection => view.normalize(),
            AxisRule::Horizontal => {
                let a = view.cross(&Vec3::new(0.0, 1.0, 0.0));
                if a.norm() < 1e-9 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    a.normalize()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub mode: BiasMode,
    /// Rotation angle in radians (the maximum for direction-dependent mode).
    pub amplitude: f64,
    pub axis: AxisRule,
    /// Per-pixel isotropic rotation noise, radians.
    pub noise_std: f64,
}

impl BiasSpec {
    pub fn none() -> Self {
        Self {
            mode: BiasMode::None,
            amplitude: 0.0,
            axis: AxisRule::ViewDirection,
            noise_std: 0.0,
        }
    }

    pub fn constant_per_view(amplitude: f64, axis: AxisRule) -> Self {
        Self {
            mode: BiasMode::ConstantPerView,
            amplitude,
            axis,
            noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::FRAC_PI_4).contains(&self.amplitude) {
            return Err(Error::InvalidArgument(format!(
                "bias amplitude {} outside [0, pi/4]",
                self.amplitude
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative noise std {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    /// Rotation applied to a pixel whose viewing ray is `pixel_dir` in a view
    /// with optical axis `optical_axis`, before noise.
    pub fn rotation(&self, optical_axis: &Vec3, pixel_dir: &Vec3) -> Rotation3<f64> {
        match self.mode {
            BiasMode::None => Rotation3::identity(),
            BiasMode::ConstantPerView => {
                let axis = Unit::new_normalize(self.axis.axis(optical_axis));
                Rotation3::from_axis_angle(&axis, self.amplitude)
            }
            BiasMode::DirectionDependent => {
                let axis = Unit::new_normalize(self.axis.axis(pixel_dir));
                let angle = self.amplitude * 0.5 * (1.0 + pixel_dir.x);
                Rotation3::from_axis_angle(&axis, angle)
            }
        }
    }
}

/// Biased normals plus the exact rotation applied at each pixel, stored as an
/// axis-angle vector (zero at invalid pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedNormals {
    pub normals: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 3]>,
}

pub fn rotation_from_axis_angle(v: &[f64; 3]) -> Rotation3<f64> {
    Rotation3::new(Vec3::from_column_slice(v))
}

/// Rotates every valid normal of `frame` by the rotation `spec` assigns to it.
pub fn inject_view_bias(
    frame: &GtFrame,
    cam: &CameraPose,
    spec: &BiasSpec,
    seed: u64,
) -> Result<BiasedNormals> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (spec.noise_std > 0.0)
        .then(|| Normal::new(0.0, spec.noise_std).expect("finite std"));
    let axis = cam.forward();
    let n = frame.width * frame.height;
    let mut normals = vec![[0.0; 3]; n];
    let mut rotations = vec![[0.0; 3]; n];
    for row in 0..frame.height {
        for col in 0..frame.width {
            let i = frame.index(row, col);
            if !frame.valid[i] {
                continue;
            }
            let dir = cam.world_direction(row, col);
            let mut r = spec.rotation(&axis, &dir);
            if let Some(noise) = &noise {
                let a: [f64; 3] = UnitSphere.sample(&mut rng);
                let angle = noise.sample(&mut rng);
                let jitter = Rotation3::from_axis_angle(
                    &Unit::new_normalize(Vec3::from_column_slice(&a)),
                    angle,
                );
                r = jitter * r;
            }
            let nrm = Vec3::from_column_slice(&frame.normals[i]);
            let out = r * nrm;
            normals[i] = [out.x, out.y, out.z];
            let sa = r.scaled_axis();
            rotations[i] = [sa.x, sa.y, sa.z];
        }
    }
    Ok(BiasedNormals { normals, rotations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_cameras, render_gt_frame, AnalyticScene};

    fn room_view() -> (GtFrame, CameraPose) {
        let scene = AnalyticScene::default_room();
        let mut rig = crate::scene::CameraRig::default();
        rig.width = 40;
        rig.height = 32;
        let cam = crate::scene::generate_cameras_with(&scene, &rig, 4, 1)
            .unwrap()
            .remove(2);
        (render_gt_frame(&scene, &cam), cam)
    }

    #[test]
    fn none_is_identity() {
        let (frame, cam) = room_view();
        let out = inject_view_bias(&frame, &cam, &BiasSpec::none(), 0).unwrap();
        assert_eq!(out.normals, frame.normals);
    }

    #[test]
    fn fixed_z_rotation_angle() {
        let (frame, cam) = room_view();
        let amp = 10f64.to_radians();
        let spec = BiasSpec::constant_per_view(amp, AxisRule::Fixed { axis: [0.0, 0.0, 1.0] });
        let out = inject_view_bias(&frame, &cam, &spec, 0).unwrap();
        let mut checked = 0;
        for i in 0..frame.valid.len() {
            if !frame.valid[i] {
                continue;
            }
            let a = Vec3::from_column_slice(&frame.normals[i]);
            if a.z.abs() > 1e-6 {
                continue;
            }
            let b = Vec3::from_column_slice(&out.normals[i]);
            assert!((a.angle(&b) - amp).abs() < 1e-9);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn unit_length_and_invertible() {
        let (frame, cam) = room_view();
        let mut spec = BiasSpec::constant_per_view(0.3, AxisRule::Horizontal);
        spec.mode = BiasMode::DirectionDependent;
        spec.noise_std = 0.05;
        let out = inject_view_bias(&frame, &cam, &spec, 11).unwrap();
        for i in 0..frame.valid.len() {
            if !frame.valid[i] {
                continue;
            }
            let b = Vec3::from_column_slice(&out.normals[i]);
            assert!((b.norm() - 1.0).abs() < 1e-5);
            let back = rotation_from_axis_angle(&out.rotations[i]).inverse() * b;
            let a = Vec3::from_column_slice(&frame.normals[i]);
            assert!((back - a).norm() < 1e-6);
        }
    }

    #[test]
    fn rejects_large_amplitude() {
        let (frame, cam) = room_view();
        let spec = BiasSpec::constant_per_view(1.0, AxisRule::ViewDirection);
        assert!(inject_view_bias(&frame, &cam, &spec, 0).is_err());
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let scene = AnalyticScene::default_room();
        let cam = generate_cameras(&scene, 2, 0).unwrap().remove(0);
        let frame = render_gt_frame(&scene, &cam);
        let mut spec = BiasSpec::constant_per_view(0.1, AxisRule::Horizontal);
        spec.noise_std = 0.02;
        let a = inject_view_bias(&frame, &cam, &spec, 4).unwrap();
        let b = inject_view_bias(&frame, &cam, &spec, 4).unwrap();
        assert_eq!(a, b);
    }
}
