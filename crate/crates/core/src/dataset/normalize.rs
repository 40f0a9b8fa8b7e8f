use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::scene::{Aabb, CameraPose, Vec3};

/// Longest axis of the region of interest after normalization.
pub const NORMALIZED_EXTENT: f64 = 1.8;

/// `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    pub fn apply_direction(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    pub fn compose(&self, inner: &Similarity) -> Self {
        Self {
            scale: self.scale * inner.scale,
            rotation: self.rotation * inner.rotation,
            translation: self.apply(&inner.translation),
        }
    }

    pub fn apply_pose(&self, pose: &CameraPose) -> CameraPose {
        CameraPose {
            rotation: self.rotation * pose.rotation,
            center: self.apply(&pose.center),
            ..pose.clone()
        }
    }
}

/// Similarity that centers `bounds` at the origin and maps its longest axis
/// to [`NORMALIZED_EXTENT`]. Poses are only checked for finite centers.
pub fn normalize_scene(poses: &[CameraPose], bounds: &Aabb) -> Result<Similarity> {
    let e = bounds.extent();
    let longest = e.x.max(e.y).max(e.z);
    if !(longest > 1e-12) || !longest.is_finite() {
        return Err(Error::DegenerateBounds(format!("{bounds:?}")));
    }
    if let Some(p) = poses.iter().find(|p| !p.center.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "non-finite camera center {:?}",
            p.center
        )));
    }
    let scale = NORMALIZED_EXTENT / longest;
    Ok(Similarity {
        scale,
        rotation: Matrix3::identity(),
        translation: -bounds.center() * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_normalized_is_identity() {
        let t = normalize_scene(&[], &Aabb::cube(0.9)).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-15);
        assert_eq!(t.translation, Vec3::zeros());
    }

    #[test]
    fn unit_box_closed_form() {
        let t = normalize_scene(&[], &Aabb::new([0.0; 3], [2.0; 3])).unwrap();
        assert!((t.scale - 0.9).abs() < 1e-15);
        assert!((t.translation - Vec3::new(-0.9, -0.9, -0.9)).norm() < 1e-15);
        assert!(t.apply(&Vec3::new(2.0, 2.0, 2.0)).iter().all(|v| (v - 0.9).abs() < 1e-12));
    }

    #[test]
    fn inverse_round_trip() {
        let t = normalize_scene(&[], &Aabb::new([-3.0, 0.5, 1.0], [4.0, 2.0, 2.5])).unwrap();
        let id = t.compose(&t.inverse());
        assert!((id.scale - 1.0).abs() < 1e-9);
        assert!(id.translation.norm() < 1e-9);
        let p = Vec3::new(0.3, -7.0, 2.2);
        assert!((t.inverse().apply(&t.apply(&p)) - p).norm() < 1e-9);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(normalize_scene(&[], &Aabb::new([1.0; 3], [1.0; 3])).is_err());
    }
}
