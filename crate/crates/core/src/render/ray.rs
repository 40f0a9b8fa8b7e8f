use crate::error::{Error, Result};
use crate::scene::{Aabb, CameraPose, Vec3};

/// Pixel a ray was emitted through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PixelId {
    pub view: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
    pub near: f64,
    pub far: f64,
    pub pixel: PixelId,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Clamp range for ray segments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearFar {
    pub near: f64,
    pub far: f64,
}

impl Default for NearFar {
    fn default() -> Self {
        Self { near: 0.05, far: 6.0 }
    }
}

/// The region the fields model, in normalized coordinates.
pub fn unit_domain() -> Aabb {
    Aabb::cube(1.0)
}

/// Ray through the center of pixel `(row, col)` of view `view`. The segment
/// is the intersection with `domain`, clamped to `limits`; a ray that misses
/// the domain keeps the full clamp range.
pub fn pixel_to_ray(
    cam: &CameraPose,
    view: usize,
    row: usize,
    col: usize,
    domain: &Aabb,
    limits: NearFar,
) -> Result<Ray> {
    if row >= cam.height || col >= cam.width {
        return Err(Error::InvalidArgument(format!(
            "pixel ({row}, {col}) outside {}x{} image",
            cam.height, cam.width
        )));
    }
    let dir = cam.world_direction(row, col);
    let (mut near, mut far) = match domain.ray_interval(&cam.center, &dir) {
        Some((a, b)) => (a.max(limits.near), b.min(limits.far)),
        None => (limits.near, limits.far),
    };
    if !(far > near) {
        near = limits.near;
        far = limits.far;
    }
    Ok(Ray {
        origin: cam.center,
        dir,
        near,
        far,
        pixel: PixelId { view, row, col },
    })
}
