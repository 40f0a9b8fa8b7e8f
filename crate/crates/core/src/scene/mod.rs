//! Analytic scenes used as ground-truth oracles.
//!
//! A scene is a union of a handful of primitives whose signed distance is
//! known in closed form. Free space is positive, solid material negative, so
//! a room shell is the negated box distance: the interior of the room is free
//! space and the walls bound it.

mod bias;
mod camera;
mod export;
mod frame;
mod trace;

pub use bias::{inject_view_bias, rotation_from_axis_angle, AxisRule, BiasMode, BiasSpec, BiasedNormals};
pub use camera::{generate_cameras, generate_cameras_with, CameraPose, CameraRig, Intrinsics};
pub use export::{write_dataset, SynthConfig, SynthData, SynthSummary};
pub use frame::{render_gt_frame, GtFrame, LIGHT_DIRECTION};
pub use trace::{sphere_trace, Hit, TraceParams};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn cube(half: f64) -> Self {
        Self::new([-half; 3], [half; 3])
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.max[0] + self.min[0]),
            0.5 * (self.max[1] + self.min[1]),
            0.5 * (self.max[2] + self.min[2]),
        )
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x.max(0.0) * e.y.max(0.0) * e.z.max(0.0)
    }

    /// Strict interior test.
    pub fn contains_strict(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Slab test. Returns the parametric entry and exit distances of the ray
    /// with the box, or `None` when the ray misses it entirely.
    pub fn ray_interval(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-12 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t1 >= t0 && t1 > 0.0).then_some((t0, t1))
    }
}

/// Primitive shape kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: [f64; 3], radius: f64 },
    Box { center: [f64; 3], half_extents: [f64; 3] },
    /// Hollow room: free space inside the box, solid outside.
    RoomShell { center: [f64; 3], half_extents: [f64; 3] },
}

fn box_sdf(p: &Vec3, center: &[f64; 3], half: &[f64; 3]) -> f64 {
    let q = Vec3::new(
        (p.x - center[0]).abs() - half[0],
        (p.y - center[1]).abs() - half[1],
        (p.z - center[2]).abs() - half[2],
    );
    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

impl Shape {
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Shape::Sphere { center, radius } => {
                (p - Vec3::from_column_slice(center)).norm() - radius
            }
            Shape::Box {
                center,
                half_extents,
            } => box_sdf(p, center, half_extents),
            Shape::RoomShell {
                center,
                half_extents,
            } => -box_sdf(p, center, half_extents),
        }
    }

    /// Bounding box of the solid (for the shell, of the inner cavity).
    pub fn aabb(&self) -> Aabb {
        match self {
            Shape::Sphere { center, radius } => Aabb::new(
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Shape::Box {
                center,
                half_extents: h,
            }
            | Shape::RoomShell {
                center,
                half_extents: h,
            } => Aabb::new(
                [center[0] - h[0], center[1] - h[1], center[2] - h[2]],
                [center[0] + h[0], center[1] + h[1], center[2] + h[2]],
            ),
        }
    }
}

/// Two-tone checker albedo modulation in world coordinates. The axis closest
/// to the surface normal is dropped, so axis-aligned faces get a flat 2D
/// pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checker {
    pub cell: f64,
    /// Dark squares are scaled by `1 - contrast`.
    pub contrast: f64,
}

impl Checker {
    pub const ROOM: Checker = Checker {
        cell: 0.25,
        contrast: 0.35,
    };

    pub fn factor(&self, p: &Vec3, normal: &Vec3) -> f64 {
        let drop = normal.iamax();
        let parity: i64 = (0..3)
            .filter(|k| *k != drop)
            .map(|k| (p[k] / self.cell).floor() as i64)
            .sum();
        if parity.rem_euclid(2) == 0 {
            1.0
        } else {
            1.0 - self.contrast
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Checker>,
}

impl Primitive {
    /// Albedo at surface point `p` with normal `normal`.
    pub fn albedo_at(&self, p: &Vec3, normal: &Vec3) -> [f64; 3] {
        let k = self.pattern.map_or(1.0, |c| c.factor(p, normal));
        self.albedo.map(|a| a * k)
    }
}

/// CSG union of primitives together with the region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticScene {
    pub primitives: Vec<Primitive>,
    pub bounds: Aabb,
}

impl AnalyticScene {
    pub fn new(primitives: Vec<Primitive>, bounds: Aabb) -> Self {
        Self { primitives, bounds }
    }

    /// Unit sphere at the origin, bounded by `[-2, 2]^3`.
    pub fn unit_sphere() -> Self {
        Self::new(
            vec![Primitive {
                shape: Shape::Sphere {
                    center: [0.0; 3],
                    radius: 1.0,
                },
                albedo: [0.7; 3],
                pattern: None,
            }],
            Aabb::cube(2.0),
        )
    }

    /// The default room: a 2x2x2 shell holding one box and one sphere.
    pub fn default_room() -> Self {
        Self::new(
            vec![
                Primitive {
                    shape: Shape::RoomShell {
                        center: [0.0; 3],
                        half_extents: [1.0; 3],
                    },
                    albedo: [0.75, 0.72, 0.68],
                    pattern: Some(Checker::ROOM),
                },
                Primitive {
                    shape: Shape::Box {
                        center: [0.4, -0.7, 0.3],
                        half_extents: [0.25, 0.3, 0.25],
                    },
                    albedo: [0.8, 0.35, 0.25],
                    pattern: Some(Checker::ROOM),
                },
                Primitive {
                    shape: Shape::Sphere {
                        center: [-0.4, -0.68, -0.3],
                        radius: 0.32,
                    },
                    albedo: [0.25, 0.45, 0.85],
                    pattern: Some(Checker::ROOM),
                },
            ],
            Aabb::cube(1.0),
        )
    }

    /// Smoke-test scene: the room shell with a single box.
    pub fn smoke_box() -> Self {
        Self::new(
            vec![
                Primitive {
                    shape: Shape::RoomShell {
                        center: [0.0; 3],
                        half_extents: [1.0; 3],
                    },
                    albedo: [0.75, 0.72, 0.68],
                    pattern: Some(Checker::ROOM),
                },
                Primitive {
                    shape: Shape::Box {
                        center: [0.0, -0.7, 0.0],
                        half_extents: [0.3, 0.3, 0.3],
                    },
                    albedo: [0.8, 0.35, 0.25],
                    pattern: Some(Checker::ROOM),
                },
            ],
            Aabb::cube(1.0),
        )
    }

    /// Room with a table standing on four thin legs.
    pub fn table_room() -> Self {
        let leg_half = [0.035, 0.3, 0.035];
        let legs = [(-0.35, -0.25), (0.35, -0.25), (-0.35, 0.25), (0.35, 0.25)];
        let mut primitives = vec![
            Primitive {
                shape: Shape::RoomShell {
                    center: [0.0; 3],
                    half_extents: [1.0; 3],
                },
                albedo: [0.75, 0.72, 0.68],
                pattern: Some(Checker::ROOM),
            },
            Primitive {
                shape: Shape::Box {
                    center: [0.0, -0.36, 0.0],
                    half_extents: [0.45, 0.04, 0.33],
                },
                albedo: [0.55, 0.35, 0.2],
                pattern: Some(Checker::ROOM),
            },
        ];
        for (x, z) in legs {
            primitives.push(Primitive {
                shape: Shape::Box {
                    center: [x, -0.7, z],
                    half_extents: leg_half,
                },
                albedo: [0.3, 0.2, 0.12],
                pattern: Some(Checker::ROOM),
            });
        }
        Self::new(primitives, Aabb::cube(1.0))
    }

    /// Signed distance at `x`: the minimum over primitives.
    pub fn sdf(&self, x: &Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.shape.sdf(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the primitive with the smallest distance at `x`.
    pub fn closest_primitive(&self, x: &Vec3) -> Option<usize> {
        self.primitives
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.shape.sdf(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Central finite-difference gradient of the scene SDF.
    pub fn gradient(&self, x: &Vec3, h: f64) -> Vec3 {
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            g[k] = (self.sdf(&(x + e)) - self.sdf(&(x - e))) / (2.0 * h);
        }
        g
    }

    /// Distance from `x` to the nearest CSG seam, estimated as the gap between
    /// the two smallest primitive distances.
    pub fn seam_gap(&self, x: &Vec3) -> f64 {
        let mut d: Vec<f64> = self.primitives.iter().map(|p| p.shape.sdf(x)).collect();
        if d.len() < 2 {
            return f64::INFINITY;
        }
        d.sort_by(f64::total_cmp);
        d[1] - d[0]
    }
}

/// Free-function form of [`AnalyticScene::sdf`].
pub fn scene_sdf(scene: &AnalyticScene, x: &Vec3) -> f64 {
    scene.sdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_distances() {
        let s = AnalyticScene::unit_sphere();
        assert_eq!(s.sdf(&Vec3::new(0.0, 0.0, 2.0)), 1.0);
        assert_eq!(s.sdf(&Vec3::zeros()), -1.0);
    }

    #[test]
    fn checker_alternates_along_a_wall_and_ignores_the_normal_axis() {
        let c = Checker::ROOM;
        let n = Vec3::new(1.0, 0.0, 0.0);
        let a = c.factor(&Vec3::new(1.0, 0.1, 0.1), &n);
        let b = c.factor(&Vec3::new(1.0, 0.35, 0.1), &n);
        assert_eq!(a, 1.0);
        assert!((b - 0.65).abs() < 1e-12);
        assert_eq!(c.factor(&Vec3::new(0.999, 0.1, 0.1), &n), c.factor(&Vec3::new(1.001, 0.1, 0.1), &n));
    }

    #[test]
    fn box_face_distance() {
        let s = AnalyticScene::new(
            vec![Primitive {
                shape: Shape::Box {
                    center: [0.0; 3],
                    half_extents: [1.0; 3],
                },
                albedo: [1.0; 3],
                pattern: None,
            }],
            Aabb::cube(3.0),
        );
        assert_eq!(s.sdf(&Vec3::new(2.0, 0.0, 0.0)), 1.0);
        assert!((s.sdf(&Vec3::new(2.0, 2.0, 1.0)) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.sdf(&Vec3::zeros()), -1.0);
    }

    #[test]
    fn room_shell_is_positive_inside() {
        let room = AnalyticScene::default_room();
        assert!(room.sdf(&Vec3::new(0.0, 0.5, 0.0)) > 0.0);
        assert!(room.sdf(&Vec3::new(0.0, 1.5, 0.0)) < 0.0);
    }

    #[test]
    fn primitives_fit_in_bounds() {
        for scene in [AnalyticScene::default_room(), AnalyticScene::table_room()] {
            for p in &scene.primitives {
                let b = p.shape.aabb();
                for i in 0..3 {
                    assert!(b.min[i] >= scene.bounds.min[i] - 1e-12);
                    assert!(b.max[i] <= scene.bounds.max[i] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn eikonal_on_single_primitives() {
        let shapes = [
            Shape::Sphere {
                center: [0.1, -0.2, 0.3],
                radius: 0.7,
            },
            Shape::Box {
                center: [0.0, 0.1, 0.0],
                half_extents: [0.5, 0.3, 0.4],
            },
            Shape::RoomShell {
                center: [0.0; 3],
                half_extents: [1.0; 3],
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for shape in shapes {
            let scene = AnalyticScene::new(
                vec![Primitive {
                    shape: shape.clone(),
                    albedo: [1.0; 3],
                    pattern: None,
                }],
                Aabb::cube(2.0),
            );
            let mut checked = 0;
            while checked < 1000 {
                let x = Vec3::new(
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.5..1.5),
                );
                // Box distances have creases along the medial axis; skip points
                // where the two nearest faces are nearly tied.
                if !away_from_medial_axis(&shape, &x, 0.01) {
                    continue;
                }
                let g = scene.gradient(&x, 1e-5);
                assert!((g.norm() - 1.0).abs() < 1e-3, "{shape:?} at {x:?}: {}", g.norm());
                checked += 1;
            }
        }
    }

    fn away_from_medial_axis(shape: &Shape, x: &Vec3, margin: f64) -> bool {
        match shape {
            Shape::Sphere { center, .. } => (x - Vec3::from_column_slice(center)).norm() > margin,
            Shape::Box {
                center,
                half_extents: h,
            }
            | Shape::RoomShell {
                center,
                half_extents: h,
            } => {
                let q: Vec<f64> = (0..3).map(|i| (x[i] - center[i]).abs() - h[i]).collect();
                let inside = q.iter().all(|v| *v < 0.0);
                if inside {
                    let mut s = q.clone();
                    s.sort_by(|a, b| b.total_cmp(a));
                    s[0] - s[1] > margin
                } else {
                    q.iter().all(|v| v.abs() > margin)
                }
            }
        }
    }

    #[test]
    fn ray_box_interval() {
        let b = Aabb::cube(1.0);
        let (t0, t1) = b
            .ray_interval(&Vec3::new(0.0, 0.0, 3.0), &Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert!((t0 - 2.0).abs() < 1e-12 && (t1 - 4.0).abs() < 1e-12);
        assert!(b
            .ray_interval(&Vec3::new(0.0, 0.0, 3.0), &Vec3::new(0.0, 0.0, 1.0))
            .is_none());
    }
}
