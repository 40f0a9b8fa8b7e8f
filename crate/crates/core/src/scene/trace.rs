use super::{AnalyticScene, Vec3};

/// Sphere tracing parameters.
#[derive(Debug, Clone, Copy)]
pub struct TraceParams {
    pub max_steps: usize,
    pub epsilon: f64,
    pub far: f64,
    pub normal_step: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            max_steps: 256,
            epsilon: 1e-4,
            far: 10.0,
            normal_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
}

/// Marches along `origin + t * dir` stepping by the scene distance until it
/// falls under `epsilon`. `dir` must be unit length.
pub fn sphere_trace(
    scene: &AnalyticScene,
    origin: &Vec3,
    dir: &Vec3,
    params: &TraceParams,
) -> Option<Hit> {
    let mut t = 0.0;
    for _ in 0..params.max_steps {
        let p = origin + dir * t;
        let d = scene.sdf(&p);
        if d.abs() < params.epsilon {
            let g = scene.gradient(&p, params.normal_step);
            let n = g.norm();
            if n == 0.0 {
                return None;
            }
            return Some(Hit {
                t,
                point: p,
                normal: g / n,
            });
        }
        // Started inside solid material: nothing visible along this ray.
        if d < 0.0 && t == 0.0 {
            return None;
        }
        t += d.abs();
        if t > params.far {
            return None;
        }
    }
    None
}
