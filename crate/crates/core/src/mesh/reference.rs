//! Reference surfaces from oracle depth, and visibility culling.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scene::{CameraPose, Vec3};

/// A camera in original world units together with its oracle depth map
/// (distance along the pixel ray, 0 where nothing was hit).
#[derive(Debug, Clone)]
pub struct ViewFrustum {
    pub camera: CameraPose,
    pub depth: Vec<f64>,
}

impl ViewFrustum {
    pub fn from_dataset(ds: &Dataset) -> Result<Vec<ViewFrustum>> {
        let gt = ds
            .gt
            .as_ref()
            .ok_or_else(|| Error::Empty("dataset has no ground-truth depth".into()))?;
        let inv = ds.transform.inverse();
        Ok(ds
            .frames
            .iter()
            .zip(&gt.depth)
            .map(|(f, d)| ViewFrustum {
                camera: inv.apply_pose(&f.pose),
                depth: d.clone(),
            })
            .collect())
    }

    /// Whether `p` projects into the image no further than the oracle
    /// surface plus `margin`.
    pub fn sees(&self, p: &Vec3, margin: f64) -> bool {
        let c = &self.camera;
        let Some((row, col, dist)) = c.project(p) else {
            return false;
        };
        let (r, k) = (row.round(), col.round());
        if r < 0.0 || k < 0.0 || r >= c.height as f64 || k >= c.width as f64 {
            return false;
        }
        let d = self.depth[r as usize * c.width + k as usize];
        d <= 0.0 || dist <= d + margin
    }
}

/// World-frame points of every pixel with oracle depth, fused over all views.
pub fn gt_point_cloud(ds: &Dataset) -> Result<Vec<Vec3>> {
    let views = ViewFrustum::from_dataset(ds)?;
    let mut out = Vec::new();
    for v in &views {
        let c = &v.camera;
        for row in 0..c.height {
            for col in 0..c.width {
                let d = v.depth[row * c.width + col];
                if d > 0.0 {
                    out.push(c.center + c.world_direction(row, col) * d);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no oracle depth in any view".into()));
    }
    Ok(out)
}

/// Keeps points that at least one view observes (see [`ViewFrustum::sees`]).
pub fn cull_to_views(points: &[Vec3], views: &[ViewFrustum], margin: f64) -> Vec<Vec3> {
    points
        .par_iter()
        .filter(|p| views.iter().any(|v| v.sees(p, margin)))
        .copied()
        .collect()
}
