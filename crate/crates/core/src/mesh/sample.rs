use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Mesh;
use crate::error::{Error, Result};
use crate::scene::Vec3;

/// `n` points distributed uniformly by area over the mesh surface.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if mesh.triangles.is_empty() {
        return Err(Error::Empty("cannot sample an empty mesh".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(t);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Empty("mesh has zero area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random::<f64>() * acc;
        let t = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i as usize]);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        out.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
    }
    Ok(out)
}

/// At most `n` points chosen without replacement, deterministic per seed.
pub fn subsample(points: &[Vec3], n: usize, seed: u64) -> Vec<Vec3> {
    if points.len() <= n {
        return points.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, points.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_points_inside() {
        let m = Mesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        );
        for p in sample_surface(&m, 1000, 3).unwrap() {
            assert_eq!(p.z, 0.0);
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x / 2.0 + p.y <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn area_proportional() {
        // Triangle areas 3:1.
        let m = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(3.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(11.0, 0.0, 0.0),
                Vec3::new(10.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        );
        let pts = sample_surface(&m, 10_000, 9).unwrap();
        let first = pts.iter().filter(|p| p.x < 5.0).count() as f64;
        let ratio = first / (10_000.0 - first);
        assert!((ratio - 3.0).abs() / 3.0 < 0.05, "{ratio}");
    }

    #[test]
    fn deterministic_and_rejects_empty() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        );
        assert_eq!(sample_surface(&m, 50, 1).unwrap(), sample_surface(&m, 50, 1).unwrap());
        assert_ne!(sample_surface(&m, 50, 1).unwrap(), sample_surface(&m, 50, 2).unwrap());
        assert!(sample_surface(&Mesh::default(), 5, 0).is_err());
    }
}
