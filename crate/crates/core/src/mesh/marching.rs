use std::collections::HashMap;

use rayon::prelude::*;

use super::table::{case_index, face_is_ambiguous, loops, CORNERS, EDGES, FACE_CORNERS};
use super::Mesh;
use crate::error::{Error, Result};
use crate::fields::HybridGeometryField;
use crate::scene::{Aabb, Vec3};

/// Grid and cleanup settings for surface extraction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshOptions {
    /// Cells per axis.
    pub resolution: usize,
    /// Connected components with fewer triangles are dropped.
    pub min_component_triangles: usize,
    /// Points per field evaluation call.
    pub chunk: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            resolution: 256,
            min_component_triangles: 50,
            chunk: 8192,
        }
    }
}

/// Zero level set of a learned field over `bounds`.
pub fn extract_mesh(field: &HybridGeometryField, opts: &MeshOptions, bounds: &Aabb) -> Result<Mesh> {
    extract_mesh_with(|p| field.sdf_batch(p), opts, bounds)
}

/// Zero level set of any batched scalar field. Negative values are inside.
pub fn extract_mesh_with<F>(field: F, opts: &MeshOptions, bounds: &Aabb) -> Result<Mesh>
where
    F: Fn(&[Vec3]) -> Vec<f64> + Sync,
{
    let n = opts.resolution;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 2, got {n}")));
    }
    let ext = bounds.extent();
    if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
        return Err(Error::DegenerateBounds(format!("{bounds:?}")));
    }
    let np = n + 1;
    let lo = Vec3::from(bounds.min);
    let step = ext / n as f64;
    let point = |i: usize, j: usize, k: usize| lo + Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z);
    let chunk = opts.chunk.max(1);
    let slice = |k: usize| -> Vec<f64> {
        let pts: Vec<Vec3> = (0..np * np).map(|ij| point(ij % np, ij / np, k)).collect();
        pts.par_chunks(chunk).flat_map_iter(|c| field(c)).collect()
    };
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut lookup: HashMap<u64, u32> = HashMap::new();
    let mut tris: Vec<[u32; 3]> = Vec::new();
    let mut below = slice(0);
    for k in 0..n {
        let above = slice(k + 1);
        let value = |i: usize, j: usize, dk: usize| {
            let v = if dk == 0 { below[j * np + i] } else { above[j * np + i] };
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        for j in 0..n {
            for i in 0..n {
                let mut vals = [0.0; 8];
                let mut inside = 0u8;
                for (c, o) in CORNERS.iter().enumerate() {
                    vals[c] = value(i + o[0], j + o[1], o[2]);
                    if vals[c] < 0.0 {
                        inside |= 1 << c;
                    }
                }
                if inside == 0 || inside == 0xFF {
                    continue;
                }
                let face_inside = std::array::from_fn(|f| {
                    face_is_ambiguous(inside, f) && FACE_CORNERS[f].iter().map(|&c| vals[c]).sum::<f64>() < 0.0
                });
                for lp in loops(case_index(inside, face_inside)) {
                    let mut ids: Vec<u32> = Vec::with_capacity(lp.edges.len() + 1);
                    for &e in &lp.edges {
                        let [a, b] = EDGES[e];
                        let (oa, ob) = (CORNERS[a], CORNERS[b]);
                        let axis = (0..3).find(|&d| oa[d] != ob[d]).unwrap();
                        let (gi, gj, gk) = (i + oa[0].min(ob[0]), j + oa[1].min(ob[1]), k + oa[2].min(ob[2]));
                        let key = (((gk * np + gj) * np + gi) * 3 + axis) as u64;
                        ids.push(*lookup.entry(key).or_insert_with(|| {
                            let (va, vb) = (vals[a], vals[b]);
                            let s = (va / (va - vb)).clamp(0.0, 1.0);
                            let pa = point(i + oa[0], j + oa[1], k + oa[2]);
                            let pb = point(i + ob[0], j + ob[1], k + ob[2]);
                            vertices.push(pa + (pb - pa) * s);
                            (vertices.len() - 1) as u32
                        }));
                    }
                    if lp.apex.is_none() {
                        let c = ids.iter().map(|&v| vertices[v as usize]).sum::<Vec3>() / ids.len() as f64;
                        vertices.push(c);
                        ids.push((vertices.len() - 1) as u32);
                    }
                    for t in lp.triangles() {
                        tris.push(t.map(|q| ids[q]));
                    }
                }
            }
        }
        below = above;
    }
    let mut mesh = Mesh::new(vertices, tris);
    mesh.remove_degenerate();
    mesh.remove_small_components(opts.min_component_triangles);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(r: f64) -> impl Fn(&[Vec3]) -> Vec<f64> + Sync {
        move |p: &[Vec3]| p.iter().map(|x| x.norm() - r).collect()
    }

    fn opts(resolution: usize) -> MeshOptions {
        MeshOptions {
            resolution,
            min_component_triangles: 0,
            chunk: 4096,
        }
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let m = extract_mesh_with(sphere(0.5), &opts(24), &Aabb::cube(1.0)).unwrap();
        assert!(m.triangles.len() > 100);
        assert!(m.is_closed_manifold());
        for t in &m.triangles {
            let [a, b, c] = t.map(|i| m.vertices[i as usize]);
            let nrm = (b - a).cross(&(c - a));
            let centroid = (a + b + c) / 3.0;
            assert!(nrm.dot(&centroid) > 0.0);
        }
        // Volume from the divergence theorem against the analytic ball.
        let vol = m.signed_volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!((vol - exact).abs() / exact < 0.02, "{vol} vs {exact}");
    }

    #[test]
    fn positive_field_gives_empty_mesh() {
        let m = extract_mesh_with(|p: &[Vec3]| vec![1.0; p.len()], &opts(8), &Aabb::cube(1.0)).unwrap();
        assert!(m.triangles.is_empty() && m.vertices.is_empty());
    }

    #[test]
    fn saddle_fields_stay_watertight() {
        // Two nearby balls produce ambiguous faces where they almost touch.
        let f = |p: &[Vec3]| -> Vec<f64> {
            p.iter()
                .map(|x| {
                    let a = (x - Vec3::new(-0.26, 0.0, 0.0)).norm() - 0.25;
                    let b = (x - Vec3::new(0.26, 0.03, 0.0)).norm() - 0.25;
                    a.min(b)
                })
                .collect()
        };
        for res in [9, 16, 23, 30] {
            let m = extract_mesh_with(f, &opts(res), &Aabb::cube(0.7)).unwrap();
            assert!(m.is_closed_manifold(), "res {res}");
        }
        // Random trilinear noise exercises every case including ambiguous ones.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g: Vec<f64> = (0..9 * 9 * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise = |p: &[Vec3]| -> Vec<f64> {
            p.iter()
                .map(|x| {
                    let idx = |v: f64| (((v + 1.0) * 4.0).round() as usize).min(8);
                    let boundary = x.iter().any(|c| c.abs() > 0.999);
                    if boundary {
                        1.0
                    } else {
                        g[(idx(x.z) * 9 + idx(x.y)) * 9 + idx(x.x)]
                    }
                })
                .collect()
        };
        let m = extract_mesh_with(noise, &opts(8), &Aabb::cube(1.0)).unwrap();
        assert!(m.triangles.len() > 50);
        assert!(m.is_closed_manifold());
    }

    #[test]
    fn small_components_removed() {
        let f = |p: &[Vec3]| -> Vec<f64> {
            p.iter()
                .map(|x| {
                    let big = x.norm() - 0.6;
                    let tiny = (x - Vec3::new(0.85, 0.85, 0.85)).norm() - 0.06;
                    big.min(tiny)
                })
                .collect()
        };
        let all = extract_mesh_with(f, &opts(32), &Aabb::cube(1.0)).unwrap();
        let cleaned = extract_mesh_with(
            f,
            &MeshOptions {
                min_component_triangles: 100,
                ..opts(32)
            },
            &Aabb::cube(1.0),
        )
        .unwrap();
        assert!(cleaned.triangles.len() < all.triangles.len());
        assert!(cleaned.vertices.iter().all(|v| v.norm() < 0.7));
    }
}
