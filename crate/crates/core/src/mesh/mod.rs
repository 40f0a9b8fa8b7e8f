//! Surface extraction, point sampling and reconstruction metrics.

pub mod kdtree;
pub mod marching;
pub mod metrics;
pub mod reference;
pub mod sample;
pub mod table;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::Similarity;
use crate::error::{Error, Result};
use crate::scene::Vec3;

pub use kdtree::KdTree;
pub use marching::{extract_mesh, extract_mesh_with, MeshOptions};
pub use metrics::{eval_metrics, f_score, EvalReport};
pub use reference::{cull_to_views, gt_point_cloud, ViewFrustum};
pub use sample::{sample_surface, subsample};

/// Triangle mesh with optional per-vertex normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn corners(&self, t: &[u32; 3]) -> [Vec3; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(&self.triangles[t]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Volume enclosed by a closed, outward-oriented mesh.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Merges vertices with identical coordinates, drops triangles with
    /// repeated indices or zero area, then unused vertices.
    pub fn remove_degenerate(&mut self) {
        let mut first: HashMap<[u64; 3], u32> = HashMap::new();
        let remap: Vec<u32> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| *first.entry([v.x, v.y, v.z].map(|c| (c + 0.0).to_bits())).or_insert(i as u32))
            .collect();
        for t in self.triangles.iter_mut() {
            for i in t.iter_mut() {
                *i = remap[*i as usize];
            }
        }
        let keep: Vec<[u32; 3]> = self
            .triangles
            .iter()
            .copied()
            .filter(|t| {
                if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                    return false;
                }
                let [a, b, c] = self.corners(t);
                (b - a).cross(&(c - a)).norm() > 0.0
            })
            .collect();
        self.triangles = keep;
        self.compact();
    }

    /// Drops connected components (sharing vertices) with fewer than `min` triangles.
    pub fn remove_small_components(&mut self, min: usize) {
        if min <= 1 || self.triangles.is_empty() {
            return;
        }
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, t[0]), find(&mut parent, t[k]));
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
            }
        }
        let mut size: HashMap<u32, usize> = HashMap::new();
        let roots: Vec<u32> = self.triangles.iter().map(|t| find(&mut parent, t[0])).collect();
        for r in &roots {
            *size.entry(*r).or_default() += 1;
        }
        let tris = std::mem::take(&mut self.triangles);
        self.triangles = tris
            .into_iter()
            .zip(roots)
            .filter(|(_, r)| size[r] >= min)
            .map(|(t, _)| t)
            .collect();
        self.compact();
    }

    /// Removes vertices no triangle references.
    fn compact(&mut self) {
        let mut map = vec![u32::MAX; self.vertices.len()];
        let mut verts = Vec::new();
        let mut norms = Vec::new();
        for t in self.triangles.iter_mut() {
            for i in t.iter_mut() {
                let old = *i as usize;
                if map[old] == u32::MAX {
                    map[old] = verts.len() as u32;
                    verts.push(self.vertices[old]);
                    if let Some(n) = &self.normals {
                        norms.push(n[old]);
                    }
                }
                *i = map[old];
            }
        }
        self.vertices = verts;
        if self.normals.is_some() {
            self.normals = Some(norms);
        }
    }

    /// Every undirected edge is shared by exactly two triangles with opposite
    /// directions.
    pub fn is_closed_manifold(&self) -> bool {
        let mut count: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = count.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        count.values().all(|&(f, r)| f == 1 && r == 1)
    }

    /// Area-weighted vertex normals.
    pub fn compute_normals(&mut self) {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = self.corners(t);
            let f = (b - a).cross(&(c - a));
            for i in t {
                n[*i as usize] += f;
            }
        }
        for v in n.iter_mut() {
            let l = v.norm();
            if l > 0.0 {
                *v /= l;
            }
        }
        self.normals = Some(n);
    }

    /// Applies a similarity to vertices and normals.
    pub fn transformed(&self, s: &Similarity) -> Mesh {
        let flip = s.scale < 0.0;
        Mesh {
            vertices: self.vertices.iter().map(|v| s.apply(v)).collect(),
            triangles: if flip {
                self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect()
            } else {
                self.triangles.clone()
            },
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| s.apply_direction(n).normalize()).collect()),
        }
    }

    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        if self.normals.is_some() {
            s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
        }
        let _ = writeln!(s, "element face {}", self.triangles.len());
        s.push_str("property list uchar int vertex_indices\nend_header\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = write!(s, "{} {} {}", v.x, v.y, v.z);
            if let Some(n) = &self.normals {
                let _ = write!(s, " {} {} {}", n[i].x, n[i].y, n[i].z);
            }
            s.push('\n');
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn write_ply(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ply()).map_err(|e| Error::io(path, e))
    }

    /// Reads the ASCII PLY subset written by [`Mesh::write_ply`]: double or
    /// float vertex coordinates, optional normals, triangle faces.
    pub fn read_ply(path: &Path) -> Result<Mesh> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_ply(&text).map_err(|r| Error::malformed(path, r))
    }

    fn parse_ply(text: &str) -> std::result::Result<Mesh, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("ply") {
            return Err("missing ply magic".into());
        }
        let (mut nv, mut nf) = (0usize, 0usize);
        let mut vprops: Vec<String> = Vec::new();
        let mut current = "";
        for line in lines.by_ref() {
            let w: Vec<&str> = line.split_whitespace().collect();
            match w.as_slice() {
                ["format", fmt, ..] if *fmt != "ascii" => return Err(format!("unsupported format {fmt}")),
                ["element", "vertex", n] => {
                    nv = n.parse().map_err(|_| "bad vertex count")?;
                    current = "vertex";
                }
                ["element", "face", n] => {
                    nf = n.parse().map_err(|_| "bad face count")?;
                    current = "face";
                }
                ["element", ..] => current = "other",
                ["property", _, name] if current == "vertex" => vprops.push(name.to_string()),
                ["end_header"] => break,
                _ => {}
            }
        }
        let col = |n: &str| vprops.iter().position(|p| p == n);
        let (ix, iy, iz) = (
            col("x").ok_or("no x property")?,
            col("y").ok_or("no y property")?,
            col("z").ok_or("no z property")?,
        );
        let nrm = match (col("nx"), col("ny"), col("nz")) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        let mut vertices = Vec::with_capacity(nv);
        let mut normals = Vec::new();
        for _ in 0..nv {
            let line = lines.next().ok_or("truncated vertex list")?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
                .collect::<std::result::Result<_, _>>()?;
            if v.len() < vprops.len() {
                return Err(format!("short vertex line {line:?}"));
            }
            vertices.push(Vec3::new(v[ix], v[iy], v[iz]));
            if let Some([a, b, c]) = nrm {
                normals.push(Vec3::new(v[a], v[b], v[c]));
            }
        }
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let line = lines.next().ok_or("truncated face list")?;
            let v: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| format!("bad index {t:?}")))
                .collect::<std::result::Result<_, _>>()?;
            if v.first() != Some(&3) || v.len() != 4 {
                return Err(format!("only triangles are supported: {line:?}"));
            }
            if v[1..].iter().any(|&i| i as usize >= nv) {
                return Err(format!("index out of range: {line:?}"));
            }
            triangles.push([v[1], v[2], v[3]]);
        }
        Ok(Mesh {
            vertices,
            triangles,
            normals: nrm.map(|_| normals),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Mesh {
        Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
    }

    #[test]
    fn tetra_volume_and_closure() {
        let m = tetra();
        assert!(m.is_closed_manifold());
        assert!((m.signed_volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ply_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let mut m = tetra();
        m.compute_normals();
        m.write_ply(&p).unwrap();
        let back = Mesh::read_ply(&p).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ply_rejects_bad_indices() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n3 0 1 2\n";
        assert!(Mesh::parse_ply(text).is_err());
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let mut m = tetra();
        m.triangles.push([0, 0, 1]);
        m.vertices.push(Vec3::new(5.0, 5.0, 5.0));
        m.remove_degenerate();
        assert_eq!(m.triangles.len(), 4);
        assert_eq!(m.vertices.len(), 4);
    }

    #[test]
    fn similarity_round_trip() {
        use nalgebra::Rotation3;
        let s = Similarity {
            scale: 0.9,
            rotation: *Rotation3::from_euler_angles(0.1, 0.2, 0.3).matrix(),
            translation: Vec3::new(0.5, -0.2, 0.1),
        };
        let m = tetra();
        let back = m.transformed(&s).transformed(&s.inverse());
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
