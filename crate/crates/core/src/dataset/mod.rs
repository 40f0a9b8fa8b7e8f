//! Dataset ingestion: images, normal priors, poses and intrinsics.
//!
//! Two on-disk layouts are understood.
//!
//! The canonical layout (what `synth` writes):
//!
//! ```text
//! images/000.png        8-bit RGB
//! normals/000.nmap      prior normals, H x W x 3 float32
//! normals_gt/000.nmap   true normals (optional)
//! bias/000.nmap         applied rotations as axis-angle vectors (optional)
//! depth/000.nmap        ray distance, 0 = miss (optional)
//! poses.txt             one row-major 4x4 camera-to-world matrix per line
//! intrinsics.txt        fx fy cx cy w h
//! scene.json            scene description with `bounds` (optional)
//! bounds.txt            min_x min_y min_z max_x max_y max_z (if no scene.json)
//! ```
//!
//! The flat layout keeps everything per frame in one directory:
//! `000_rgb.png`, `000_normal.nmap` (or `000_normal.png`, 16-bit), `000_pose.txt`
//! (four lines of four numbers), plus `intrinsics.txt` and `bounds.txt`.
//!
//! Camera-frame priors use the camera convention of [`CameraPose`]
//! (`-z` forward, `+y` up) and are rotated into the world frame on load.

pub mod floatmap;
mod normalize;

pub use floatmap::FloatMap;
pub use normalize::{normalize_scene, Similarity};

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Aabb, AnalyticScene, CameraPose, Intrinsics, Vec3};

/// Frame convention of stored normal priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NormalFrame {
    World,
    Camera,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Canonical,
    Flat,
}

/// One training view in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: Vec<[f64; 3]>,
    /// World-frame unit prior normals; zero where no prior exists.
    pub prior: Vec<[f64; 3]>,
    pub prior_valid: Vec<bool>,
    pub pose: CameraPose,
}

/// Ground-truth assets emitted by the synthesizer, in original world units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtAssets {
    pub depth: Vec<Vec<f64>>,
    pub normals: Vec<Vec<[f64; 3]>>,
    pub bias: Vec<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub frames: Vec<Frame>,
    pub width: usize,
    pub height: usize,
    /// Original-world region of interest.
    pub bounds: Aabb,
    /// World -> normalized coordinates.
    pub transform: Similarity,
    pub gt: Option<GtAssets>,
    pub scene: Option<AnalyticScene>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Builds a dataset from in-memory views given in original world units.
    pub fn from_views(
        views: Vec<(Vec<[f64; 3]>, Vec<[f64; 3]>, CameraPose)>,
        bounds: Aabb,
        gt: Option<GtAssets>,
        scene: Option<AnalyticScene>,
    ) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Empty("dataset has no frames".into()))?;
        let (width, height) = (first.2.width, first.2.height);
        let poses: Vec<CameraPose> = views.iter().map(|v| v.2.clone()).collect();
        let transform = normalize_scene(&poses, &bounds)?;
        let mut frames = Vec::with_capacity(views.len());
        for (index, (image, prior, pose)) in views.into_iter().enumerate() {
            check_pose(index, &pose)?;
            if (pose.width, pose.height) != (width, height) {
                return Err(Error::ResolutionMismatch {
                    expected: (width, height),
                    found: (pose.width, pose.height),
                    what: format!("pose {index}"),
                });
            }
            let prior_valid = prior.iter().map(|n| n.iter().any(|c| *c != 0.0)).collect();
            frames.push(Frame {
                image,
                prior,
                prior_valid,
                pose: transform.apply_pose(&pose),
            });
        }
        Ok(Self {
            frames,
            width,
            height,
            bounds,
            transform,
            gt,
            scene,
        })
    }
}

fn check_pose(index: usize, pose: &CameraPose) -> Result<()> {
    let deviation = pose.orthonormality_error();
    if !(deviation <= 1e-3) {
        return Err(Error::NonOrthonormalPose { index, deviation });
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_numbers(text: &str, path: &Path) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::malformed(path, format!("not a number: {t:?}")))
        })
        .collect()
}

/// Parses `fx fy cx cy w h`.
pub fn read_intrinsics(path: &Path) -> Result<(Intrinsics, usize, usize)> {
    let v = parse_numbers(&read_text(path)?, path)?;
    if v.len() != 6 {
        return Err(Error::malformed(path, "expected fx fy cx cy w h"));
    }
    Ok((
        Intrinsics {
            fx: v[0],
            fy: v[1],
            cx: v[2],
            cy: v[3],
        },
        v[4] as usize,
        v[5] as usize,
    ))
}

pub fn write_intrinsics(path: &Path, k: &Intrinsics, w: usize, h: usize) -> Result<()> {
    let text = format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, w, h);
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn matrix_from_row_major(v: &[f64]) -> Matrix4<f64> {
    Matrix4::from_row_slice(v)
}

pub fn read_poses(path: &Path) -> Result<Vec<Matrix4<f64>>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v = parse_numbers(line, path)?;
        if v.len() != 16 {
            return Err(Error::malformed(path, "pose line must hold 16 numbers"));
        }
        out.push(matrix_from_row_major(&v));
    }
    Ok(out)
}

pub fn write_poses(path: &Path, poses: &[CameraPose]) -> Result<()> {
    let mut text = String::new();
    for p in poses {
        let m = p.to_matrix();
        let row: Vec<String> = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| format!("{:?}", m[(r, c)]))
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_bounds(dir: &Path) -> Result<(Aabb, Option<AnalyticScene>)> {
    let scene_path = dir.join("scene.json");
    if scene_path.exists() {
        let text = read_text(&scene_path)?;
        let scene: AnalyticScene = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(&scene_path, e.to_string()))?;
        return Ok((scene.bounds, Some(scene)));
    }
    let path = dir.join("bounds.txt");
    let v = parse_numbers(&read_text(&path)?, &path)?;
    if v.len() != 6 {
        return Err(Error::malformed(&path, "expected six numbers"));
    }
    Ok((Aabb::new([v[0], v[1], v[2]], [v[3], v[4], v[5]]), None))
}

pub fn read_png_rgb(path: &Path) -> Result<(usize, usize, Vec<[f64; 3]>)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    let px = img
        .pixels()
        .map(|p| p.0.map(|v| v as f64 / 255.0))
        .collect();
    Ok((w as usize, h as usize, px))
}

/// Bilinear resize of a 3-channel map to `(height, width)`, sampling at pixel
/// centers. Zero vectors mark holes and are excluded from the blend.
pub fn resize_vec3(
    src: &[[f64; 3]],
    src_h: usize,
    src_w: usize,
    height: usize,
    width: usize,
) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; height * width];
    let sy = src_h as f64 / height as f64;
    let sx = src_w as f64 / width as f64;
    for r in 0..height {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = (fy.floor() as usize).min(src_h.saturating_sub(2));
        let y1 = (y0 + 1).min(src_h - 1);
        let ty = fy - y0 as f64;
        for c in 0..width {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = (fx.floor() as usize).min(src_w.saturating_sub(2));
            let x1 = (x0 + 1).min(src_w - 1);
            let tx = fx - x0 as f64;
            let mut acc = [0.0; 3];
            let mut wsum = 0.0;
            for (yy, wy) in [(y0, 1.0 - ty), (y1, ty)] {
                for (xx, wx) in [(x0, 1.0 - tx), (x1, tx)] {
                    let v = src[yy * src_w + xx];
                    if v == [0.0; 3] {
                        continue;
                    }
                    let w = wy * wx;
                    for k in 0..3 {
                        acc[k] += w * v[k];
                    }
                    wsum += w;
                }
            }
            if wsum > 0.0 {
                out[r * width + c] = acc.map(|a| a / wsum);
            }
        }
    }
    out
}

/// Rotates camera-frame priors to world, resizes to image resolution and
/// re-normalizes.
fn ingest_prior(
    raw: &FloatMap,
    pose: &CameraPose,
    frame: NormalFrame,
    width: usize,
    height: usize,
) -> Result<Vec<[f64; 3]>> {
    if raw.channels != 3 {
        return Err(Error::ShapeMismatch(format!(
            "normal prior has {} channels",
            raw.channels
        )));
    }
    let mut v = raw.to_vec3();
    if frame == NormalFrame::Camera {
        for n in v.iter_mut() {
            if *n == [0.0; 3] {
                continue;
            }
            let w = pose.rotation * Vec3::from_column_slice(n);
            *n = [w.x, w.y, w.z];
        }
    }
    let resized = (raw.height, raw.width) != (height, width);
    if resized {
        v = resize_vec3(&v, raw.height, raw.width, height, width);
    }
    for n in v.iter_mut() {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len > 1e-9 {
            *n = n.map(|c| c / len);
        } else {
            *n = [0.0; 3];
        }
    }
    Ok(v)
}

fn frame_ids(dir: &Path, suffix: &str) -> Result<Vec<String>> {
    if !dir.exists() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.strip_suffix(suffix).map(|s| s.to_string())
        })
        .collect();
    ids.sort();
    Ok(ids)
}

fn read_optional_vec3(path: &Path) -> Result<Option<Vec<[f64; 3]>>> {
    if path.exists() {
        Ok(Some(FloatMap::read(path)?.to_vec3()))
    } else {
        Ok(None)
    }
}

/// Loads a dataset directory into normalized coordinates.
pub fn load_dataset(path: &Path, frame: NormalFrame, layout: Layout) -> Result<Dataset> {
    let (intrinsics, width, height) = read_intrinsics(&path.join("intrinsics.txt"))?;
    let (bounds, scene) = read_bounds(path)?;
    let mut views = Vec::new();
    let mut gt = GtAssets::default();
    let mut have_gt = true;
    match layout {
        Layout::Canonical => {
            let ids = frame_ids(&path.join("images"), ".png")?;
            let matrices = read_poses(&path.join("poses.txt"))?;
            if matrices.len() != ids.len() {
                return Err(Error::malformed(
                    path.join("poses.txt"),
                    format!("{} poses for {} images", matrices.len(), ids.len()),
                ));
            }
            for (index, (id, m)) in ids.iter().zip(&matrices).enumerate() {
                let pose = CameraPose::from_matrix(m, intrinsics, width, height);
                check_pose(index, &pose)?;
                let img_path = path.join("images").join(format!("{id}.png"));
                let (w, h, image) = read_png_rgb(&img_path)?;
                if (w, h) != (width, height) {
                    return Err(Error::ResolutionMismatch {
                        expected: (width, height),
                        found: (w, h),
                        what: img_path.display().to_string(),
                    });
                }
                let raw = FloatMap::read(&path.join("normals").join(format!("{id}.nmap")))?;
                let prior = ingest_prior(&raw, &pose, frame, width, height)?;
                let depth_path = path.join("depth").join(format!("{id}.nmap"));
                let gt_n = read_optional_vec3(&path.join("normals_gt").join(format!("{id}.nmap")))?;
                let gt_b = read_optional_vec3(&path.join("bias").join(format!("{id}.nmap")))?;
                match (depth_path.exists(), gt_n, gt_b) {
                    (true, Some(n), Some(b)) if have_gt => {
                        gt.depth.push(FloatMap::read(&depth_path)?.to_scalar());
                        gt.normals.push(n);
                        gt.bias.push(b);
                    }
                    _ => have_gt = false,
                }
                views.push((image, prior, pose));
            }
        }
        Layout::Flat => {
            let ids = frame_ids(path, "_rgb.png")?;
            have_gt = false;
            for (index, id) in ids.iter().enumerate() {
                let pose_path = path.join(format!("{id}_pose.txt"));
                let v = parse_numbers(&read_text(&pose_path)?, &pose_path)?;
                if v.len() != 16 {
                    return Err(Error::malformed(&pose_path, "pose file must hold 16 numbers"));
                }
                let pose = CameraPose::from_matrix(&matrix_from_row_major(&v), intrinsics, width, height);
                check_pose(index, &pose)?;
                let img_path = path.join(format!("{id}_rgb.png"));
                let (w, h, image) = read_png_rgb(&img_path)?;
                if (w, h) != (width, height) {
                    return Err(Error::ResolutionMismatch {
                        expected: (width, height),
                        found: (w, h),
                        what: img_path.display().to_string(),
                    });
                }
                let nmap = path.join(format!("{id}_normal.nmap"));
                let raw = if nmap.exists() {
                    FloatMap::read(&nmap)?
                } else {
                    floatmap::read_png16_normals(&path.join(format!("{id}_normal.png")))?
                };
                let prior = ingest_prior(&raw, &pose, frame, width, height)?;
                views.push((image, prior, pose));
            }
        }
    }
    let gt = (have_gt && !gt.depth.is_empty()).then_some(gt);
    Dataset::from_views(views, bounds, gt, scene)
}

/// Paths a canonical dataset directory is expected to contain.
pub fn canonical_paths(dir: &Path, id: &str) -> [PathBuf; 5] {
    [
        dir.join("images").join(format!("{id}.png")),
        dir.join("normals").join(format!("{id}.nmap")),
        dir.join("normals_gt").join(format!("{id}.nmap")),
        dir.join("bias").join(format!("{id}.nmap")),
        dir.join("depth").join(format!("{id}.nmap")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_identity_and_constant() {
        let src = vec![[0.0, 0.0, 1.0]; 12];
        let out = resize_vec3(&src, 3, 4, 6, 8);
        assert!(out.iter().all(|v| *v == [0.0, 0.0, 1.0]));
        let same = resize_vec3(&src, 3, 4, 3, 4);
        assert_eq!(same, src);
    }

    #[test]
    fn camera_prior_with_identity_pose() {
        let pose = CameraPose {
            rotation: nalgebra::Matrix3::identity(),
            center: Vec3::zeros(),
            intrinsics: Intrinsics {
                fx: 1.0,
                fy: 1.0,
                cx: 0.5,
                cy: 0.5,
            },
            width: 1,
            height: 1,
        };
        let raw = FloatMap::new(1, 1, 3, vec![0.0, 0.0, 1.0]);
        let out = ingest_prior(&raw, &pose, NormalFrame::Camera, 1, 1).unwrap();
        assert_eq!(out, vec![[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn camera_prior_rotated_to_world() {
        let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), 0.5);
        let pose = CameraPose {
            rotation: *rot.matrix(),
            center: Vec3::zeros(),
            intrinsics: Intrinsics {
                fx: 1.0,
                fy: 1.0,
                cx: 0.5,
                cy: 0.5,
            },
            width: 1,
            height: 1,
        };
        let raw = FloatMap::new(1, 1, 3, vec![0.0, 0.0, 1.0]);
        let out = ingest_prior(&raw, &pose, NormalFrame::Camera, 1, 1).unwrap();
        let expect = rot * Vec3::new(0.0, 0.0, 1.0);
        assert!((Vec3::from_column_slice(&out[0]) - expect).norm() < 1e-7);
    }
}
