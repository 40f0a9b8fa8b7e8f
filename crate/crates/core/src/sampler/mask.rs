use super::canny::TextureIntensityMap;

/// Disk offsets `(dx, dy)` with `dx^2 + dy^2 <= radius^2`.
fn disk(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Grayscale dilation: each pixel takes the largest value within `radius`.
pub fn max_filter(map: &TextureIntensityMap, radius: usize) -> Vec<f64> {
    let (w, h) = (map.width as isize, map.height as isize);
    let offsets = disk(radius);
    let mut out = vec![0.0; map.data.len()];
    for y in 0..h {
        for x in 0..w {
            let v = map.data[(y * w + x) as usize];
            if v <= 0.0 {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    let o = &mut out[(ny * w + nx) as usize];
                    *o = f64::max(*o, v);
                }
            }
        }
    }
    out
}

/// Surviving pixels with intensity at least `threshold`, dilated by a disk
/// of `dilation` pixels.
pub fn informative_mask(map: &TextureIntensityMap, threshold: f64, dilation: usize) -> Vec<bool> {
    max_filter(map, dilation)
        .iter()
        .map(|v| *v > 0.0 && *v >= threshold)
        .collect()
}
