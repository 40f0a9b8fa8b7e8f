use crate::error::{Error, Result};

/// Per-pixel `sum_j |sdf_j - comp_j|` between two normal maps.
pub fn normal_bias_map(sdf: &[[f64; 3]], comp: &[[f64; 3]]) -> Result<Vec<f64>> {
    if sdf.len() != comp.len() {
        return Err(Error::ShapeMismatch(format!(
            "normal maps have {} and {} pixels",
            sdf.len(),
            comp.len()
        )));
    }
    Ok(sdf
        .iter()
        .zip(comp)
        .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).abs()).sum())
        .collect())
}
