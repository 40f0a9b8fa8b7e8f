//! Photometric, normal and Eikonal losses with their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub normal: f64,
    pub eikonal: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            normal: 0.1,
            eikonal: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub color: f64,
    pub normal: f64,
    pub eikonal: f64,
}

impl std::ops::AddAssign for LossParts {
    fn add_assign(&mut self, o: Self) {
        self.color += o.color;
        self.normal += o.normal;
        self.eikonal += o.eikonal;
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sum_r |C_hat - C|_1`.
pub fn color_loss(pred: &[[f64; 3]], target: &[[f64; 3]]) -> f64 {
    assert_eq!(pred.len(), target.len());
    pred.iter()
        .zip(target)
        .map(|(p, t)| (0..3).map(|k| (p[k] - t[k]).abs()).sum::<f64>())
        .sum()
}

pub fn color_loss_grad(pred: &[f64; 3], target: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|k| sign(pred[k] - target[k]))
}

/// `sum_r |N_comp - N|_1 + |1 - N_comp . N|`.
pub fn normal_loss(pred: &[[f64; 3]], prior: &[[f64; 3]]) -> f64 {
    assert_eq!(pred.len(), prior.len());
    pred.iter().zip(prior).map(|(p, n)| normal_term(p, n)).sum()
}

fn normal_term(p: &[f64; 3], n: &[f64; 3]) -> f64 {
    let l1: f64 = (0..3).map(|k| (p[k] - n[k]).abs()).sum();
    let dot: f64 = (0..3).map(|k| p[k] * n[k]).sum();
    l1 + (1.0 - dot).abs()
}

pub fn normal_loss_grad(p: &[f64; 3], n: &[f64; 3]) -> [f64; 3] {
    let dot: f64 = (0..3).map(|k| p[k] * n[k]).sum();
    let s = sign(1.0 - dot);
    [0, 1, 2].map(|k| sign(p[k] - n[k]) - s * n[k])
}

/// `sum_r mean_i (|grad s_i| - 1)^2` given gradient norms per ray.
pub fn eikonal_loss(norms: &[Vec<f64>]) -> f64 {
    norms
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| r.iter().map(|g| (g - 1.0).powi(2)).sum::<f64>() / r.len() as f64)
        .sum()
}

/// Derivative of the Eikonal loss with respect to each norm.
pub fn eikonal_loss_grad(norms: &[f64]) -> Vec<f64> {
    let n = norms.len().max(1) as f64;
    norms.iter().map(|g| 2.0 * (g - 1.0) / n).collect()
}

/// `L_c + lambda_n L_n + lambda_e L_e`; non-finite parts are an error.
pub fn total_loss(parts: &LossParts, w: &LossWeights, iteration: u64) -> Result<f64> {
    for (name, v) in [("color", parts.color), ("normal", parts.normal), ("eikonal", parts.eikonal)] {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: format!("{name} loss is {v}"),
            });
        }
    }
    Ok(parts.color + w.normal * parts.normal + w.eikonal * parts.eikonal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_examples() {
        assert_eq!(color_loss(&[[0.2, 0.4, 0.6]], &[[0.2, 0.4, 0.6]]), 0.0);
        assert_eq!(color_loss(&[[1.0; 3]], &[[0.0; 3]]), 3.0);
        let a = [[0.1, 0.5, 0.9], [0.3, 0.3, 0.3]];
        let b = [[0.0, 0.0, 1.0], [1.0, 0.2, 0.0]];
        let whole = color_loss(&a, &b);
        let parts = color_loss(&a[..1], &b[..1]) + color_loss(&a[1..], &b[1..]);
        assert!((whole - parts).abs() < 1e-15);
    }

    #[test]
    fn normal_examples() {
        let n = [0.0, 0.6, 0.8];
        assert!(normal_loss(&[n], &[n]).abs() < 1e-15);
        assert_eq!(normal_loss(&[[0.0, 0.0, 1.0]], &[[0.0, 0.0, -1.0]]), 4.0);
        assert_eq!(normal_loss(&[[1.0, 0.0, 0.0]], &[[0.0, 1.0, 0.0]]), 3.0);
    }

    #[test]
    fn eikonal_examples() {
        assert_eq!(eikonal_loss(&[vec![1.0; 5]]), 0.0);
        assert_eq!(eikonal_loss(&[vec![2.0]]), 1.0);
        assert_eq!(eikonal_loss(&[vec![0.0, 2.0]]), 1.0);
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        let p = LossParts {
            color: 1.0,
            normal: 1.0,
            eikonal: 1.0,
        };
        assert!((total_loss(&p, &w, 0).unwrap() - 1.2).abs() < 1e-15);
        let zero = LossWeights {
            normal: 0.0,
            eikonal: 0.0,
        };
        assert_eq!(total_loss(&p, &zero, 0).unwrap(), 1.0);
        assert_eq!(total_loss(&LossParts::default(), &w, 0).unwrap(), 0.0);
        let bad = LossParts {
            normal: f64::NAN,
            ..p
        };
        assert!(matches!(total_loss(&bad, &w, 3), Err(Error::NonFinite { iteration: 3, .. })));
    }
}
