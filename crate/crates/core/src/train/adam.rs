use crate::fields::ParamBlock;

/// Adam with one step counter per parameter block, so blocks that start
/// training late get proper bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<ParamBlock>,
    pub v: Vec<ParamBlock>,
    pub steps: Vec<u64>,
}

impl Adam {
    pub fn new(params: &[&ParamBlock]) -> Self {
        let zeros = |prefix: &str| {
            params
                .iter()
                .map(|p| ParamBlock::zeros(format!("{prefix}.{}", p.name), p.shape.clone()))
                .collect()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros("adam.m"),
            v: zeros("adam.v"),
            steps: vec![0; params.len()],
        }
    }

    /// Updates every block whose learning rate is `Some`.
    pub fn step(&mut self, params: Vec<&mut ParamBlock>, grads: Vec<&ParamBlock>, lrs: &[Option<f64>]) {
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let Some(lr) = lrs[i] else { continue };
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            let step = lr / c1;
            let (m, v) = (&mut self.m[i].data, &mut self.v[i].data);
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m[j] = b1 * m[j] + (1.0 - b1) * gj;
                v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                p.data[j] -= step * m[j] / ((v[j] / c2).sqrt() + eps);
            }
        }
    }
}

/// Cosine decay from `lr` at iteration 0 to `lr * final_fraction` at `total`.
pub fn cosine_lr(lr: f64, final_fraction: f64, iter: usize, total: usize) -> f64 {
    let p = if total == 0 {
        1.0
    } else {
        (iter as f64 / total as f64).min(1.0)
    };
    lr * (final_fraction + (1.0 - final_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = ParamBlock::new("p", vec![2], vec![1.0, -1.0]);
        let g = ParamBlock::new("g", vec![2], vec![3.0, -0.01]);
        let mut adam = Adam::new(&[&p]);
        adam.step(vec![&mut p], vec![&g], &[Some(0.1)]);
        assert!((p.data[0] - 0.9).abs() < 1e-6);
        assert!((p.data[1] + 0.9).abs() < 1e-5);
    }

    #[test]
    fn frozen_blocks_untouched() {
        let mut p = ParamBlock::new("p", vec![1], vec![1.0]);
        let g = ParamBlock::new("g", vec![1], vec![3.0]);
        let mut adam = Adam::new(&[&p]);
        adam.step(vec![&mut p], vec![&g], &[None]);
        assert_eq!(p.data[0], 1.0);
        assert_eq!(adam.steps[0], 0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = ParamBlock::new("p", vec![1], vec![5.0]);
        let mut adam = Adam::new(&[&p]);
        for _ in 0..2000 {
            let g = ParamBlock::new("g", vec![1], vec![2.0 * (p.data[0] - 2.0)]);
            adam.step(vec![&mut p], vec![&g], &[Some(0.05)]);
        }
        assert!((p.data[0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(1e-3, 0.05, 0, 100), 1e-3);
        assert!((cosine_lr(1e-3, 0.05, 100, 100) - 5e-5).abs() < 1e-18);
        assert!((cosine_lr(1e-3, 0.05, 50, 100) - 0.525e-3).abs() < 1e-15);
    }
}
