/// `log(1 / (1 + exp(-z)))`, stable for large `|z|`.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    crate::fields::mlp::sigmoid(z)
}

/// Opacity of the interval between consecutive samples:
/// `max((Phi(s_i) - Phi(s_next)) / Phi(s_i), 0)` with `Phi(x) = 1 / (1 + exp(-tau x))`.
pub fn alpha_from_sdf(s_i: f64, s_next: f64, tau: f64) -> f64 {
    if !(s_i > s_next) {
        return 0.0;
    }
    let ratio = (log_sigmoid(tau * s_next) - log_sigmoid(tau * s_i)).exp();
    (1.0 - ratio).clamp(0.0, 1.0)
}

/// Opacity and its partial derivatives with respect to `s_i`, `s_next` and
/// `tau`. All derivatives are zero where the clamp is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrad {
    pub alpha: f64,
    pub d_s: f64,
    pub d_next: f64,
    pub d_tau: f64,
}

pub fn alpha_with_grad(s_i: f64, s_next: f64, tau: f64) -> AlphaGrad {
    if !(s_i > s_next) {
        return AlphaGrad {
            alpha: 0.0,
            d_s: 0.0,
            d_next: 0.0,
            d_tau: 0.0,
        };
    }
    let ratio = (log_sigmoid(tau * s_next) - log_sigmoid(tau * s_i)).exp();
    let p = sigmoid(tau * s_i);
    let q = sigmoid(tau * s_next);
    // ratio = q / p
    AlphaGrad {
        alpha: (1.0 - ratio).clamp(0.0, 1.0),
        d_s: ratio * tau * (1.0 - p),
        d_next: -ratio * tau * (1.0 - q),
        d_tau: -ratio * (s_next * (1.0 - q) - s_i * (1.0 - p)),
    }
}
