/// `T_i = prod_{j < i} (1 - alpha_j)`, followed by the transmittance left
/// after the last sample.
pub fn transmittances(alphas: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(alphas.len() + 1);
    let mut acc = 1.0;
    for a in alphas {
        t.push(acc);
        acc *= 1.0 - a;
    }
    t.push(acc);
    t
}

/// `w_i = T_i alpha_i`.
pub fn weights(alphas: &[f64]) -> Vec<f64> {
    let t = transmittances(alphas);
    alphas.iter().zip(&t).map(|(a, t)| a * t).collect()
}

/// `sum_i T_i alpha_i value_i`.
pub fn composite<const K: usize>(values: &[[f64; K]], alphas: &[f64]) -> [f64; K] {
    assert_eq!(values.len(), alphas.len());
    let mut out = [0.0; K];
    let mut t = 1.0;
    for (v, a) in values.iter().zip(alphas) {
        let w = t * a;
        for k in 0..K {
            out[k] += w * v[k];
        }
        t *= 1.0 - a;
    }
    out
}

/// Gradient of `g . (composite(values, alphas) + T_end * tail)` with
/// respect to every alpha. Uses the suffix recursion
/// `R_i = alpha_i v_i + (1 - alpha_i) R_{i+1}`, `R_{N+1} = tail`, so that the
/// derivative is `T_i (v_i - R_{i+1}) . g`, well defined even at `alpha = 1`.
pub fn composite_alpha_grad<const K: usize>(
    values: &[[f64; K]],
    alphas: &[f64],
    tail: [f64; K],
    g: [f64; K],
    out: &mut [f64],
) {
    let n = alphas.len();
    let t = transmittances(alphas);
    let mut r = tail;
    for i in (0..n).rev() {
        let mut d = 0.0;
        for k in 0..K {
            d += g[k] * (values[i][k] - r[k]);
        }
        out[i] += t[i] * d;
        for k in 0..K {
            r[k] = alphas[i] * values[i][k] + (1.0 - alphas[i]) * r[k];
        }
    }
}
