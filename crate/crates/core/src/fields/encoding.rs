use std::f64::consts::PI;

/// Length of the frequency encoding of a `d`-vector.
pub fn encoded_dim(d: usize, n_freq: usize) -> usize {
    d * (2 * n_freq) + d
}

/// `x` followed by `sin(2^k pi x)` and `cos(2^k pi x)` for `k = 0..n_freq`.
/// Each frequency contributes the `d` sines then the `d` cosines.
pub fn positional_encoding(x: &[f64], n_freq: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoded_dim(x.len(), n_freq));
    encode_into(x, n_freq, &mut out);
    out
}

pub(crate) fn encode_into(x: &[f64], n_freq: usize, out: &mut Vec<f64>) {
    out.extend_from_slice(x);
    for k in 0..n_freq {
        let f = (1u64 << k) as f64 * PI;
        out.extend(x.iter().map(|v| (f * v).sin()));
        out.extend(x.iter().map(|v| (f * v).cos()));
    }
}

/// Derivative of the encoding of a 3-vector along axis `axis`.
pub(crate) fn encode_tangent_into(x: &[f64; 3], n_freq: usize, axis: usize, out: &mut Vec<f64>) {
    for d in 0..3 {
        out.push(if d == axis { 1.0 } else { 0.0 });
    }
    for k in 0..n_freq {
        let f = (1u64 << k) as f64 * PI;
        for (d, v) in x.iter().enumerate() {
            out.push(if d == axis { f * (f * v).cos() } else { 0.0 });
        }
        for (d, v) in x.iter().enumerate() {
            out.push(if d == axis { -f * (f * v).sin() } else { 0.0 });
        }
    }
}
