//! Dense networks evaluated on batches with optional spatial tangent streams.
//!
//! A batch of `P` points is laid out row-major with `S` streams stacked
//! vertically: rows `0..P` hold values and rows `s*P..(s+1)*P` hold the
//! derivative of those values along the `s`-th input direction. Linear layers
//! act on every stream with one matrix product; biases only touch the value
//! stream; activations scale tangent rows by the derivative at the value row.
//! Backpropagating through all streams yields exact parameter gradients of
//! losses that depend on spatial derivatives of the network output.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::param::{ParamBlock, Parameterized};

/// `C = beta * C + A * B` with explicit strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= (m.max(1) - 1) * rsa + (k.max(1) - 1) * csa + usize::from(k > 0));
    debug_assert!(c.len() >= (m - 1) * rsc + (n - 1) * csc + 1);
    // SAFETY: bounds are checked above (in debug builds) and by construction of
    // the callers, which always pass dense row-major buffers of matching size.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Softplus { beta: f64 },
    Relu,
}

impl Activation {
    #[inline]
    fn value(&self, y: f64) -> f64 {
        match *self {
            Activation::Softplus { beta } => {
                let z = beta * y;
                (z.max(0.0) + (-z.abs()).exp().ln_1p()) / beta
            }
            Activation::Relu => y.max(0.0),
        }
    }

    /// Value with first and second derivative, sharing one exponential.
    #[inline]
    fn full(&self, y: f64) -> (f64, f64, f64) {
        match *self {
            Activation::Softplus { beta } => {
                let z = beta * y;
                let e = (-z.abs()).exp();
                let v = (z.max(0.0) + e.ln_1p()) / beta;
                let s = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                (v, s, beta * s * (1.0 - s))
            }
            Activation::Relu => {
                if y > 0.0 {
                    (y, 1.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer; `weight` is `out x in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: ParamBlock,
    pub bias: ParamBlock,
}

impl Dense {
    pub fn zeros(name: &str, input: usize, output: usize) -> Self {
        Self {
            weight: ParamBlock::zeros(format!("{name}.weight"), vec![output, input]),
            bias: ParamBlock::zeros(format!("{name}.bias"), vec![output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    /// Fills weights from `N(mean, std)` and zeroes the bias.
    pub fn init_normal<R: Rng>(&mut self, rng: &mut R, mean: f64, std: f64) {
        let dist = Normal::new(mean, std.max(0.0)).expect("finite std");
        for w in self.weight.data.iter_mut() {
            *w = dist.sample(rng);
        }
        self.bias.fill(0.0);
    }

    pub fn weight_at(&self, row: usize, col: usize) -> f64 {
        self.weight.data[row * self.input_dim() + col]
    }

    pub fn weight_at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        let i = self.input_dim();
        &mut self.weight.data[row * i + col]
    }
}

/// Multi-layer perceptron. Hidden layers use `activation`; the last layer is
/// linear unless `activate_last` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub activate_last: bool,
}

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    points: usize,
    streams: usize,
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    /// First and second activation derivatives at the value rows.
    derivs: Vec<Vec<(f64, f64)>>,
}

impl Mlp {
    /// Layer sizes `dims[0] -> dims[1] -> ... -> dims[n]`, zero-initialized.
    pub fn zeros(name: &str, dims: &[usize], activation: Activation, activate_last: bool) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::zeros(&format!("{name}.{i}"), w[0], w[1]))
            .collect();
        Self {
            layers,
            activation,
            activate_last,
        }
    }

    /// He-style initialization of every layer.
    pub fn init_default<R: Rng>(&mut self, rng: &mut R) {
        for l in self.layers.iter_mut() {
            let std = (2.0 / l.input_dim() as f64).sqrt();
            l.init_normal(rng, 0.0, std);
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    fn is_activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.activate_last
    }

    /// Value-only evaluation without a tape.
    pub fn eval(&self, input: &[f64], points: usize) -> Vec<f64> {
        let mut h = input.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut y = linear(layer, &h, points, 1);
            if self.is_activated(li) {
                for v in y.iter_mut() {
                    *v = self.activation.value(*v);
                }
            }
            h = y;
        }
        h
    }

    /// Forward pass over `points * streams` rows, keeping a tape.
    pub fn forward(&self, input: Vec<f64>, points: usize, streams: usize) -> (Vec<f64>, MlpTape) {
        let rows = points * streams;
        assert_eq!(input.len(), rows * self.input_dim());
        let mut tape = MlpTape {
            points,
            streams,
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            derivs: Vec::with_capacity(self.layers.len()),
        };
        let mut h = input;
        for (li, layer) in self.layers.iter().enumerate() {
            let y = linear(layer, &h, points, streams);
            tape.inputs.push(h);
            if self.is_activated(li) {
                let out = layer.output_dim();
                let mut a = vec![0.0; y.len()];
                let mut dv = Vec::with_capacity(points * out);
                for p in 0..points {
                    for j in 0..out {
                        let (v, d1, d2) = self.activation.full(y[p * out + j]);
                        a[p * out + j] = v;
                        dv.push((d1, d2));
                        for s in 1..streams {
                            let r = (s * points + p) * out + j;
                            a[r] = d1 * y[r];
                        }
                    }
                }
                tape.pre.push(y);
                tape.derivs.push(dv);
                h = a;
            } else {
                tape.pre.push(Vec::new());
                tape.derivs.push(Vec::new());
                h = y;
            }
        }
        (h, tape)
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input rows.
    pub fn backward(&self, tape: &MlpTape, grad_out: Vec<f64>, grad: &mut Mlp) -> Vec<f64> {
        let (points, streams) = (tape.points, tape.streams);
        let rows = points * streams;
        let mut g = grad_out;
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let (inp, out) = (layer.input_dim(), layer.output_dim());
            if self.is_activated(li) {
                let y = &tape.pre[li];
                let dv = &tape.derivs[li];
                let mut gy = vec![0.0; rows * out];
                for p in 0..points {
                    for j in 0..out {
                        let (d1, d2) = dv[p * out + j];
                        let mut acc = d1 * g[p * out + j];
                        for s in 1..streams {
                            let r = (s * points + p) * out + j;
                            acc += d2 * y[r] * g[r];
                            gy[r] = d1 * g[r];
                        }
                        gy[p * out + j] = acc;
                    }
                }
                g = gy;
            }
            let x = &tape.inputs[li];
            let gl = &mut grad.layers[li];
            // dW += G^T X
            gemm(out, rows, inp, &g, 1, out, x, inp, 1, 1.0, &mut gl.weight.data, inp, 1);
            for p in 0..points {
                for j in 0..out {
                    gl.bias.data[j] += g[p * out + j];
                }
            }
            // dX = G W
            let mut gx = vec![0.0; rows * inp];
            gemm(rows, out, inp, &g, out, 1, &layer.weight.data, inp, 1, 0.0, &mut gx, inp, 1);
            g = gx;
        }
        g
    }
}

/// `Y = X W^T` on every stream, plus bias on the value stream.
fn linear(layer: &Dense, x: &[f64], points: usize, streams: usize) -> Vec<f64> {
    let (inp, out) = (layer.input_dim(), layer.output_dim());
    let rows = points * streams;
    let mut y = vec![0.0; rows * out];
    gemm(rows, inp, out, x, inp, 1, &layer.weight.data, 1, inp, 0.0, &mut y, out, 1);
    for p in 0..points {
        for (j, b) in layer.bias.data.iter().enumerate() {
            y[p * out + j] += b;
        }
    }
    y
}

impl Parameterized for Mlp {
    fn blocks(&self) -> Vec<&ParamBlock> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
