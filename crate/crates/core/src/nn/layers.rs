//! Conv and dense layers with explicit forward/backward passes.
//!
//! Convolution is stride-1, zero-padded to keep the spatial size, and runs
//! as im2col plus one matrix multiply; the backward pass mirrors it with
//! col2im. Activations batches are (n, h, w, c) in row-major `Array4`.

use ndarray::{Array1, Array2, Array4, Axis};
use rand::distributions::{Distribution, Uniform};
use rand_chacha::ChaCha8Rng;

/// Lay out every kernel-window of `x` as one row: output is
/// (n*h*w, kh*kw*c) for same-size stride-1 convolution with `pad` zeros.
pub(crate) fn im2col(x: &Array4<f64>, kh: usize, kw: usize, pad: usize) -> Array2<f64> {
    let (n, h, w, c) = x.dim();
    let mut cols = Array2::zeros((n * h * w, kh * kw * c));
    for bi in 0..n {
        for oi in 0..h {
            for oj in 0..w {
                let row = (bi * h + oi) * w + oj;
                let mut col = 0;
                for ki in 0..kh {
                    let si = oi + ki;
                    for kj in 0..kw {
                        let sj = oj + kj;
                        if si >= pad && si - pad < h && sj >= pad && sj - pad < w {
                            for cc in 0..c {
                                cols[[row, col + cc]] = x[[bi, si - pad, sj - pad, cc]];
                            }
                        }
                        col += c;
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter column gradients back onto the input.
pub(crate) fn col2im(
    dcols: &Array2<f64>,
    dims: (usize, usize, usize, usize),
    kh: usize,
    kw: usize,
    pad: usize,
) -> Array4<f64> {
    let (n, h, w, c) = dims;
    let mut dx = Array4::zeros((n, h, w, c));
    for bi in 0..n {
        for oi in 0..h {
            for oj in 0..w {
                let row = (bi * h + oi) * w + oj;
                let mut col = 0;
                for ki in 0..kh {
                    let si = oi + ki;
                    for kj in 0..kw {
                        let sj = oj + kj;
                        if si >= pad && si - pad < h && sj >= pad && sj - pad < w {
                            for cc in 0..c {
                                dx[[bi, si - pad, sj - pad, cc]] += dcols[[row, col + cc]];
                            }
                        }
                        col += c;
                    }
                }
            }
        }
    }
    dx
}

/// He-uniform sample: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
fn he_uniform(rng: &mut ChaCha8Rng, fan_in: usize, count: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Stride-1, zero-padded convolution; weights are (out_c, kh, kw, in_c).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv2d {
    pub weights: Array4<f64>,
    pub bias: Array1<f64>,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, kernel: usize, pad: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = kernel * kernel * in_c;
        let weights =
            Array4::from_shape_vec((out_c, kernel, kernel, in_c), he_uniform(rng, fan_in, out_c * fan_in))
                .expect("conv weight shape");
        Self { weights, bias: Array1::zeros(out_c), pad }
    }

    fn kernel_matrix(&self) -> Array2<f64> {
        let (out_c, kh, kw, in_c) = self.weights.dim();
        let flat = self.weights.as_slice().expect("standard layout").to_vec();
        Array2::from_shape_vec((out_c, kh * kw * in_c), flat)
            .expect("kernel reshape")
            .reversed_axes()
    }

    /// Returns the pre-activation output and the im2col workspace the
    /// backward pass reuses.
    pub fn forward(&self, x: &Array4<f64>) -> (Array4<f64>, Array2<f64>) {
        let (n, h, w, _) = x.dim();
        let (out_c, kh, kw, _) = self.weights.dim();
        let cols = im2col(x, kh, kw, self.pad);
        let mut out2 = cols.dot(&self.kernel_matrix());
        out2 += &self.bias;
        let out = out2.into_shape_with_order((n, h, w, out_c)).expect("conv output shape");
        (out, cols)
    }

    /// Gradients w.r.t. weights, bias, and input given the upstream
    /// pre-activation gradient.
    pub fn backward(
        &self,
        cols: &Array2<f64>,
        input_dims: (usize, usize, usize, usize),
        dout: &Array4<f64>,
    ) -> (Array4<f64>, Array1<f64>, Array4<f64>) {
        let (out_c, kh, kw, in_c) = self.weights.dim();
        let rows = dout.len() / out_c;
        let dout2 = Array2::from_shape_vec(
            (rows, out_c),
            dout.as_slice().expect("standard layout").to_vec(),
        )
        .expect("dout reshape");

        let dkernel = cols.t().dot(&dout2); // (kh*kw*in_c, out_c)
        let dweights_flat = dkernel.reversed_axes(); // (out_c, kh*kw*in_c)
        let dweights = Array4::from_shape_vec(
            (out_c, kh, kw, in_c),
            dweights_flat.iter().copied().collect(),
        )
        .expect("dweights shape");
        let dbias = dout2.sum_axis(Axis(0));
        let dcols = dout2.dot(&self.kernel_matrix().reversed_axes());
        let dx = col2im(&dcols, input_dims, kh, kw, self.pad);
        (dweights, dbias, dx)
    }
}

/// Fully connected layer; weights are (in, out).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let weights =
            Array2::from_shape_vec((inputs, outputs), he_uniform(rng, inputs, inputs * outputs))
                .expect("dense weight shape");
        Self { weights, bias: Array1::zeros(outputs) }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.dot(&self.weights);
        out += &self.bias;
        out
    }

    pub fn backward(
        &self,
        x: &Array2<f64>,
        dout: &Array2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        let dweights = x.t().dot(dout);
        let dbias = dout.sum_axis(Axis(0));
        let dx = dout.dot(&self.weights.t());
        (dweights, dbias, dx)
    }
}

pub(crate) fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zero the gradient wherever the pre-activation was non-positive.
pub(crate) fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Row-wise stable softmax.
pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
