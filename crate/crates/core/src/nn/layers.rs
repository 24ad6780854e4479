//! Layer kernels on channel-last (batch, rows, cols, channels) buffers.
//! Each forward has a matching backward that returns gradients with respect
//! to its parameters and, when asked, its input.

use serde::{Deserialize, Serialize};

use super::Real;

/// Stride-1 convolution with "same" padding (`(kernel - 1) / 2` on each
/// side), weights laid out (kernel, kernel, in, out).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
}

impl ConvShape {
    fn pad(&self) -> isize {
        ((self.kernel - 1) / 2) as isize
    }

    fn patch(&self) -> usize {
        self.kernel * self.kernel * self.in_ch
    }

    pub fn input_len(&self) -> usize {
        self.batch * self.height * self.width * self.in_ch
    }

    pub fn output_len(&self) -> usize {
        self.batch * self.height * self.width * self.out_ch
    }

    pub fn weight_len(&self) -> usize {
        self.patch() * self.out_ch
    }
}

/// Patch matrix for one sample: (rows·cols) × (kernel·kernel·in).
fn im2col<T: Real>(sample: &[T], s: &ConvShape, cols: &mut [T]) {
    let (h, w, c, k, pad) = (s.height, s.width, s.in_ch, s.kernel, s.pad());
    let patch = s.patch();
    for y in 0..h {
        for x in 0..w {
            let row = &mut cols[(y * w + x) * patch..][..patch];
            for ky in 0..k {
                let sy = y as isize + ky as isize - pad;
                for kx in 0..k {
                    let sx = x as isize + kx as isize - pad;
                    let dst = &mut row[(ky * k + kx) * c..][..c];
                    if sy < 0 || sy >= h as isize || sx < 0 || sx >= w as isize {
                        dst.fill(T::zero());
                    } else {
                        let src = (sy as usize * w + sx as usize) * c;
                        dst.copy_from_slice(&sample[src..src + c]);
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], s: &ConvShape, sample_grad: &mut [T]) {
    let (h, w, c, k, pad) = (s.height, s.width, s.in_ch, s.kernel, s.pad());
    let patch = s.patch();
    for y in 0..h {
        for x in 0..w {
            let row = &cols[(y * w + x) * patch..][..patch];
            for ky in 0..k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = x as isize + kx as isize - pad;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let dst = (sy as usize * w + sx as usize) * c;
                    for (d, &v) in sample_grad[dst..dst + c].iter_mut().zip(&row[(ky * k + kx) * c..][..c]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<T: Real>(input: &[T], weights: &[T], bias: &[T], s: &ConvShape) -> Vec<T> {
    assert_eq!(input.len(), s.input_len());
    assert_eq!(weights.len(), s.weight_len());
    assert_eq!(bias.len(), s.out_ch);
    let pixels = s.height * s.width;
    let patch = s.patch();
    let mut out = vec![T::zero(); s.output_len()];
    let mut cols = vec![T::zero(); pixels * patch];
    for n in 0..s.batch {
        im2col(&input[n * pixels * s.in_ch..][..pixels * s.in_ch], s, &mut cols);
        let dst = &mut out[n * pixels * s.out_ch..][..pixels * s.out_ch];
        for px in dst.chunks_exact_mut(s.out_ch) {
            px.copy_from_slice(bias);
        }
        T::gemm(pixels, patch, s.out_ch, &cols, patch, 1, weights, s.out_ch, 1, T::one(), dst, s.out_ch, 1);
    }
    out
}

pub struct ConvGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Vec<T>>,
}

pub fn conv2d_backward<T: Real>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    s: &ConvShape,
    want_input_grad: bool,
) -> ConvGrads<T> {
    assert_eq!(grad_out.len(), s.output_len());
    let pixels = s.height * s.width;
    let patch = s.patch();
    let mut dw = vec![T::zero(); s.weight_len()];
    let mut db = vec![T::zero(); s.out_ch];
    let mut dx = want_input_grad.then(|| vec![T::zero(); s.input_len()]);
    let mut cols = vec![T::zero(); pixels * patch];
    let mut dcols = vec![T::zero(); if want_input_grad { pixels * patch } else { 0 }];
    for n in 0..s.batch {
        let go = &grad_out[n * pixels * s.out_ch..][..pixels * s.out_ch];
        for px in go.chunks_exact(s.out_ch) {
            for (d, &g) in db.iter_mut().zip(px) {
                *d += g;
            }
        }
        im2col(&input[n * pixels * s.in_ch..][..pixels * s.in_ch], s, &mut cols);
        // dW += colsᵀ · dOut
        T::gemm(patch, pixels, s.out_ch, &cols, 1, patch, go, s.out_ch, 1, T::one(), &mut dw, s.out_ch, 1);
        if let Some(dx) = dx.as_mut() {
            // dCols = dOut · Wᵀ
            T::gemm(pixels, s.out_ch, patch, go, s.out_ch, 1, weights, 1, s.out_ch, T::zero(), &mut dcols, patch, 1);
            col2im(&dcols, s, &mut dx[n * pixels * s.in_ch..][..pixels * s.in_ch]);
        }
    }
    ConvGrads {
        weights: dw,
        bias: db,
        input: dx,
    }
}

/// Overlapping max pooling with "same" output size `ceil(in / stride)`;
/// padding positions never win.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolShape {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub window: usize,
    pub stride: usize,
}

impl PoolShape {
    pub fn out_height(&self) -> usize {
        self.height.div_ceil(self.stride)
    }

    pub fn out_width(&self) -> usize {
        self.width.div_ceil(self.stride)
    }

    fn pad_before(size: usize, out: usize, window: usize, stride: usize) -> isize {
        let total = ((out - 1) * stride + window).saturating_sub(size);
        (total / 2) as isize
    }

    pub fn output_len(&self) -> usize {
        self.batch * self.out_height() * self.out_width() * self.channels
    }
}

/// Returns the pooled values and, per output, the flat input index of the
/// selected maximum (first one in scan order on ties).
pub fn maxpool_forward<T: Real>(input: &[T], s: &PoolShape) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (s.out_height(), s.out_width());
    let pt = PoolShape::pad_before(s.height, oh, s.window, s.stride);
    let pl = PoolShape::pad_before(s.width, ow, s.window, s.stride);
    let mut out = Vec::with_capacity(s.output_len());
    let mut idx = Vec::with_capacity(s.output_len());
    for n in 0..s.batch {
        let base = n * s.height * s.width * s.channels;
        for oy in 0..oh {
            for ox in 0..ow {
                for c in 0..s.channels {
                    let mut best = T::neg_infinity();
                    let mut best_i = usize::MAX;
                    for wy in 0..s.window {
                        let y = (oy * s.stride + wy) as isize - pt;
                        if y < 0 || y >= s.height as isize {
                            continue;
                        }
                        for wx in 0..s.window {
                            let x = (ox * s.stride + wx) as isize - pl;
                            if x < 0 || x >= s.width as isize {
                                continue;
                            }
                            let i = base + (y as usize * s.width + x as usize) * s.channels + c;
                            if best_i == usize::MAX || input[i] > best {
                                best = input[i];
                                best_i = i;
                            }
                        }
                    }
                    out.push(best);
                    idx.push(best_i as u32);
                }
            }
        }
    }
    (out, idx)
}

pub fn maxpool_backward<T: Real>(grad_out: &[T], argmax: &[u32], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in grad_out.iter().zip(argmax) {
        dx[i as usize] += g;
    }
    dx
}

/// Cross-channel local response normalization:
/// `out[c] = x[c] / (bias + alpha · Σ_{|c'-c| ≤ radius} x[c']²)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrnParams {
    pub radius: usize,
    pub bias: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LrnParams {
    fn default() -> Self {
        Self {
            radius: 4,
            bias: 1.0,
            alpha: 0.001 / 9.0,
            beta: 0.75,
        }
    }
}

/// Returns the normalized output and the per-element denominator base
/// `bias + alpha · Σ x²` that the backward pass reuses.
pub fn lrn_forward<T: Real>(x: &[T], channels: usize, p: &LrnParams) -> (Vec<T>, Vec<T>) {
    let (bias, alpha, beta) = (T::lit(p.bias), T::lit(p.alpha), T::lit(p.beta));
    let mut out = vec![T::zero(); x.len()];
    let mut scale = vec![T::zero(); x.len()];
    for ((px, o), s) in x
        .chunks_exact(channels)
        .zip(out.chunks_exact_mut(channels))
        .zip(scale.chunks_exact_mut(channels))
    {
        for c in 0..channels {
            let lo = c.saturating_sub(p.radius);
            let hi = (c + p.radius).min(channels - 1);
            let sq: T = px[lo..=hi].iter().map(|&v| v * v).sum();
            s[c] = bias + alpha * sq;
            o[c] = px[c] * s[c].powf(-beta);
        }
    }
    (out, scale)
}

pub fn lrn_backward<T: Real>(x: &[T], scale: &[T], grad_out: &[T], channels: usize, p: &LrnParams) -> Vec<T> {
    let (alpha, beta) = (T::lit(p.alpha), T::lit(p.beta));
    let two = T::lit(2.0);
    let mut dx = vec![T::zero(); x.len()];
    let mut t = vec![T::zero(); channels];
    for (((px, s), g), d) in x
        .chunks_exact(channels)
        .zip(scale.chunks_exact(channels))
        .zip(grad_out.chunks_exact(channels))
        .zip(dx.chunks_exact_mut(channels))
    {
        for c in 0..channels {
            t[c] = g[c] * px[c] * s[c].powf(-beta - T::one());
        }
        for i in 0..channels {
            let lo = i.saturating_sub(p.radius);
            let hi = (i + p.radius).min(channels - 1);
            let cross: T = t[lo..=hi].iter().copied().sum();
            d[i] = g[i] * s[i].powf(-beta) - two * alpha * beta * px[i] * cross;
        }
    }
    dx
}

pub fn relu_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries whose forward activation was clipped.
pub fn relu_backward_inplace<T: Real>(grad: &mut [T], activated: &[T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// `y = x · W + b` with `x` (n × inputs) and `W` (inputs × outputs).
pub fn dense_forward<T: Real>(x: &[T], w: &[T], b: &[T], n: usize, inputs: usize, outputs: usize) -> Vec<T> {
    assert_eq!(x.len(), n * inputs);
    assert_eq!(w.len(), inputs * outputs);
    let mut y = Vec::with_capacity(n * outputs);
    for _ in 0..n {
        y.extend_from_slice(b);
    }
    T::gemm(n, inputs, outputs, x, inputs, 1, w, outputs, 1, T::one(), &mut y, outputs, 1);
    y
}

pub struct DenseGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Vec<T>>,
}

pub fn dense_backward<T: Real>(
    x: &[T],
    w: &[T],
    grad_out: &[T],
    n: usize,
    inputs: usize,
    outputs: usize,
    want_input_grad: bool,
) -> DenseGrads<T> {
    let mut dw = vec![T::zero(); inputs * outputs];
    T::gemm(inputs, n, outputs, x, 1, inputs, grad_out, outputs, 1, T::zero(), &mut dw, outputs, 1);
    let mut db = vec![T::zero(); outputs];
    for row in grad_out.chunks_exact(outputs) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    let dx = want_input_grad.then(|| {
        let mut dx = vec![T::zero(); n * inputs];
        T::gemm(n, outputs, inputs, grad_out, outputs, 1, w, 1, outputs, T::zero(), &mut dx, inputs, 1);
        dx
    });
    DenseGrads {
        weights: dw,
        bias: db,
        input: dx,
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    out
}

/// Pulls a gradient with respect to softmax outputs back to the logits:
/// `dz_j = p_j (g_j - Σ_k p_k g_k)`.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(probs.len());
    for (p, g) in probs.chunks_exact(classes).zip(grad_probs.chunks_exact(classes)) {
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        out.extend(p.iter().zip(g).map(|(&pj, &gj)| pj * (gj - dot)));
    }
    out
}
