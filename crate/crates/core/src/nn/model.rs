use super::arch::{POOL_STRIDE, POOL_WINDOW};
use super::layers::{self, ConvShape, PoolShape};
use super::loss::weight_decay_penalty;
use super::{LossKind, ModelParams, ProbDistribution, Real, Tensor};
use crate::{Error, Result};

/// Everything backward needs from a forward call.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    version: u64,
    arch_hash: String,
    batch: usize,
    input: Vec<T>,
    conv1: Vec<T>,
    pool1_idx: Vec<u32>,
    pool1: Vec<T>,
    lrn1_scale: Vec<T>,
    lrn1: Vec<T>,
    conv2: Vec<T>,
    lrn2_scale: Vec<T>,
    pool2_idx: Vec<u32>,
    flat: Vec<T>,
    fc1: Vec<T>,
    fc2: Vec<T>,
    probs: Vec<f64>,
    shapes: Vec<(&'static str, Vec<usize>)>,
}

impl<T> ForwardCache<T> {
    /// Output shape of every layer, batch axis first.
    pub fn shapes(&self) -> &[(&'static str, Vec<usize>)] {
        &self.shapes
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

pub struct ForwardPass<T> {
    pub logits: Tensor<T>,
    pub cache: ForwardCache<T>,
    classes: usize,
}

impl<T: Real> ForwardPass<T> {
    /// Softmax outputs, (batch × classes), computed in 64-bit.
    pub fn probs(&self) -> &[f64] {
        &self.cache.probs
    }

    pub fn distribution(&self, i: usize) -> ProbDistribution {
        ProbDistribution::new(self.cache.probs[i * self.classes..(i + 1) * self.classes].to_vec())
            .expect("softmax output is a distribution")
    }

    /// Top-1 class per sample.
    pub fn predictions(&self) -> Vec<usize> {
        (0..self.cache.batch).map(|i| self.distribution(i).argmax()).collect()
    }
}

fn check_param_shapes<T: Real>(params: &ModelParams<T>) -> Result<()> {
    for ((name, t), want) in params.tensors().into_iter().zip(super::params::shapes(params.arch())) {
        if t.shape() != want.as_slice() {
            return Err(Error::structure(
                name,
                format!("parameter shape {:?}, expected {want:?}", t.shape()),
            ));
        }
    }
    Ok(())
}

/// Runs the network on a (batch, rows, cols, channels) input.
pub fn forward<T: Real>(params: &ModelParams<T>, batch: &Tensor<T>) -> Result<ForwardPass<T>> {
    let a = params.arch();
    check_param_shapes(params)?;
    let want = [a.input_side, a.input_side, a.input_channels];
    if batch.shape().len() != 4 || batch.shape()[1..] != want {
        return Err(Error::structure(
            "input",
            format!("shape {:?}, expected (N, {}, {}, {})", batch.shape(), want[0], want[1], want[2]),
        ));
    }
    let n = batch.shape()[0];
    if n == 0 {
        return Err(Error::structure("input", "empty batch"));
    }
    let (s0, s1, s2, c) = (a.input_side, a.pool1_side(), a.pool2_side(), a.conv_channels);
    let mut shapes = Vec::with_capacity(10);

    let conv1_shape = ConvShape { batch: n, height: s0, width: s0, in_ch: a.input_channels, out_ch: c, kernel: a.kernel };
    let mut conv1 = layers::conv2d_forward(batch.data(), params.conv1_w.data(), params.conv1_b.data(), &conv1_shape);
    layers::relu_inplace(&mut conv1);
    shapes.push(("conv1", vec![n, s0, s0, c]));

    let pool1_shape = PoolShape { batch: n, height: s0, width: s0, channels: c, window: POOL_WINDOW, stride: POOL_STRIDE };
    let (pool1, pool1_idx) = layers::maxpool_forward(&conv1, &pool1_shape);
    shapes.push(("pool1", vec![n, pool1_shape.out_height(), pool1_shape.out_width(), c]));

    let (lrn1, lrn1_scale) = layers::lrn_forward(&pool1, c, &a.lrn);
    shapes.push(("lrn1", vec![n, s1, s1, c]));

    let conv2_shape = ConvShape { batch: n, height: s1, width: s1, in_ch: c, out_ch: c, kernel: a.kernel };
    let mut conv2 = layers::conv2d_forward(&lrn1, params.conv2_w.data(), params.conv2_b.data(), &conv2_shape);
    layers::relu_inplace(&mut conv2);
    shapes.push(("conv2", vec![n, s1, s1, c]));

    let (lrn2, lrn2_scale) = layers::lrn_forward(&conv2, c, &a.lrn);
    shapes.push(("lrn2", vec![n, s1, s1, c]));

    let pool2_shape = PoolShape { batch: n, height: s1, width: s1, channels: c, window: POOL_WINDOW, stride: POOL_STRIDE };
    let (flat, pool2_idx) = layers::maxpool_forward(&lrn2, &pool2_shape);
    shapes.push(("pool2", vec![n, pool2_shape.out_height(), pool2_shape.out_width(), c]));
    if flat.len() != n * a.flat_len() || pool2_shape.out_height() != s2 {
        return Err(Error::structure("flatten", format!("{} values for batch {n}", flat.len())));
    }
    shapes.push(("flatten", vec![n, a.flat_len()]));

    let mut fc1 = layers::dense_forward(&flat, params.fc1_w.data(), params.fc1_b.data(), n, a.flat_len(), a.fc1);
    layers::relu_inplace(&mut fc1);
    shapes.push(("fc1", vec![n, a.fc1]));

    let mut fc2 = layers::dense_forward(&fc1, params.fc2_w.data(), params.fc2_b.data(), n, a.fc1, a.fc2);
    layers::relu_inplace(&mut fc2);
    shapes.push(("fc2", vec![n, a.fc2]));

    let logits = layers::dense_forward(&fc2, params.out_w.data(), params.out_b.data(), n, a.fc2, a.classes);
    let logits64: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
    if logits64.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let probs = layers::softmax_rows(&logits64, a.classes);
    shapes.push(("softmax", vec![n, a.classes]));

    Ok(ForwardPass {
        logits: Tensor::new(&[n, a.classes], logits)?,
        cache: ForwardCache {
            version: params.version(),
            arch_hash: a.hash(),
            batch: n,
            input: batch.data().to_vec(),
            conv1,
            pool1_idx,
            pool1,
            lrn1_scale,
            lrn1,
            conv2,
            lrn2_scale,
            pool2_idx,
            flat,
            fc1,
            fc2,
            probs,
            shapes,
        },
        classes: a.classes,
    })
}

/// Gradients of `mean_n loss(p_n, q_n) + (λ/2)(‖W_fc1‖² + ‖W_fc2‖²)` with
/// respect to every parameter. Returns the gradients and the objective.
pub fn backward<T: Real>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    targets: &[ProbDistribution],
    kind: LossKind,
    weight_decay: f64,
) -> Result<(ModelParams<T>, f64)> {
    let a = params.arch();
    if cache.version != params.version() || cache.arch_hash != a.hash() {
        return Err(Error::structure(
            "backward",
            format!(
                "cache from parameter version {} does not match version {}",
                cache.version,
                params.version()
            ),
        ));
    }
    let n = cache.batch;
    if targets.len() != n {
        return Err(Error::structure("backward", format!("{} targets for batch {n}", targets.len())));
    }
    let k = a.classes;
    let (s0, s1, c) = (a.input_side, a.pool1_side(), a.conv_channels);

    let mut objective = 0.0;
    let mut g_logits = Vec::with_capacity(n * k);
    for (i, q) in targets.iter().enumerate() {
        if q.classes() != k {
            return Err(Error::structure("backward", format!("target {i} has {} classes", q.classes())));
        }
        let p = &cache.probs[i * k..(i + 1) * k];
        objective += kind.value(p, q.probs());
        g_logits.extend(kind.logit_grad(p, q.probs()).into_iter().map(|g| T::lit(g / n as f64)));
    }
    objective = objective / n as f64 + weight_decay_penalty(params, weight_decay);

    let mut grads = ModelParams::zeros(a);
    let out = layers::dense_backward(&cache.fc2, params.out_w.data(), &g_logits, n, a.fc2, k, true);
    grads.out_w.data_mut().copy_from_slice(&out.weights);
    grads.out_b.data_mut().copy_from_slice(&out.bias);
    let mut g = out.input.unwrap();

    layers::relu_backward_inplace(&mut g, &cache.fc2);
    let fc2 = layers::dense_backward(&cache.fc1, params.fc2_w.data(), &g, n, a.fc1, a.fc2, true);
    grads.fc2_w.data_mut().copy_from_slice(&fc2.weights);
    grads.fc2_b.data_mut().copy_from_slice(&fc2.bias);
    let mut g = fc2.input.unwrap();

    layers::relu_backward_inplace(&mut g, &cache.fc1);
    let fc1 = layers::dense_backward(&cache.flat, params.fc1_w.data(), &g, n, a.flat_len(), a.fc1, true);
    grads.fc1_w.data_mut().copy_from_slice(&fc1.weights);
    grads.fc1_b.data_mut().copy_from_slice(&fc1.bias);
    let g = fc1.input.unwrap();

    let g = layers::maxpool_backward(&g, &cache.pool2_idx, cache.conv2.len());
    let mut g = layers::lrn_backward(&cache.conv2, &cache.lrn2_scale, &g, c, &a.lrn);
    layers::relu_backward_inplace(&mut g, &cache.conv2);
    let conv2_shape = ConvShape { batch: n, height: s1, width: s1, in_ch: c, out_ch: c, kernel: a.kernel };
    let conv2 = layers::conv2d_backward(&cache.lrn1, params.conv2_w.data(), &g, &conv2_shape, true);
    grads.conv2_w.data_mut().copy_from_slice(&conv2.weights);
    grads.conv2_b.data_mut().copy_from_slice(&conv2.bias);
    let g = conv2.input.unwrap();

    let g = layers::lrn_backward(&cache.pool1, &cache.lrn1_scale, &g, c, &a.lrn);
    let mut g = layers::maxpool_backward(&g, &cache.pool1_idx, cache.conv1.len());
    layers::relu_backward_inplace(&mut g, &cache.conv1);
    let conv1_shape = ConvShape { batch: n, height: s0, width: s0, in_ch: a.input_channels, out_ch: c, kernel: a.kernel };
    let conv1 = layers::conv2d_backward(&cache.input, params.conv1_w.data(), &g, &conv1_shape, false);
    grads.conv1_w.data_mut().copy_from_slice(&conv1.weights);
    grads.conv1_b.data_mut().copy_from_slice(&conv1.bias);

    let lambda = T::lit(weight_decay);
    for (gw, w) in [(&mut grads.fc1_w, &params.fc1_w), (&mut grads.fc2_w, &params.fc2_w)] {
        for (gv, &wv) in gw.data_mut().iter_mut().zip(w.data()) {
            *gv += lambda * wv;
        }
    }

    if cfg!(debug_assertions) {
        for (name, t) in grads.tensors() {
            t.check_finite(name)?;
        }
    }
    Ok((grads, objective))
}

/// The objective `backward` differentiates, evaluated from scratch.
pub fn batch_loss<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    targets: &[ProbDistribution],
    kind: LossKind,
    weight_decay: f64,
) -> Result<f64> {
    let pass = forward(params, batch)?;
    let k = params.arch().classes;
    let data: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, q)| kind.value(&pass.probs()[i * k..(i + 1) * k], q.probs()))
        .sum();
    Ok(data / targets.len() as f64 + weight_decay_penalty(params, weight_decay))
}
