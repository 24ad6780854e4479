use super::{Architecture, Real, Tensor};
use crate::rng::{self, Normals};
use crate::{Error, Result};

/// Recorded in checkpoint headers.
pub const INIT_SCHEME: &str =
    "truncated-normal(2sd)/v1 conv=0.05 fc=0.04 out=1/fc2; bias conv1=0 conv2=0.1 fc=0.1 out=0";

pub const TENSOR_NAMES: [&str; 10] = [
    "conv1.w", "conv1.b", "conv2.w", "conv2.b", "fc1.w", "fc1.b", "fc2.w", "fc2.b", "softmax.w",
    "softmax.b",
];

/// Every learnable tensor of the network, in declaration order. Gradients
/// share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub conv1_w: Tensor<T>,
    pub conv1_b: Tensor<T>,
    pub conv2_w: Tensor<T>,
    pub conv2_b: Tensor<T>,
    pub fc1_w: Tensor<T>,
    pub fc1_b: Tensor<T>,
    pub fc2_w: Tensor<T>,
    pub fc2_b: Tensor<T>,
    pub out_w: Tensor<T>,
    pub out_b: Tensor<T>,
    arch: Architecture,
    version: u64,
}

pub(crate) fn shapes(a: &Architecture) -> [Vec<usize>; 10] {
    let (k, c) = (a.kernel, a.conv_channels);
    [
        vec![k, k, a.input_channels, c],
        vec![c],
        vec![k, k, c, c],
        vec![c],
        vec![a.flat_len(), a.fc1],
        vec![a.fc1],
        vec![a.fc1, a.fc2],
        vec![a.fc2],
        vec![a.fc2, a.classes],
        vec![a.classes],
    ]
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        let s = shapes(arch);
        Self {
            conv1_w: Tensor::zeros(&s[0]),
            conv1_b: Tensor::zeros(&s[1]),
            conv2_w: Tensor::zeros(&s[2]),
            conv2_b: Tensor::zeros(&s[3]),
            fc1_w: Tensor::zeros(&s[4]),
            fc1_b: Tensor::zeros(&s[5]),
            fc2_w: Tensor::zeros(&s[6]),
            fc2_b: Tensor::zeros(&s[7]),
            out_w: Tensor::zeros(&s[8]),
            out_b: Tensor::zeros(&s[9]),
            arch: arch.clone(),
            version: 0,
        }
    }

    /// Seeded initialization following [`INIT_SCHEME`].
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut p = Self::zeros(arch);
        let mut normals = Normals::new(rng::derive_seed(&[seed, 0x1417]));
        let mut fill = |t: &mut Tensor<T>, std: f64| {
            for v in t.data_mut() {
                *v = T::lit(normals.truncated(std));
            }
        };
        fill(&mut p.conv1_w, 0.05);
        fill(&mut p.conv2_w, 0.05);
        fill(&mut p.fc1_w, 0.04);
        fill(&mut p.fc2_w, 0.04);
        fill(&mut p.out_w, 1.0 / arch.fc2 as f64);
        for b in [&mut p.conv2_b, &mut p.fc1_b, &mut p.fc2_b] {
            b.data_mut().fill(T::lit(0.1));
        }
        p
    }

    /// Rebuilds parameters from flat tensors in declaration order.
    pub fn from_tensors(arch: &Architecture, data: Vec<Vec<T>>) -> Result<Self> {
        let mut p = Self::zeros(arch);
        if data.len() != TENSOR_NAMES.len() {
            return Err(Error::structure(
                "params",
                format!("expected {} tensors, got {}", TENSOR_NAMES.len(), data.len()),
            ));
        }
        for ((name, t), d) in p.tensors_mut().into_iter().zip(data) {
            *t = Tensor::new(&t.shape().to_vec(), d).map_err(|e| Error::structure(name, e.to_string()))?;
        }
        Ok(p)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    /// Incremented by every optimizer step; forward caches remember it so a
    /// stale cache cannot be fed to backward.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor<T>); 10] {
        [
            (TENSOR_NAMES[0], &self.conv1_w),
            (TENSOR_NAMES[1], &self.conv1_b),
            (TENSOR_NAMES[2], &self.conv2_w),
            (TENSOR_NAMES[3], &self.conv2_b),
            (TENSOR_NAMES[4], &self.fc1_w),
            (TENSOR_NAMES[5], &self.fc1_b),
            (TENSOR_NAMES[6], &self.fc2_w),
            (TENSOR_NAMES[7], &self.fc2_b),
            (TENSOR_NAMES[8], &self.out_w),
            (TENSOR_NAMES[9], &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<T>); 10] {
        [
            (TENSOR_NAMES[0], &mut self.conv1_w),
            (TENSOR_NAMES[1], &mut self.conv1_b),
            (TENSOR_NAMES[2], &mut self.conv2_w),
            (TENSOR_NAMES[3], &mut self.conv2_b),
            (TENSOR_NAMES[4], &mut self.fc1_w),
            (TENSOR_NAMES[5], &mut self.fc1_b),
            (TENSOR_NAMES[6], &mut self.fc2_w),
            (TENSOR_NAMES[7], &mut self.fc2_b),
            (TENSOR_NAMES[8], &mut self.out_w),
            (TENSOR_NAMES[9], &mut self.out_b),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let c = |t: &Tensor<T>| t.map(|v| U::lit(v.as_f64()));
        ModelParams {
            conv1_w: c(&self.conv1_w),
            conv1_b: c(&self.conv1_b),
            conv2_w: c(&self.conv2_w),
            conv2_b: c(&self.conv2_b),
            fc1_w: c(&self.fc1_w),
            fc1_b: c(&self.fc1_b),
            fc2_w: c(&self.fc2_w),
            fc2_b: c(&self.fc2_b),
            out_w: c(&self.out_w),
            out_b: c(&self.out_b),
            arch: self.arch.clone(),
            version: self.version,
        }
    }

    /// Checks tensor shapes against the architecture and that every value
    /// is finite.
    pub fn validate(&self) -> Result<()> {
        for ((name, t), want) in self.tensors().into_iter().zip(shapes(&self.arch)) {
            if t.shape() != want.as_slice() {
                return Err(Error::structure(name, format!("shape {:?}, expected {want:?}", t.shape())));
            }
            t.check_finite(name)?;
        }
        Ok(())
    }
}
