use serde::{Deserialize, Serialize};

use super::layers::LrnParams;
use crate::{Error, Result};

pub const POOL_WINDOW: usize = 3;
pub const POOL_STRIDE: usize = 2;

/// Layer sizes of the network. [`Architecture::table1`] is the CIFAR-10
/// configuration; smaller instances exist for gradient checks and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_side: usize,
    pub input_channels: usize,
    pub conv_channels: usize,
    pub kernel: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub classes: usize,
    pub lrn: LrnParams,
}

/// One row of the size table: `size_in` / `size_out` exclude the batch axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: &'static str,
    pub size_in: Vec<usize>,
    pub size_out: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self::table1()
    }
}

impl Architecture {
    pub fn table1() -> Self {
        Self {
            input_side: 32,
            input_channels: 3,
            conv_channels: 64,
            kernel: 5,
            fc1: 384,
            fc2: 192,
            classes: 10,
            lrn: LrnParams::default(),
        }
    }

    /// 4×4 inputs with two channels, for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            input_side: 4,
            input_channels: 2,
            conv_channels: 3,
            kernel: 5,
            fc1: 6,
            fc2: 5,
            classes: 10,
            lrn: LrnParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.input_side,
            self.input_channels,
            self.conv_channels,
            self.kernel,
            self.fc1,
            self.fc2,
            self.classes,
        ];
        if fields.contains(&0) || self.kernel % 2 == 0 || self.classes < 2 {
            return Err(Error::Config(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }

    pub fn pool1_side(&self) -> usize {
        self.input_side.div_ceil(POOL_STRIDE)
    }

    pub fn pool2_side(&self) -> usize {
        self.pool1_side().div_ceil(POOL_STRIDE)
    }

    pub fn flat_len(&self) -> usize {
        self.pool2_side() * self.pool2_side() * self.conv_channels
    }

    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side * self.input_channels
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let (s0, s1, s2, c) = (self.input_side, self.pool1_side(), self.pool2_side(), self.conv_channels);
        let row = |name, size_in: &[usize], size_out: &[usize]| LayerShape {
            name,
            size_in: size_in.to_vec(),
            size_out: size_out.to_vec(),
        };
        vec![
            row("conv1", &[s0, s0, self.input_channels], &[s0, s0, c]),
            row("pool1", &[s0, s0, c], &[s1, s1, c]),
            row("lrn1", &[s1, s1, c], &[s1, s1, c]),
            row("conv2", &[s1, s1, c], &[s1, s1, c]),
            row("lrn2", &[s1, s1, c], &[s1, s1, c]),
            row("pool2", &[s1, s1, c], &[s2, s2, c]),
            row("fc1", &[self.flat_len()], &[self.fc1]),
            row("fc2", &[self.fc1], &[self.fc2]),
            row("softmax", &[self.fc2], &[self.classes]),
        ]
    }

    /// Digest of the canonical JSON form; checkpoints refuse to load into a
    /// different architecture.
    pub fn hash(&self) -> String {
        crate::digest::sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}
