//! The Table-1 style CNN (conv → pool → LRN → conv → LRN → pool → 3 dense
//! layers → softmax) with hand-derived gradients, target distributions,
//! losses, SGD and checkpoints.

mod arch;
mod checkpoint;
mod labels;
pub mod layers;
mod loss;
mod model;
mod optim;
mod params;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

pub use arch::{Architecture, LayerShape};
pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use labels::{onehot, smooth_labels, ProbDistribution};
pub use layers::LrnParams;
pub use loss::{loss, weight_decay_penalty, LossKind};
pub use model::{backward, batch_loss, forward, ForwardCache, ForwardPass};
pub use optim::{learning_rate, sgd_step, Sgd, TrainingConfig};
pub use params::{ModelParams, INIT_SCHEME};
pub use tensor::Tensor;

/// Scalar type the network runs at: `f32` for training, `f64` for
/// gradient checks.
pub trait Real: Float + NumAssign + Sum + Default + Debug + Send + Sync + 'static {
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `C = alpha · A·B + beta · C` over strided row-major views.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: usize,
        csa: usize,
        b: &[Self],
        rsb: usize,
        csb: usize,
        beta: Self,
        c: &mut [Self],
        rsc: usize,
        csc: usize,
    );
}

fn check_view(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        assert!((rows - 1) * rs + (cols - 1) * cs < len, "gemm view out of bounds");
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn lit(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: usize,
                csa: usize,
                b: &[Self],
                rsb: usize,
                csb: usize,
                beta: Self,
                c: &mut [Self],
                rsc: usize,
                csc: usize,
            ) {
                check_view(a.len(), m, k, rsa, csa);
                check_view(b.len(), k, n, rsb, csb);
                check_view(c.len(), m, n, rsc, csc);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every view was bounds-checked above and `c` is
                // exclusively borrowed, so it cannot alias `a` or `b`.
                unsafe {
                    $gemm(
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
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);
