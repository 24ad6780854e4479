use serde::{Deserialize, Serialize};

use super::{ModelParams, ProbDistribution, Real};

/// Training objective between the softmax output `p` and the target `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `Σ_k (p(k) - q(k))²`
    #[default]
    SquaredError,
    /// `-Σ_k q(k) ln p(k)`, kept for ablations.
    CrossEntropy,
}

const LOG_FLOOR: f64 = 1e-300;

impl LossKind {
    pub fn value(self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            LossKind::SquaredError => p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(),
            LossKind::CrossEntropy => -p
                .iter()
                .zip(q)
                .map(|(&a, &b)| if b == 0.0 { 0.0 } else { b * a.max(LOG_FLOOR).ln() })
                .sum::<f64>(),
        }
    }

    /// Gradient of the per-sample loss with respect to the logits, given the
    /// softmax output `p` (one row).
    pub(crate) fn logit_grad(self, p: &[f64], q: &[f64]) -> Vec<f64> {
        match self {
            LossKind::SquaredError => {
                let g: Vec<f64> = p.iter().zip(q).map(|(a, b)| 2.0 * (a - b)).collect();
                super::layers::softmax_backward(p, &g, p.len())
            }
            LossKind::CrossEntropy => {
                let mass: f64 = q.iter().sum();
                p.iter().zip(q).map(|(a, b)| a * mass - b).collect()
            }
        }
    }
}

/// Squared Euclidean distance between prediction and target.
pub fn loss(p: &ProbDistribution, q: &ProbDistribution) -> f64 {
    LossKind::SquaredError.value(p.probs(), q.probs())
}

/// `(λ / 2) · (‖W_fc1‖² + ‖W_fc2‖²)`; its gradient is `λ · W` on those two
/// weight matrices only.
pub fn weight_decay_penalty<T: Real>(params: &ModelParams<T>, lambda: f64) -> f64 {
    let sq = |w: &[T]| w.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>();
    0.5 * lambda * (sq(params.fc1_w.data()) + sq(params.fc2_w.data()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::onehot;

    #[test]
    fn squared_error_examples() {
        let q = onehot(1, 10).unwrap();
        assert_eq!(loss(&q, &q), 0.0);
        assert_eq!(loss(&onehot(0, 10).unwrap(), &q), 2.0);
        let uniform = ProbDistribution::uniform(10);
        assert!((loss(&uniform, &onehot(3, 10).unwrap()) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        let z = [0.3, -1.2, 2.0, 0.0, 0.7];
        let q = [0.1, 0.2, 0.4, 0.2, 0.1];
        for kind in [LossKind::SquaredError, LossKind::CrossEntropy] {
            let f = |z: &[f64]| kind.value(&crate::nn::layers::softmax_rows(z, 5), &q);
            let p = crate::nn::layers::softmax_rows(&z, 5);
            let g = kind.logit_grad(&p, &q);
            for i in 0..5 {
                let mut up = z;
                up[i] += 1e-6;
                let mut down = z;
                down[i] -= 1e-6;
                let numeric = (f(&up) - f(&down)) / 2e-6;
                assert!((numeric - g[i]).abs() < 1e-7, "{kind:?} {i}: {numeric} vs {}", g[i]);
            }
        }
    }
}
