use serde::{Deserialize, Serialize};

use super::{LossKind, ModelParams, Real};
use crate::{Error, Result};

/// Optimization hyperparameters. The weight-decay term is part of the
/// objective that [`super::backward`] differentiates, so it reaches only the
/// two hidden dense layers' weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub checkpoint_every: usize,
    /// Share of each epoch kept pristine, then at distortion levels 1 to 3.
    #[serde(default = "default_mixture")]
    pub mixture: [f64; 4],
}

fn default_mixture() -> [f64; 4] {
    crate::dataset::DEFAULT_RATIOS
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl TrainingConfig {
    /// Batch 100, 2000 epochs, lr 0.1 decayed ×0.1 every 350 epochs, fc
    /// weight decay 0.004.
    pub fn paper() -> Self {
        Self {
            batch_size: 100,
            epochs: 2000,
            initial_lr: 0.1,
            decay_factor: 0.1,
            decay_every: 350,
            weight_decay: 0.004,
            momentum: 0.0,
            seed: 0,
            loss: LossKind::SquaredError,
            checkpoint_every: 50,
            mixture: default_mixture(),
        }
    }

    /// 100 epochs with the decay boundary scaled in proportion (every 17).
    pub fn desk_scale() -> Self {
        Self {
            epochs: 100,
            decay_every: 17,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} (config {self:?})")));
        if self.batch_size == 0 || self.epochs == 0 || self.decay_every == 0 || self.checkpoint_every == 0 {
            return bad("batch size, epochs, decay interval and checkpoint interval must be positive");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial learning rate must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return bad("decay factor must lie in (0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        learning_rate(self.initial_lr, self.decay_factor, self.decay_every, epoch)
    }

    /// Digest of the fields that shape the training trajectory (everything
    /// except the epoch budget and checkpoint cadence).
    pub fn trajectory_hash(&self) -> String {
        let canonical = Self {
            epochs: 0,
            checkpoint_every: 0,
            ..self.clone()
        };
        crate::digest::sha256_hex(serde_json::to_string(&canonical).expect("serializable").as_bytes())
    }
}

/// Step decay: `initial · factor^floor(epoch / every)`.
pub fn learning_rate(initial: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    initial * factor.powi((epoch / every) as i32)
}

/// Plain update `params ← params − lr · grads`.
pub fn sgd_step<T: Real>(params: &mut ModelParams<T>, grads: &ModelParams<T>, lr: f64) {
    let lr = T::lit(lr);
    for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * gv;
        }
    }
    params.bump_version();
}

/// SGD with optional heavy-ball momentum (`v ← m·v + g`, `p ← p − lr·v`).
/// With momentum 0 it is exactly [`sgd_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd<T> {
    velocity: Option<ModelParams<T>>,
}

impl<T: Real> Default for Sgd<T> {
    fn default() -> Self {
        Self { velocity: None }
    }
}

impl<T: Real> Sgd<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_velocity(velocity: Option<ModelParams<T>>) -> Self {
        Self { velocity }
    }

    pub fn velocity(&self) -> Option<&ModelParams<T>> {
        self.velocity.as_ref()
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>, config: &TrainingConfig, epoch: usize) {
        let lr = config.learning_rate(epoch);
        if config.momentum == 0.0 {
            sgd_step(params, grads, lr);
            return;
        }
        let m = T::lit(config.momentum);
        let v = self.velocity.get_or_insert_with(|| ModelParams::zeros(params.arch()));
        for ((_, vt), (_, g)) in v.tensors_mut().into_iter().zip(grads.tensors()) {
            for (vv, &gv) in vt.data_mut().iter_mut().zip(g.data()) {
                *vv = m * *vv + gv;
            }
        }
        let v = self.velocity.as_ref().unwrap();
        sgd_step(params, v, lr);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    #[test]
    fn schedule() {
        let c = TrainingConfig::paper();
        assert_eq!(c.learning_rate(0), 0.1);
        assert_eq!(c.learning_rate(349), 0.1);
        assert!((c.learning_rate(350) - 0.01).abs() < 1e-15);
        assert!((c.learning_rate(1999) - 1e-6).abs() < 1e-18);
        let d = TrainingConfig::desk_scale();
        assert!((d.learning_rate(17) - 0.01).abs() < 1e-15);
        assert!((d.learning_rate(99) - 0.1 * 0.1f64.powi(5)).abs() < 1e-18);
    }

    #[test]
    fn validation() {
        assert!(TrainingConfig::paper().validate().is_ok());
        for broken in [
            TrainingConfig { batch_size: 0, ..TrainingConfig::paper() },
            TrainingConfig { decay_factor: 1.0, ..TrainingConfig::paper() },
            TrainingConfig { initial_lr: -0.1, ..TrainingConfig::paper() },
            TrainingConfig { momentum: 1.0, ..TrainingConfig::paper() },
        ] {
            assert!(matches!(broken.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let arch = Architecture::tiny();
        let mut p = ModelParams::<f64>::init(&arch, 1);
        let before = p.clone();
        let g = ModelParams::<f64>::init(&arch, 2);
        sgd_step(&mut p, &g, 0.0);
        for ((_, a), (_, b)) in p.tensors().into_iter().zip(before.tensors()) {
            assert_eq!(a, b);
        }
        assert_eq!(p.version(), before.version() + 1);
    }

    #[test]
    fn momentum_accumulates() {
        let arch = Architecture::tiny();
        let config = TrainingConfig { momentum: 0.5, initial_lr: 1.0, ..TrainingConfig::paper() };
        let mut p = ModelParams::<f64>::zeros(&arch);
        let mut g = ModelParams::<f64>::zeros(&arch);
        g.out_b.data_mut().fill(1.0);
        let mut opt = Sgd::new();
        opt.step(&mut p, &g, &config, 0);
        opt.step(&mut p, &g, &config, 0);
        // -1 then -(0.5 + 1)
        assert!(p.out_b.data().iter().all(|&v| (v + 2.5).abs() < 1e-15));
    }

    #[test]
    fn trajectory_hash_ignores_budget() {
        let a = TrainingConfig::paper();
        let b = TrainingConfig { epochs: 5, checkpoint_every: 1, ..a.clone() };
        assert_eq!(a.trajectory_hash(), b.trajectory_hash());
        let c = TrainingConfig { seed: 1, ..a.clone() };
        assert_ne!(a.trajectory_hash(), c.trajectory_hash());
    }
}
