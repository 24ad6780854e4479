use std::path::{Path, PathBuf};

use log::info;

use super::{Regularization, Strategy, TrainingSet};
use crate::dataset::{build_epoch_mixture, LabeledSample, MixturePlan};
use crate::distort::{Distorter, StandardDistorter};
use crate::image::IMAGE_BYTES;
use crate::nn::{
    backward, forward, onehot, smooth_labels, Architecture, Checkpoint, CheckpointHeader, ModelParams,
    ProbDistribution, Sgd, Tensor, TrainingConfig,
};
use crate::{rng, Error, Result};

pub const LOG_FILE: &str = "train_log.csv";

const MIXTURE_STREAM: u64 = 0x313A;
const ORDER_STREAM: u64 = 0x0DE7;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where checkpoints and the training log go; `None` keeps everything
    /// in memory.
    pub out_dir: Option<PathBuf>,
    /// Continue from the newest checkpoint in `out_dir`, if any.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based index of the completed epoch.
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub log: Vec<EpochLog>,
    /// (completed epochs, path, SHA-256) for each checkpoint written by
    /// this call.
    pub checkpoints: Vec<(usize, PathBuf, String)>,
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch-{epoch:05}.ckpt"))
}

/// The checkpoint with the most completed epochs in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<(usize, PathBuf)>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let epoch = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("epoch-"))
            .and_then(|n| n.strip_suffix(".ckpt"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(e) = epoch {
            if best.as_ref().is_none_or(|(b, _)| e > *b) {
                best = Some((e, path));
            }
        }
    }
    Ok(best)
}

fn format_log(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,mean_loss,learning_rate\n");
    for row in log {
        s.push_str(&format!("{},{},{}\n", row.epoch, row.mean_loss, row.learning_rate));
    }
    s
}

pub fn read_log(path: &Path) -> Result<Vec<EpochLog>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: &str| Error::Checkpoint {
        path: path.to_path_buf(),
        detail: format!("malformed log line {line:?}"),
    };
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad(line));
            }
            Ok(EpochLog {
                epoch: f[0].parse().map_err(|_| bad(line))?,
                mean_loss: f[1].parse().map_err(|_| bad(line))?,
                learning_rate: f[2].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

pub fn train(
    strategy: Strategy,
    config: &TrainingConfig,
    arch: &Architecture,
    data: &[LabeledSample],
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    train_with(strategy, config, arch, data, &StandardDistorter, options)
}

fn targets(strategy: Strategy, samples: &[LabeledSample], classes: usize) -> Result<Vec<ProbDistribution>> {
    let targets: Vec<ProbDistribution> = samples
        .iter()
        .map(|s| match strategy.regularization() {
            Regularization::Original => onehot(usize::from(s.label), classes),
            Regularization::IqaLs => smooth_labels(usize::from(s.label), s.quality, classes),
        })
        .collect::<Result<_>>()?;
    if cfg!(debug_assertions) {
        for t in &targets {
            ProbDistribution::new(t.probs().to_vec())?;
        }
    }
    Ok(targets)
}

struct Resumed {
    params: ModelParams<f32>,
    sgd: Sgd<f32>,
    epoch: usize,
    log: Vec<EpochLog>,
}

fn resume_from(dir: &Path, strategy: Strategy, config: &TrainingConfig, arch: &Architecture) -> Result<Option<Resumed>> {
    let Some((_, path)) = latest_checkpoint(dir)? else {
        return Ok(None);
    };
    let ckpt = Checkpoint::read(&path)?;
    let h = &ckpt.header;
    if h.arch.hash() != arch.hash() {
        return Err(Error::Config(format!(
            "refusing to resume from {}: architecture differs from the requested one",
            path.display()
        )));
    }
    if h.config.trajectory_hash() != config.trajectory_hash() {
        return Err(Error::Config(format!(
            "refusing to resume from {}: training configuration differs (checkpoint {:?}, requested {:?})",
            path.display(),
            h.config,
            config
        )));
    }
    if h.strategy != Some(strategy.id()) {
        return Err(Error::Config(format!(
            "refusing to resume from {}: it belongs to strategy {:?}, not {}",
            path.display(),
            h.strategy,
            strategy.id()
        )));
    }
    let log_path = dir.join(LOG_FILE);
    let mut log = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
    log.retain(|r| r.epoch <= h.epoch);
    info!("resuming {strategy} from {} after {} epochs", path.display(), h.epoch);
    Ok(Some(Resumed {
        epoch: h.epoch,
        params: ckpt.params,
        sgd: Sgd::with_velocity(ckpt.velocity),
        log,
    }))
}

/// Runs `strategy` for `config.epochs` epochs. Each epoch rebuilds the
/// training mixture (the pristine set is used as-is and never touches the
/// distorter), builds one-hot or quality-smoothed targets, and sweeps the
/// data in seeded shuffled batches.
pub fn train_with(
    strategy: Strategy,
    config: &TrainingConfig,
    arch: &Architecture,
    data: &[LabeledSample],
    distorter: &dyn Distorter,
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    config.validate()?;
    arch.validate()?;
    if arch.input_len() != IMAGE_BYTES {
        return Err(Error::structure(
            "input",
            format!("architecture expects {} values per image, images have {IMAGE_BYTES}", arch.input_len()),
        ));
    }
    if data.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let resumed = match (&options.out_dir, options.resume) {
        (Some(dir), true) => resume_from(dir, strategy, config, arch)?,
        _ => None,
    };
    let (mut params, mut sgd, start, mut log) = match resumed {
        Some(r) => (r.params, r.sgd, r.epoch, r.log),
        None => (ModelParams::<f32>::init(arch, config.seed), Sgd::new(), 0, Vec::new()),
    };

    let plan = MixturePlan {
        ratios: config.mixture,
        seed: rng::derive_seed(&[config.seed, MIXTURE_STREAM]),
        kinds: strategy.training_set().kinds(),
    };
    if strategy.training_set() != TrainingSet::Pristine {
        plan.validate()?;
    }
    let mut checkpoints = Vec::new();
    let mut input = vec![0f32; config.batch_size * IMAGE_BYTES];

    for epoch in start..config.epochs {
        let mixed;
        let samples: &[LabeledSample] = if strategy.training_set() == TrainingSet::Pristine {
            data
        } else {
            mixed = build_epoch_mixture(data, &plan, distorter, epoch)?;
            &mixed
        };
        let all_targets = targets(strategy, samples, arch.classes)?;

        let mut order: Vec<usize> = (0..samples.len()).collect();
        rng::shuffle(&mut order, &mut rng::rng(rng::derive_seed(&[config.seed, epoch as u64, ORDER_STREAM])));

        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let n = batch.len();
            for (slot, &i) in input.chunks_exact_mut(IMAGE_BYTES).zip(batch) {
                samples[i].image.write_normalized_hwc(slot);
            }
            let x = Tensor::new(
                &[n, arch.input_side, arch.input_side, arch.input_channels],
                input[..n * IMAGE_BYTES].to_vec(),
            )?;
            let batch_targets: Vec<ProbDistribution> = batch.iter().map(|&i| all_targets[i].clone()).collect();
            let pass = forward(&params, &x)?;
            let (grads, objective) = backward(&params, &pass.cache, &batch_targets, config.loss, config.weight_decay)?;
            if !objective.is_finite() {
                return Err(Error::NonFinite(format!("objective at epoch {} is {objective}", epoch + 1)));
            }
            total += objective * n as f64;
            sgd.step(&mut params, &grads, config, epoch);
        }
        for (name, t) in params.tensors() {
            t.check_finite(name)?;
        }

        let row = EpochLog {
            epoch: epoch + 1,
            mean_loss: total / samples.len() as f64,
            learning_rate: config.learning_rate(epoch),
        };
        info!("{strategy} epoch {} loss {:.6} lr {}", row.epoch, row.mean_loss, row.learning_rate);
        log.push(row);

        if let Some(dir) = &options.out_dir {
            let done = epoch + 1;
            if done % config.checkpoint_every == 0 || done == config.epochs {
                let ckpt = Checkpoint {
                    header: CheckpointHeader::new(arch.clone(), config.clone(), Some(strategy.id()), done),
                    params: params.clone(),
                    velocity: sgd.velocity().cloned(),
                };
                let path = checkpoint_path(dir, done);
                let digest = ckpt.write(&path)?;
                checkpoints.push((done, path, digest));
            }
            let log_path = dir.join(LOG_FILE);
            std::fs::write(&log_path, format_log(&log)).map_err(|e| Error::io(&log_path, e))?;
        }
    }

    Ok(TrainOutcome {
        params,
        log,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthetic;
    use crate::distort::DistortionSpec;
    use crate::nn::LrnParams;
    use crate::Image;

    fn small_arch() -> Architecture {
        Architecture {
            input_side: 32,
            input_channels: 3,
            conv_channels: 4,
            kernel: 5,
            fc1: 16,
            fc2: 8,
            classes: 10,
            lrn: LrnParams::default(),
        }
    }

    fn config(epochs: usize) -> TrainingConfig {
        TrainingConfig {
            batch_size: 10,
            epochs,
            decay_every: 2,
            checkpoint_every: 1,
            seed: 4,
            ..TrainingConfig::paper()
        }
    }

    struct Forbidden;

    impl Distorter for Forbidden {
        fn distort(&self, _: &DistortionSpec, _: &Image, _: u64) -> Result<Image> {
            panic!("pristine training must not distort");
        }
    }

    #[test]
    fn pristine_strategy_never_distorts() {
        let data = synthetic::samples(20, 1);
        let s1 = Strategy::from_id(1).unwrap();
        let out = train_with(s1, &config(1), &small_arch(), &data, &Forbidden, &TrainOptions::default()).unwrap();
        assert_eq!(out.log.len(), 1);
        assert!(out.checkpoints.is_empty());
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let data = synthetic::samples(20, 2);
        let s3 = Strategy::from_id(3).unwrap();
        let arch = small_arch();

        let full_dir = tempfile::tempdir().unwrap();
        let opts = |d: &Path| TrainOptions {
            out_dir: Some(d.to_path_buf()),
            resume: true,
        };
        let full = train(s3, &config(3), &arch, &data, &opts(full_dir.path())).unwrap();
        assert_eq!(full.checkpoints.len(), 3);

        let split_dir = tempfile::tempdir().unwrap();
        let first = train(s3, &config(2), &arch, &data, &opts(split_dir.path())).unwrap();
        let params_at = |p: &Path| Checkpoint::read(p).unwrap().params;
        assert_eq!(params_at(&first.checkpoints[1].1), params_at(&full.checkpoints[1].1));
        let rest = train(s3, &config(3), &arch, &data, &opts(split_dir.path())).unwrap();
        assert_eq!(rest.checkpoints.len(), 1);
        assert_eq!(rest.checkpoints[0].2, full.checkpoints[2].2);
        assert_eq!(rest.log, full.log);
        assert_eq!(read_log(&split_dir.path().join(LOG_FILE)).unwrap(), full.log);
    }

    #[test]
    fn resume_refuses_mismatched_config() {
        let data = synthetic::samples(10, 3);
        let s1 = Strategy::from_id(1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            out_dir: Some(dir.path().to_path_buf()),
            resume: true,
        };
        train(s1, &config(1), &small_arch(), &data, &opts).unwrap();
        let other = TrainingConfig {
            initial_lr: 0.05,
            ..config(2)
        };
        let err = train(s1, &other, &small_arch(), &data, &opts).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let wider = Architecture {
            fc1: 12,
            ..small_arch()
        };
        assert!(matches!(train(s1, &config(2), &wider, &data, &opts), Err(Error::Config(_))));
        let s2 = Strategy::from_id(2).unwrap();
        assert!(matches!(train(s2, &config(2), &small_arch(), &data, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn log_follows_schedule() {
        let data = synthetic::samples(10, 5);
        let out = train(
            Strategy::from_id(1).unwrap(),
            &config(5),
            &small_arch(),
            &data,
            &TrainOptions::default(),
        )
        .unwrap();
        let lrs: Vec<f64> = out.log.iter().map(|r| r.learning_rate).collect();
        assert_eq!(lrs, vec![0.1, 0.1, 0.1 * 0.1, 0.1 * 0.1, 0.1 * 0.1 * 0.1]);
    }
}
