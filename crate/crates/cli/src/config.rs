use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use iqals::dataset::TEST_SET_SEED;
use iqals::nn::{Architecture, LossKind, TrainingConfig};

pub const DATA_ENV: &str = "IQALS_DATA";

/// Everything a config file may set. Unset keys fall back to defaults;
/// command-line flags win over both.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub test_set_seed: Option<u64>,
    pub preset: Option<Preset>,
    pub arch: Option<ArchChoice>,
    pub strategies: Option<Vec<u8>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub initial_lr: Option<f64>,
    pub decay_factor: Option<f64>,
    pub decay_every: Option<usize>,
    pub weight_decay: Option<f64>,
    pub momentum: Option<f64>,
    pub loss: Option<LossKind>,
    pub checkpoint_every: Option<usize>,
    pub mixture: Option<[f64; 4]>,
    pub train_limit: Option<usize>,
    pub probe: Option<usize>,
    pub formats: Option<Vec<Format>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| iqals::Error::Config(format!("{}: {e}", path.display())).into())
    }

    /// Keys set in `over` replace those in `self`.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        macro_rules! pick {
            ($($f:ident),*) => { FileConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            data, out, seed, test_set_seed, preset, arch, strategies, epochs, batch_size, initial_lr, decay_factor,
            decay_every, weight_decay, momentum, loss, checkpoint_every, mixture, train_limit, probe, formats
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 2000 epochs, decay every 350.
    Paper,
    /// 100 epochs, decay every 17.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ArchChoice {
    /// 64-channel convolutions, 384/192 dense layers.
    Table1,
    /// 16-channel convolutions, 64/32 dense layers, for quick CPU runs.
    Small,
}

impl ArchChoice {
    pub fn architecture(self) -> Architecture {
        match self {
            ArchChoice::Table1 => Architecture::table1(),
            ArchChoice::Small => Architecture {
                conv_channels: 16,
                fc1: 64,
                fc2: 32,
                ..Architecture::table1()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Md,
}

/// The fully resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub test_set_seed: u64,
    pub preset: Preset,
    pub arch: ArchChoice,
    pub strategies: Vec<u8>,
    pub train_limit: Option<usize>,
    pub probe: usize,
    pub formats: Vec<Format>,
    pub training: TrainingConfig,
}

impl RunConfig {
    pub fn resolve(c: FileConfig) -> anyhow::Result<Self> {
        let preset = c.preset.unwrap_or(Preset::Desk);
        let base = match preset {
            Preset::Paper => TrainingConfig::paper(),
            Preset::Desk => TrainingConfig::desk_scale(),
        };
        let training = TrainingConfig {
            batch_size: c.batch_size.unwrap_or(base.batch_size),
            epochs: c.epochs.unwrap_or(base.epochs),
            initial_lr: c.initial_lr.unwrap_or(base.initial_lr),
            decay_factor: c.decay_factor.unwrap_or(base.decay_factor),
            decay_every: c.decay_every.unwrap_or(base.decay_every),
            weight_decay: c.weight_decay.unwrap_or(base.weight_decay),
            momentum: c.momentum.unwrap_or(base.momentum),
            seed: c.seed.unwrap_or(base.seed),
            loss: c.loss.unwrap_or(base.loss),
            checkpoint_every: c.checkpoint_every.unwrap_or(base.checkpoint_every),
            mixture: c.mixture.unwrap_or(base.mixture),
        };
        training.validate()?;
        let strategies = c.strategies.unwrap_or_else(|| (1..=9).collect());
        for &s in &strategies {
            iqals::trainer::Strategy::from_id(s)?;
        }
        if c.train_limit == Some(0) {
            bail!(iqals::Error::Config("train_limit must be positive".into()));
        }
        let data = c.data.or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from));
        Ok(Self {
            data,
            out: c.out.unwrap_or_else(|| PathBuf::from("runs")),
            test_set_seed: c.test_set_seed.unwrap_or(TEST_SET_SEED),
            preset,
            arch: c.arch.unwrap_or(ArchChoice::Table1),
            strategies,
            train_limit: c.train_limit,
            probe: c.probe.unwrap_or(100),
            formats: c.formats.unwrap_or_else(|| vec![Format::Csv, Format::Md]),
            training,
        })
    }

    pub fn data_dir(&self) -> anyhow::Result<&Path> {
        match &self.data {
            Some(d) => Ok(d),
            None => bail!(iqals::Error::Config(format!(
                "no dataset path: pass --data, set `data` in the config file, or export {DATA_ENV}"
            ))),
        }
    }

    pub fn test_set_dir(&self) -> PathBuf {
        self.out.join("testsets")
    }

    pub fn strategy_dir(&self, id: u8) -> PathBuf {
        self.out.join(format!("strategy-{id}"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unprintable: {e}>"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str("epochs = 7\nseed = 3\npreset = \"paper\"\n").unwrap();
        let flags = FileConfig {
            seed: Some(9),
            ..Default::default()
        };
        let rc = RunConfig::resolve(file.overlay(flags)).unwrap();
        assert_eq!(rc.training.seed, 9);
        assert_eq!(rc.training.epochs, 7);
        assert_eq!(rc.training.decay_every, 350);
        assert_eq!(rc.training.batch_size, 100);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("epoch = 7\n").is_err());
    }

    #[test]
    fn bad_strategy_in_file_rejected() {
        let file = FileConfig {
            strategies: Some(vec![1, 12]),
            ..Default::default()
        };
        assert!(RunConfig::resolve(file).is_err());
    }
}
