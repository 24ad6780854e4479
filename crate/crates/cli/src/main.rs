use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod imageio;

use config::{ArchChoice, FileConfig, Format, Preset};
use iqals::distort::DistortionKind;
use iqals::nn::LossKind;
use iqals::trainer::Strategy;

#[derive(Parser, Debug)]
#[command(name = "iqals", version, about = "Quality-aware label smoothing: data prep, training, evaluation")]
struct Cli {
    /// TOML file with defaults for any flag (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify the dataset and write the ten evaluation sets with manifests.
    Prep {
        #[command(flatten)]
        common: Common,
        /// sha256sum-style file listing expected digests of the batch files.
        #[arg(long)]
        digests: Option<PathBuf>,
        #[arg(long)]
        test_set_seed: Option<u64>,
    },
    /// Train one strategy.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        schedule: Schedule,
        /// Strategy 1-9.
        #[arg(long, value_parser = parse_strategy)]
        strategy: Strategy,
        /// Ignore existing checkpoints instead of resuming.
        #[arg(long)]
        fresh: bool,
    },
    /// Evaluate checkpoints on the ten sets and write the accuracy grid.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        report: ReportArgs,
        /// Test images (by index) whose true-class confidence is recorded.
        #[arg(long)]
        probe: Option<usize>,
    },
    /// Rebuild the grid from stored evaluation results.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Print SSIM between a reference and a distorted PNG.
    Score { reference: PathBuf, distorted: PathBuf },
    /// Apply one distortion level to a 32x32 PNG.
    Distort {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        kind: DistortionKind,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        level: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Dataset directory (falls back to the config file, then $IQALS_DATA).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for test sets, checkpoints and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    arch: Option<ArchChoice>,
}

#[derive(Args, Debug, Default)]
struct Schedule {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    initial_lr: Option<f64>,
    #[arg(long)]
    decay_factor: Option<f64>,
    #[arg(long)]
    decay_every: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Pristine and level 1-3 shares, e.g. 0.6,0.15,0.15,0.1.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    mixture: Option<Vec<f64>>,
    /// Train on the first N training images only.
    #[arg(long)]
    train_limit: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ReportArgs {
    /// Comma-separated strategy ids (default: all nine).
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    strategies: Option<Vec<Strategy>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    format: Option<Vec<Format>>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum LossArg {
    SquaredError,
    CrossEntropy,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: iqals::Error| e.to_string())
}

impl Common {
    fn to_file(&self) -> FileConfig {
        FileConfig {
            data: self.data.clone(),
            out: self.out.clone(),
            seed: self.seed,
            arch: self.arch,
            ..Default::default()
        }
    }
}

impl Schedule {
    fn apply(&self, c: FileConfig) -> FileConfig {
        FileConfig {
            preset: self.preset.or(c.preset),
            epochs: self.epochs.or(c.epochs),
            batch_size: self.batch_size.or(c.batch_size),
            initial_lr: self.initial_lr.or(c.initial_lr),
            decay_factor: self.decay_factor.or(c.decay_factor),
            decay_every: self.decay_every.or(c.decay_every),
            weight_decay: self.weight_decay.or(c.weight_decay),
            momentum: self.momentum.or(c.momentum),
            loss: self
                .loss
                .map(|l| match l {
                    LossArg::SquaredError => LossKind::SquaredError,
                    LossArg::CrossEntropy => LossKind::CrossEntropy,
                })
                .or(c.loss),
            checkpoint_every: self.checkpoint_every.or(c.checkpoint_every),
            mixture: self.mixture.as_ref().map(|m| [m[0], m[1], m[2], m[3]]).or(c.mixture),
            train_limit: self.train_limit.or(c.train_limit),
            ..c
        }
    }
}

impl ReportArgs {
    fn apply(&self, c: FileConfig) -> FileConfig {
        FileConfig {
            strategies: self
                .strategies
                .as_ref()
                .map(|s| s.iter().map(|s| s.id()).collect())
                .or(c.strategies),
            formats: self.format.clone().or(c.formats),
            ..c
        }
    }
}

fn resolve(file: Option<&PathBuf>, flags: FileConfig) -> anyhow::Result<config::RunConfig> {
    let base = match file {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let rc = config::RunConfig::resolve(base.overlay(flags))?;
    eprintln!("# effective configuration (flags > file > defaults)\n{}", rc.to_toml());
    Ok(rc)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = cli.config.as_ref();
    match cli.command {
        Command::Prep {
            common,
            digests,
            test_set_seed,
        } => {
            let flags = FileConfig {
                test_set_seed,
                ..common.to_file()
            };
            commands::prep(&resolve(file, flags)?, digests.as_deref())
        }
        Command::Train {
            common,
            schedule,
            strategy,
            fresh,
        } => {
            let rc = resolve(file, schedule.apply(common.to_file()))?;
            commands::train(&rc, strategy, !fresh)
        }
        Command::Eval { common, report, probe } => {
            let flags = FileConfig {
                probe,
                ..report.apply(common.to_file())
            };
            commands::eval(&resolve(file, flags)?)
        }
        Command::Report { common, report } => commands::report(&resolve(file, report.apply(common.to_file()))?),
        Command::Score { reference, distorted } => commands::score(&reference, &distorted),
        Command::Distort {
            input,
            output,
            kind,
            level,
            seed,
        } => commands::distort(&input, &output, kind, level, seed),
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<iqals::Error>()) {
        Some(e) if e.is_usage_error() => EXIT_USAGE,
        Some(e) if e.is_data_error() => EXIT_DATA,
        Some(_) => EXIT_RUNTIME,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => EXIT_DATA,
        None => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
