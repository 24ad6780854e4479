use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Context};
use log::info;

use crate::config::{Format, RunConfig};
use crate::imageio::{self, Rgb};
use iqals::dataset::{self, TestSetId};
use iqals::distort::{self, DistortionKind, DistortionSpec};
use iqals::image::SIDE;
use iqals::nn::Checkpoint;
use iqals::trainer::{self, ConfidenceRecord, Grid, GridRow, ReportHeader, Strategy, TrainOptions};
use iqals::{digest, iqa, Error, Image};

pub const DATASET_DIGESTS: &str = "dataset.sha256";
const EVAL_FILE: &str = "eval.tsv";
const PREDICTIONS_FILE: &str = "predictions.jsonl";
const CONFIDENCE_FILE: &str = "confidence.jsonl";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Parses `sha256sum` output: `<hex>  <file>` per line.
fn parse_digest_list(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (hex, name) = line.split_once(char::is_whitespace).ok_or_else(|| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            detail: "expected `<sha256>  <file>`".into(),
        })?;
        let name = name.trim().trim_start_matches('*');
        let base = Path::new(name).file_name().map(|n| n.to_string_lossy().into_owned());
        map.insert(base.unwrap_or_else(|| name.to_string()), hex.to_lowercase());
    }
    Ok(map)
}

pub fn prep(rc: &RunConfig, digests: Option<&Path>) -> anyhow::Result<()> {
    let dir = dataset::resolve_dir(rc.data_dir()?);
    let recorded = rc.out.join(DATASET_DIGESTS);
    let expected = match digests {
        Some(p) => Some(parse_digest_list(p)?),
        None if recorded.exists() => Some(parse_digest_list(&recorded)?),
        None => None,
    };

    let mut listing = String::new();
    for file in dataset::dataset_files(&dir) {
        let found = digest::sha256_file(&file)?;
        let name = file.file_name().unwrap().to_string_lossy().into_owned();
        if let Some(want) = expected.as_ref().and_then(|m| m.get(&name)) {
            if *want != found {
                bail!(Error::DigestMismatch {
                    path: file,
                    expected: want.clone(),
                    found,
                });
            }
        }
        listing.push_str(&format!("{found}  {name}\n"));
    }
    let data = dataset::load_cifar10(&dir)?;
    info!("loaded {} training and {} test images from {}", data.train.len(), data.test.len(), dir.display());
    write(&recorded, listing)?;

    let sets = dataset::build_test_sets(&data.test, rc.test_set_seed)?;
    let index = dataset::write_test_sets(&rc.test_set_dir(), &sets)?;
    println!("set\timages\tmean_quality\tmanifest_sha256");
    for ((_, samples), entry) in sets.sets.iter().zip(&index.sets) {
        let mean = samples.iter().map(|s| s.quality).sum::<f64>() / samples.len().max(1) as f64;
        println!("{}\t{}\t{mean:.4}\t{}", entry.name, entry.count, entry.manifest_sha256);
    }
    Ok(())
}

pub fn train(rc: &RunConfig, strategy: Strategy, resume: bool) -> anyhow::Result<()> {
    let dir = dataset::resolve_dir(rc.data_dir()?);
    let mut data = dataset::load_cifar10(&dir)?.train;
    if let Some(n) = rc.train_limit {
        data.truncate(n);
    }
    let out_dir = rc.strategy_dir(strategy.id());
    info!("training {strategy} on {} images into {}", data.len(), out_dir.display());
    let outcome = trainer::train(
        strategy,
        &rc.training,
        &rc.arch.architecture(),
        &data,
        &TrainOptions {
            out_dir: Some(out_dir.clone()),
            resume,
        },
    )?;
    if let Some(last) = outcome.log.last() {
        println!(
            "{strategy}: epoch {} mean loss {:.6} learning rate {}",
            last.epoch, last.mean_loss, last.learning_rate
        );
    }
    for (epoch, path, sha) in &outcome.checkpoints {
        println!("checkpoint {epoch}\t{}\t{sha}", path.display());
    }
    Ok(())
}

fn load_latest(rc: &RunConfig, strategy: Strategy) -> anyhow::Result<(Checkpoint, String)> {
    let dir = rc.strategy_dir(strategy.id());
    let Some((_, path)) = trainer::latest_checkpoint(&dir)? else {
        bail!(Error::Checkpoint {
            path: dir,
            detail: format!("no checkpoint for strategy {}; run `iqals train --strategy {}` first", strategy.id(), strategy.id()),
        });
    };
    let ckpt = Checkpoint::read(&path)?;
    if ckpt.header.strategy != Some(strategy.id()) {
        bail!(Error::Checkpoint {
            path,
            detail: format!("holds strategy {:?}, expected {}", ckpt.header.strategy, strategy.id()),
        });
    }
    let sha = digest::sha256_file(&path)?;
    Ok((ckpt, sha))
}

pub fn eval(rc: &RunConfig) -> anyhow::Result<()> {
    let sets = dataset::read_test_sets(&rc.test_set_dir())
        .with_context(|| format!("loading test sets from {} (run `iqals prep` first)", rc.test_set_dir().display()))?;
    let arch = rc.arch.architecture();
    let n = sets.sets.first().map(|(_, s)| s.len()).unwrap_or(0);
    let probe: Vec<usize> = (0..rc.probe.min(n)).collect();

    let strategies = rc.strategies.iter().map(|&s| Strategy::from_id(s)).collect::<Result<Vec<_>, _>>()?;
    let loaded = strategies
        .iter()
        .map(|&s| load_latest(rc, s))
        .collect::<anyhow::Result<Vec<_>>>()?;

    for (strategy, (ckpt, sha)) in strategies.iter().zip(&loaded) {
        info!("evaluating {strategy} at epoch {}", ckpt.header.epoch);
        let report = trainer::evaluate_checkpoint(ckpt, Some(&arch), &sets, &probe)?;
        let header = vec![
            ("strategy".to_string(), strategy.id().to_string()),
            ("epoch".to_string(), ckpt.header.epoch.to_string()),
            ("checkpoint_sha256".to_string(), sha.clone()),
            ("config_hash".to_string(), ckpt.header.config.trajectory_hash()),
            ("seed".to_string(), ckpt.header.seed.to_string()),
            ("test_set_seed".to_string(), sets.seed.to_string()),
        ];
        let dir = rc.strategy_dir(strategy.id());
        write(&dir.join(EVAL_FILE), report.to_text(&header))?;
        report.write_predictions(&dir.join(PREDICTIONS_FILE))?;
        let mut lines = String::new();
        for c in &report.confidences {
            lines.push_str(&serde_json::to_string(c)?);
            lines.push('\n');
        }
        write(&dir.join(CONFIDENCE_FILE), lines)?;
    }
    report(rc)
}

struct StoredEval {
    header: BTreeMap<String, String>,
    accuracies: BTreeMap<TestSetId, f64>,
}

fn read_eval(path: &Path) -> anyhow::Result<StoredEval> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut header = BTreeMap::new();
    let mut accuracies = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |detail: &str| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            detail: detail.to_string(),
        };
        if let Some(kv) = line.strip_prefix("# ") {
            let (k, v) = kv.split_once(": ").ok_or_else(|| bad("malformed header"))?;
            header.insert(k.to_string(), v.to_string());
        } else if line == "set\taccuracy" || line.is_empty() {
            continue;
        } else {
            let (set, acc) = line.split_once('\t').ok_or_else(|| bad("expected `set<TAB>accuracy`"))?;
            let acc: f64 = acc.parse().map_err(|_| bad("bad accuracy"))?;
            accuracies.insert(set.parse()?, acc);
        }
    }
    Ok(StoredEval { header, accuracies })
}

fn unique(values: impl Iterator<Item = String>) -> String {
    let set: BTreeSet<String> = values.collect();
    if set.len() == 1 {
        set.into_iter().next().unwrap()
    } else {
        set.into_iter().collect::<Vec<_>>().join(",")
    }
}

pub fn report(rc: &RunConfig) -> anyhow::Result<()> {
    let strategies = rc.strategies.iter().map(|&s| Strategy::from_id(s)).collect::<Result<Vec<_>, _>>()?;
    let mut stored = Vec::new();
    for &s in &strategies {
        let path = rc.strategy_dir(s.id()).join(EVAL_FILE);
        if !path.exists() {
            bail!(Error::Checkpoint {
                path,
                detail: format!("no evaluation results for strategy {}; run `iqals eval` first", s.id()),
            });
        }
        stored.push(read_eval(&path)?);
    }
    let field = |k: &str| unique(stored.iter().map(|e| e.header.get(k).cloned().unwrap_or_default()));
    let header = ReportHeader::new(&field("config_hash"), field("seed").parse().unwrap_or(0), rc.test_set_seed)
        .with("seed", field("seed"))
        .with("test_set_seed", field("test_set_seed"))
        .with(
            "checkpoints",
            strategies
                .iter()
                .zip(&stored)
                .map(|(s, e)| format!("{}@{}", s.id(), e.header.get("epoch").map(String::as_str).unwrap_or("?")))
                .collect::<Vec<_>>()
                .join(" "),
        );
    let mut grid = Grid::new(header);
    for (&strategy, e) in strategies.iter().zip(&stored) {
        let accuracies = grid
            .columns
            .iter()
            .map(|id| {
                e.accuracies.get(id).copied().ok_or_else(|| Error::Manifest {
                    path: rc.strategy_dir(strategy.id()).join(EVAL_FILE),
                    line: 0,
                    detail: format!("missing test set {id}"),
                })
            })
            .collect::<Result<_, _>>()?;
        grid.rows.push(GridRow { strategy, accuracies });
    }

    let dir = rc.report_dir();
    for f in &rc.formats {
        match f {
            Format::Csv => write(&dir.join("grid.csv"), grid.to_csv())?,
            Format::Md => write(&dir.join("grid.md"), grid.to_markdown())?,
        }
    }
    print!("{}", grid.to_markdown());

    let summary = confidence_summary(rc, &strategies)?;
    if !summary.is_empty() {
        write(&dir.join("confidence.md"), &summary)?;
        print!("\n{summary}");
    }
    Ok(())
}

/// Mean true-class confidence over the probe images, per distortion type
/// and level (level 0 is the pristine set).
fn confidence_summary(rc: &RunConfig, strategies: &[Strategy]) -> anyhow::Result<String> {
    let mut out = String::new();
    for &s in strategies {
        let path = rc.strategy_dir(s.id()).join(CONFIDENCE_FILE);
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let records = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(serde_json::from_str::<ConfidenceRecord>)
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        if records.is_empty() {
            continue;
        }
        if out.is_empty() {
            out.push_str("| strategy | distortion | level 0 | level 1 | level 2 | level 3 |\n|---|---|---|---|---|---|\n");
        }
        let mean = |pred: &dyn Fn(&ConfidenceRecord) -> bool| {
            let v: Vec<f64> = records.iter().filter(|r| pred(r)).map(|r| r.confidence).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        let pristine = mean(&|r| r.level == 0);
        for kind in DistortionKind::ALL {
            let cells: Vec<String> = std::iter::once(pristine)
                .chain((1..=3).map(|l| mean(&|r| r.kind == Some(kind) && r.level == l)))
                .map(|v| format!("{v:.4}"))
                .collect();
            out.push_str(&format!("| {} | {} | {} |\n", s.id(), kind, cells.join(" | ")));
        }
    }
    Ok(out)
}

pub fn score(reference: &Path, distorted: &Path) -> anyhow::Result<()> {
    let a = imageio::read_png(reference)?;
    let b = imageio::read_png(distorted)?;
    if (a.width, a.height) != (b.width, b.height) {
        bail!(Error::Dimension(format!(
            "{} is {}x{} but {} is {}x{}",
            reference.display(),
            a.width,
            a.height,
            distorted.display(),
            b.width,
            b.height
        )));
    }
    let q = iqa::ssim_rgb(&a.pixels, &b.pixels, a.width, a.height)?;
    println!("ssim\t{:.6}\nquality\t{:.6}", q.raw, q.transformed);
    Ok(())
}

pub fn distort(input: &Path, output: &Path, kind: DistortionKind, level: u8, seed: u64) -> anyhow::Result<()> {
    let src = imageio::read_png(input)?;
    if (src.width, src.height) != (SIDE, SIDE) {
        bail!(Error::Dimension(format!(
            "{} is {}x{}; only {SIDE}x{SIDE} images are supported",
            input.display(),
            src.width,
            src.height
        )));
    }
    let img = Image::from_rgb_interleaved(&src.pixels)?;
    let spec = DistortionSpec::at_level(kind, level)?;
    let out = distort::apply(&spec, &img, seed)?;
    let q = iqa::ssim(&img, &out)?;
    imageio::write_png(
        output,
        &Rgb {
            width: SIDE,
            height: SIDE,
            pixels: out.to_rgb_interleaved(),
        },
    )?;
    println!("{spec}\tssim\t{:.6}\tquality\t{:.6}", q.raw, q.transformed);
    Ok(())
}
