#![allow(dead_code)]

use std::path::PathBuf;

use iqals::dataset::{self, Cifar10, TestSets};
use iqals::nn::{Architecture, LrnParams, ModelParams, TrainingConfig};
use iqals::rng;
use iqals::trainer::{self, EvalReport, Strategy, TrainOptions};
use iqals::Image;

pub fn random_image(seed: u64) -> Image {
    let mut r = rng::rng(seed);
    let bytes: Vec<u8> = (0..iqals::image::IMAGE_BYTES)
        .map(|_| rng::below(&mut r, 256) as u8)
        .collect();
    Image::from_planes(&bytes).unwrap()
}

/// A 32x32 network small enough for CI-scale training runs.
pub fn small_arch() -> Architecture {
    Architecture {
        input_side: 32,
        input_channels: 3,
        conv_channels: 8,
        kernel: 5,
        fc1: 32,
        fc2: 16,
        classes: 10,
        lrn: LrnParams::default(),
    }
}

/// SSIM written out window by window: Gaussian weights from the formula,
/// Rec. 601 luma, 8-bit constants, every valid 11x11 placement.
pub fn brute_force_ssim(a: &Image, b: &Image) -> f64 {
    const N: usize = 32;
    const W: usize = 11;
    let luma = |img: &Image| -> Vec<f64> {
        (0..N * N)
            .map(|i| {
                let (r, g, bl) = (img.planes()[i], img.planes()[N * N + i], img.planes()[2 * N * N + i]);
                0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(bl)
            })
            .collect()
    };
    let (x, y) = (luma(a), luma(b));
    let mut weights = [[0.0f64; W]; W];
    let mut total = 0.0;
    for (u, row) in weights.iter_mut().enumerate() {
        for (v, w) in row.iter_mut().enumerate() {
            let (du, dv) = (u as f64 - 5.0, v as f64 - 5.0);
            *w = (-(du * du + dv * dv) / (2.0 * 1.5 * 1.5)).exp();
            total += *w;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut sum = 0.0;
    let positions = N - W + 1;
    for r0 in 0..positions {
        for c0 in 0..positions {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for u in 0..W {
                for v in 0..W {
                    let w = weights[u][v] / total;
                    let (p, q) = (x[(r0 + u) * N + c0 + v], y[(r0 + u) * N + c0 + v]);
                    mx += w * p;
                    my += w * q;
                    xx += w * p * p;
                    yy += w * q * q;
                    xy += w * p * q;
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    sum / (positions * positions) as f64
}

/// Worst relative error between analytic and central-difference gradients
/// over `indices`.
pub fn worst_relative_error(
    v: &[f64],
    analytic: &[f64],
    indices: &[usize],
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    const H: f64 = 1e-6;
    const FLOOR: f64 = 1e-6;
    let mut probe = v.to_vec();
    let mut worst = 0.0f64;
    for &i in indices {
        probe[i] = v[i] + H;
        let up = f(&probe);
        probe[i] = v[i] - H;
        let down = f(&probe);
        probe[i] = v[i];
        let numeric = (up - down) / (2.0 * H);
        let rel = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}

/// Up to `k` distinct indices below `n`, seeded.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut all, &mut rng::rng(seed));
    all.truncate(k);
    all.sort_unstable();
    all
}

pub fn randn(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::Normals::new(seed);
    (0..n).map(|_| r.next()).collect()
}

/// Full-CIFAR experiments: 100 epochs, decay every 17, the Table-1
/// network. Runs resume from checkpoints under `IQALS_DESK_OUT`
/// (default `target/desk-scale`), so an interrupted suite continues.
pub struct Desk {
    pub data: Cifar10,
    pub sets: TestSets,
    pub out: PathBuf,
}

pub const DESK_ENV: &str = "IQALS_DESK";

pub fn desk_enabled() -> bool {
    std::env::var_os(DESK_ENV).is_some()
}

impl Desk {
    pub fn open() -> Result<Desk, String> {
        let path = std::env::var_os("IQALS_DATA")
            .ok_or("IQALS_DATA must point at the extracted CIFAR-10 binary batches")?;
        let data = dataset::load_cifar10(std::path::Path::new(&path)).map_err(|e| e.to_string())?;
        if data.train.len() != 50_000 || data.test.len() != 10_000 {
            return Err(format!(
                "expected the full archive (50000/10000), found {}/{}",
                data.train.len(),
                data.test.len()
            ));
        }
        let sets = dataset::build_test_sets(&data.test, dataset::TEST_SET_SEED).map_err(|e| e.to_string())?;
        let out = std::env::var_os("IQALS_DESK_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/desk-scale"));
        Ok(Desk { data, sets, out })
    }

    pub fn model(&self, strategy: u8, seed: u64) -> Result<ModelParams<f32>, String> {
        let config = TrainingConfig {
            seed,
            ..TrainingConfig::desk_scale()
        };
        let opts = TrainOptions {
            out_dir: Some(self.out.join(format!("strategy-{strategy}-seed-{seed}"))),
            resume: true,
        };
        let s = Strategy::from_id(strategy).map_err(|e| e.to_string())?;
        trainer::train(s, &config, &Architecture::table1(), &self.data.train, &opts)
            .map(|o| o.params)
            .map_err(|e| e.to_string())
    }

    pub fn eval(&self, strategy: u8, seed: u64, probe: usize) -> Result<EvalReport, String> {
        let params = self.model(strategy, seed)?;
        let probe: Vec<usize> = (0..probe).collect();
        trainer::evaluate(&params, &self.sets, &probe).map_err(|e| e.to_string())
    }
}
