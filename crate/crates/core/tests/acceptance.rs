//! Acceptance criteria, one line each. Criteria 8-11 need the real
//! CIFAR-10 archive and many CPU-hours; they run only with `IQALS_DESK=1`
//! and `IQALS_DATA` set, and report NOT RUN otherwise.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use iqals::dataset::{self, synthetic, MixturePlan, TestSetId};
use iqals::distort::{self, DistortionKind, DistortionSpec, StandardDistorter};
use iqals::nn::{self, layers, Architecture, LossKind, ModelParams, Tensor, TrainingConfig};
use iqals::trainer::{self, Strategy, TrainOptions};
use iqals::{iqa, rng, Image};

use common::*;

const SELF_IDENTITY_TOL: f64 = 1e-9;
const SSIM_ORACLE_TOL: f64 = 1e-6;
const LABEL_SUM_TOL: f64 = 1e-9;
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_SAMPLES: usize = 200;
const BLUR_ORACLE_TOL: f64 = 1e-6;
const NOISE_VAR_REL_TOL: f64 = 0.05;
const NOISE_MIN_SAMPLES: usize = 1_000_000;

const BASELINE_MIN_PRISTINE: f64 = 0.70;
const BASELINE_MIN_BLUR3_GAP: f64 = 0.20;
const AUG_MAX_OWN_GAP: f64 = 0.05;
const AUG_MIN_GAIN: f64 = 0.05;
const RECOVERY_MARGIN_S3: f64 = 0.005;
const RECOVERY_MARGIN_S9: f64 = 0.01;
const DESK_SEEDS: [u64; 3] = [0, 1, 2];
const CONFIDENCE_PROBE: usize = 100;

enum Verdict {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn pass_if(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn ssim_self_identity() -> Verdict {
    let worst = (0..100u64)
        .map(|s| {
            let x = random_image(1000 + s);
            (iqa::ssim(&x, &x).unwrap().raw - 1.0).abs()
        })
        .fold(0.0, f64::max);
    pass_if(worst <= SELF_IDENTITY_TOL, format!("100 images, max |raw - 1| = {worst:.2e}"))
}

fn ssim_oracle() -> Verdict {
    let pristine = synthetic::samples(20, 77);
    let mut worst = 0.0f64;
    for (i, s) in pristine.iter().enumerate() {
        let kind = DistortionKind::ALL[i % 3];
        let spec = DistortionSpec::at_level(kind, (i % 3) as u8 + 1).unwrap();
        let d = distort::apply(&spec, &s.image, i as u64).unwrap();
        let ours = iqa::ssim(&s.image, &d).unwrap().raw;
        worst = worst.max((ours - brute_force_ssim(&s.image, &d)).abs());
    }
    pass_if(worst <= SSIM_ORACLE_TOL, format!("20 pairs, max |diff| = {worst:.2e}"))
}

fn smoothing_validity() -> Verdict {
    let mut r = rng::rng(31);
    let mut worst = 0.0f64;
    let mut min_entry = f64::INFINITY;
    for _ in 0..1000 {
        let y = rng::below(&mut r, 10) as usize;
        let s = rng::uniform_open0(&mut r).max(1e-6);
        let s = if s == 1.0 { 0.5 } else { s };
        let q = nn::smooth_labels(y, s, 10).unwrap();
        worst = worst.max((q.probs().iter().sum::<f64>() - 1.0).abs());
        min_entry = q.probs().iter().copied().fold(min_entry, f64::min);
    }
    let onehot_ok = (0..10).all(|y| nn::smooth_labels(y, 1.0, 10).unwrap() == nn::onehot(y, 10).unwrap());
    pass_if(
        worst <= LABEL_SUM_TOL && min_entry > 0.0 && onehot_ok,
        format!("1000 draws, max |sum - 1| = {worst:.2e}, min entry = {min_entry:.3e}, s = 1 one-hot: {onehot_ok}"),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient_checks() -> Verdict {
    let mut results: Vec<(&str, f64)> = Vec::new();
    let pick = |n: usize, seed: u64| sample_indices(n, GRAD_SAMPLES, seed);

    let cs = layers::ConvShape { batch: 2, height: 8, width: 8, in_ch: 3, out_ch: 4, kernel: 5 };
    let (x, w, b, r) = (randn(cs.input_len(), 1), randn(cs.weight_len(), 2), randn(4, 3), randn(cs.output_len(), 4));
    let g = layers::conv2d_backward(&x, &w, &r, &cs, true);
    let e = worst_relative_error(&w, &g.weights, &pick(w.len(), 5), |w| dot(&r, &layers::conv2d_forward(&x, w, &b, &cs)))
        .max(worst_relative_error(&b, &g.bias, &pick(4, 6), |b| dot(&r, &layers::conv2d_forward(&x, &w, b, &cs))))
        .max(worst_relative_error(&x, g.input.as_ref().unwrap(), &pick(x.len(), 7), |x| {
            dot(&r, &layers::conv2d_forward(x, &w, &b, &cs))
        }));
    results.push(("conv", e));

    let ps = layers::PoolShape { batch: 2, height: 8, width: 8, channels: 4, window: 3, stride: 2 };
    let x = randn(2 * 8 * 8 * 4, 8);
    let r = randn(ps.output_len(), 9);
    let (_, idx) = layers::maxpool_forward(&x, &ps);
    let gx = layers::maxpool_backward(&r, &idx, x.len());
    results.push((
        "maxpool",
        worst_relative_error(&x, &gx, &pick(x.len(), 10), |x| dot(&r, &layers::maxpool_forward(x, &ps).0)),
    ));

    let lp = layers::LrnParams::default();
    let x: Vec<f64> = randn(3 * 16, 11).iter().map(|v| v * 3.0).collect();
    let r = randn(x.len(), 12);
    let (_, scale) = layers::lrn_forward(&x, 16, &lp);
    let gx = layers::lrn_backward(&x, &scale, &r, 16, &lp);
    results.push((
        "lrn",
        worst_relative_error(&x, &gx, &pick(x.len(), 13), |x| dot(&r, &layers::lrn_forward(x, 16, &lp).0)),
    ));

    let x = randn(300, 14);
    let r = randn(300, 15);
    let relu = |x: &[f64]| {
        let mut y = x.to_vec();
        layers::relu_inplace(&mut y);
        y
    };
    let mut gx = r.clone();
    layers::relu_backward_inplace(&mut gx, &relu(&x));
    results.push(("relu", worst_relative_error(&x, &gx, &pick(300, 16), |x| dot(&r, &relu(x)))));

    let (n, i, o) = (3, 30, 20);
    let (x, w, b, r) = (randn(n * i, 17), randn(i * o, 18), randn(o, 19), randn(n * o, 20));
    let g = layers::dense_backward(&x, &w, &r, n, i, o, true);
    let e = worst_relative_error(&w, &g.weights, &pick(w.len(), 21), |w| dot(&r, &layers::dense_forward(&x, w, &b, n, i, o)))
        .max(worst_relative_error(&b, &g.bias, &pick(o, 22), |b| dot(&r, &layers::dense_forward(&x, &w, b, n, i, o))))
        .max(worst_relative_error(&x, g.input.as_ref().unwrap(), &pick(x.len(), 23), |x| {
            dot(&r, &layers::dense_forward(x, &w, &b, n, i, o))
        }));
    results.push(("dense", e));

    let z = randn(4 * 10, 24);
    let r = randn(40, 25);
    let p = layers::softmax_rows(&z, 10);
    let gz = layers::softmax_backward(&p, &r, 10);
    results.push(("softmax", worst_relative_error(&z, &gz, &pick(40, 26), |z| dot(&r, &layers::softmax_rows(z, 10)))));

    let arch = Architecture::tiny();
    let mut params = ModelParams::<f64>::init(&arch, 3);
    let mut normals = rng::Normals::new(27);
    for (_, t) in params.tensors_mut() {
        for v in t.data_mut() {
            *v = 0.5 * normals.next();
        }
    }
    let batch = Tensor::new(&[3, 4, 4, 2], randn(3 * 32, 28)).unwrap();
    let targets = vec![
        nn::smooth_labels(1, 0.62, 10).unwrap(),
        nn::onehot(4, 10).unwrap(),
        nn::smooth_labels(9, 0.3, 10).unwrap(),
    ];
    for (kind, label) in [(LossKind::SquaredError, "network (squared error)"), (LossKind::CrossEntropy, "network (cross entropy)")] {
        let pass = nn::forward(&params, &batch).unwrap();
        let (grads, _) = nn::backward(&params, &pass.cache, &targets, kind, 0.004).unwrap();
        let mut worst = 0.0f64;
        for (t, (name, gt)) in grads.tensors().into_iter().enumerate() {
            let base = params.tensors()[t].1.data().to_vec();
            let idx = pick(base.len(), 30 + t as u64);
            let e = worst_relative_error(&base, gt.data(), &idx, |v| {
                let mut p = params.clone();
                p.tensors_mut()[t].1.data_mut().copy_from_slice(v);
                nn::batch_loss(&p, &batch, &targets, kind, 0.004).unwrap()
            });
            assert!(e.is_finite(), "{name}");
            worst = worst.max(e);
        }
        results.push((label, worst));
    }

    let worst = results.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let detail = results.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    pass_if(worst < GRAD_REL_TOL, format!("worst relative error per check: {detail}"))
}

fn table1_shapes() -> Verdict {
    let arch = Architecture::table1();
    let params = ModelParams::<f32>::init(&arch, 0);
    let x = Tensor::new(&[1, 32, 32, 3], vec![0.5f32; 3072]).unwrap();
    let pass = nn::forward(&params, &x).unwrap();
    let render = |dims: &[usize]| {
        dims[1..].iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    };
    let expected = [
        ("conv1", "32x32x64"),
        ("pool1", "16x16x64"),
        ("lrn1", "16x16x64"),
        ("conv2", "16x16x64"),
        ("lrn2", "16x16x64"),
        ("pool2", "8x8x64"),
        ("flatten", "4096"),
        ("fc1", "384"),
        ("fc2", "192"),
        ("softmax", "10"),
    ];
    let got: Vec<(String, String)> = pass.cache.shapes().iter().map(|(n, d)| (n.to_string(), render(d))).collect();
    let ok = got.len() == expected.len() && got.iter().zip(expected).all(|((n, d), (en, ed))| n == en && d == ed);
    let summary = got.iter().map(|(n, d)| format!("{n} {d}")).collect::<Vec<_>>().join(", ");
    pass_if(ok, summary)
}

fn determinism() -> Verdict {
    let run = || -> Vec<(String, Vec<u8>)> {
        let tmp = tempfile::tempdir().unwrap();
        let raw = tmp.path().join("raw");
        synthetic::write_cifar_dir(&raw, 200, 40, 5).unwrap();
        let data = dataset::load_cifar10(&raw).unwrap();
        let sets = dataset::build_test_sets(&data.test, 11).unwrap();
        dataset::write_test_sets(&tmp.path().join("sets"), &sets).unwrap();
        let plan = MixturePlan::new(3, DistortionKind::ALL.to_vec());
        let mixed = dataset::build_epoch_mixture(&data.train, &plan, &StandardDistorter, 0).unwrap();
        dataset::write_manifest(&tmp.path().join("mixture.jsonl"), &mixed).unwrap();
        let config = TrainingConfig {
            batch_size: 20,
            epochs: 1,
            checkpoint_every: 1,
            seed: 8,
            ..TrainingConfig::desk_scale()
        };
        let out = trainer::train(
            Strategy::from_id(9).unwrap(),
            &config,
            &small_arch(),
            &data.train,
            &TrainOptions { out_dir: Some(tmp.path().join("ckpt")), resume: false },
        )
        .unwrap();
        let report = trainer::evaluate(&out.params, &sets, &[0, 1, 2]).unwrap();
        std::fs::write(tmp.path().join("eval.tsv"), report.to_text(&[])).unwrap();
        report.write_predictions(&tmp.path().join("predictions.jsonl")).unwrap();

        let mut files = Vec::new();
        for entry in walk(tmp.path()) {
            if entry.starts_with(&raw) {
                continue;
            }
            let rel = entry.strip_prefix(tmp.path()).unwrap().display().to_string();
            files.push((rel, std::fs::read(&entry).unwrap()));
        }
        files.sort();
        files
    };
    let (a, b) = (run(), run());
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let has = |suffix: &str| names.iter().any(|n| n.ends_with(suffix));
    let complete = has(".jsonl") && has(".ckpt") && has("eval.tsv") && has("index.json");
    pass_if(
        a == b && complete,
        format!("{} artifacts (manifests, checkpoint, reports) byte-identical across two runs: {}", a.len(), a == b),
    )
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn psnr(a: &Image, b: &Image) -> f64 {
    let mse = a
        .planes()
        .iter()
        .zip(b.planes())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / a.planes().len() as f64;
    10.0 * (255.0f64 * 255.0 / mse.max(1e-12)).log10()
}

fn distortion_oracles() -> Verdict {
    // Blur: impulse through the separable filter against a dense 2-D sum.
    let side = 32usize;
    let mut plane = vec![0.0f64; side * side];
    plane[16 * side + 16] = 255.0;
    let sigma = 1.0f64;
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum::<f64>().powi(2);
    let reflect = |i: isize| -> usize {
        let n = side as isize;
        let mut i = i;
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        i as usize
    };
    let ours = distort::blur_plane(&plane, side, side, sigma).unwrap();
    let mut blur_err = 0.0f64;
    for r in 0..side as isize {
        for c in 0..side as isize {
            let mut acc = 0.0;
            for (i, dy) in (-radius..=radius).enumerate() {
                for (j, dx) in (-radius..=radius).enumerate() {
                    acc += taps[i] * taps[j] / norm * plane[reflect(r + dy) * side + reflect(c + dx)];
                }
            }
            blur_err = blur_err.max((acc - ours[r as usize * side + c as usize]).abs());
        }
    }

    // Noise: empirical variance on mid-gray images.
    let gray = Image::filled([128, 128, 128]);
    let images = NOISE_MIN_SAMPLES.div_ceil(iqals::image::IMAGE_BYTES);
    let (mut n, mut sum, mut sq) = (0usize, 0.0f64, 0.0f64);
    for s in 0..images as u64 {
        let noisy = distort::add_gaussian_noise(&gray, 0.01, s).unwrap();
        for &v in noisy.planes() {
            let d = f64::from(v) / 255.0 - 128.0 / 255.0;
            n += 1;
            sum += d;
            sq += d * d;
        }
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    let noise_rel = (var - 0.01).abs() / 0.01;

    // JPEG: mean PSNR across quality factors.
    let sample = synthetic::samples(100, 404);
    let mean_psnr: Vec<f64> = distort::JPEG_QUALITIES
        .iter()
        .map(|&q| {
            sample
                .iter()
                .map(|s| psnr(&s.image, &distort::jpeg_roundtrip(&s.image, q).unwrap()))
                .sum::<f64>()
                / sample.len() as f64
        })
        .collect();
    let jpeg_ok = mean_psnr.windows(2).all(|w| w[0] > w[1]);

    pass_if(
        blur_err <= BLUR_ORACLE_TOL && n >= NOISE_MIN_SAMPLES && noise_rel <= NOISE_VAR_REL_TOL && jpeg_ok,
        format!(
            "blur max |diff| {blur_err:.1e}; noise var {var:.5} over {n} samples ({:.2}% off); JPEG mean PSNR Q12/8/4 = {:.2}/{:.2}/{:.2} dB",
            noise_rel * 100.0,
            mean_psnr[0],
            mean_psnr[1],
            mean_psnr[2]
        ),
    )
}

fn desk<F: FnOnce(&Desk) -> Result<Verdict, String>>(f: F) -> Verdict {
    if !desk_enabled() {
        return Verdict::NotRun(format!(
            "needs the CIFAR-10 archive and roughly 8 single-core CPU-hours per 100-epoch run; set {DESK_ENV}=1 and IQALS_DATA"
        ));
    }
    match Desk::open().and_then(|d| f(&d)) {
        Ok(v) => v,
        Err(e) => Verdict::Fail(e),
    }
}

fn acc(r: &trainer::EvalReport, id: TestSetId) -> f64 {
    r.accuracy(id).unwrap()
}

const BLUR1: TestSetId = TestSetId::Distorted(DistortionKind::Blur, 1);
const BLUR3: TestSetId = TestSetId::Distorted(DistortionKind::Blur, 3);

fn baseline_fragility() -> Verdict {
    desk(|d| {
        let r = d.eval(1, 0, 0)?;
        let (p, b3) = (acc(&r, TestSetId::Pristine), acc(&r, BLUR3));
        Ok(pass_if(
            p >= BASELINE_MIN_PRISTINE && p - b3 >= BASELINE_MIN_BLUR3_GAP,
            format!("strategy 1 pristine {p:.4}, blur-3 {b3:.4}, gap {:.4}", p - b3),
        ))
    })
}

fn augmentation_robustness() -> Verdict {
    desk(|d| {
        let (r1, r2) = (d.eval(1, 0, 0)?, d.eval(2, 0, 0)?);
        let (p2, b2, b1) = (acc(&r2, TestSetId::Pristine), acc(&r2, BLUR1), acc(&r1, BLUR1));
        Ok(pass_if(
            (p2 - b2).abs() <= AUG_MAX_OWN_GAP && b2 - b1 >= AUG_MIN_GAIN,
            format!("strategy 2 pristine {p2:.4} blur-1 {b2:.4}; strategy 1 blur-1 {b1:.4}"),
        ))
    })
}

fn pristine_recovery() -> Verdict {
    desk(|d| {
        let mean = |s: u8| -> Result<f64, String> {
            let mut t = 0.0;
            for seed in DESK_SEEDS {
                t += acc(&d.eval(s, seed, 0)?, TestSetId::Pristine);
            }
            Ok(t / DESK_SEEDS.len() as f64)
        };
        let (m2, m3, m8, m9) = (mean(2)?, mean(3)?, mean(8)?, mean(9)?);
        Ok(pass_if(
            m3 >= m2 - RECOVERY_MARGIN_S3 && m9 >= m8 - RECOVERY_MARGIN_S9,
            format!("mean pristine over 3 seeds: s2 {m2:.4} s3 {m3:.4}; s8 {m8:.4} s9 {m9:.4}"),
        ))
    })
}

fn confidence_behaviour() -> Verdict {
    desk(|d| {
        let r = d.eval(3, 0, CONFIDENCE_PROBE)?;
        let mean_at = |level: u8| {
            let v: Vec<f64> = r
                .confidences
                .iter()
                .filter(|c| c.level == level && (level == 0 || c.kind == Some(DistortionKind::Blur)))
                .map(|c| c.confidence)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let m: Vec<f64> = (0..=3).map(mean_at).collect();
        Ok(pass_if(
            m.windows(2).all(|w| w[0] > w[1]),
            format!("strategy 3 mean true-class confidence, blur levels 0-3: {:.4} {:.4} {:.4} {:.4}", m[0], m[1], m[2], m[3]),
        ))
    })
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("SSIM self-identity", ssim_self_identity),
        ("SSIM matches brute-force oracle", ssim_oracle),
        ("quality-smoothed labels are distributions", smoothing_validity),
        ("finite-difference gradient checks", gradient_checks),
        ("Table 1 intermediate shapes", table1_shapes),
        ("byte-identical reruns", determinism),
        ("distortion oracles", distortion_oracles),
        ("baseline fragility under blur", baseline_fragility),
        ("blur augmentation robustness", augmentation_robustness),
        ("quality smoothing recovers pristine accuracy", pristine_recovery),
        ("confidence falls with blur level", confidence_behaviour),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && f != &id.to_string() {
                continue;
            }
        }
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::NotRun(d) => ("NOT RUN", d),
        };
        println!("criterion {id:>2} {tag:<7} {name}: {detail}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
