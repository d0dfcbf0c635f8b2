//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use eegconn::connectivity::{
    build_ordering, connectivity_matrix, hemisphere_mask, mixed_window_count, pcc, pli, plv, ConnectivityFeature,
    OrderingMethod,
};
use eegconn::dsp::BandName;
use eegconn::experiment::{
    encode_features, read_features, run_cv, segment, segment_bounds, shuffle_trial_labels, write_features, CvConfig,
    FeatureConfig, FeatureExtractor, FeatureKind, FeatureTensor, PlantedCorpus, HOP_S, WINDOW_S,
};
use eegconn::io::{encode_recording, read_recording, synthesize, write_recording, CouplingSpec, ElectrodeLayout, DEAP32_CHANNELS};
use eegconn::nn::{encode_checkpoint, read_checkpoint, write_checkpoint, LayerSpec, Model, ModelKind, ModelSpec, TrainConfig};
use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn names() -> Vec<String> {
    DEAP32_CHANNELS.iter().map(|s| s.to_string()).collect()
}

// ---- 1: estimator oracles ----

/// Exact Pearson correlation of dyadic inputs `k / 1024`: all sums are
/// integers, so only the final square root rounds.
fn pcc_exact(x: &[i64], y: &[i64]) -> f64 {
    let n = x.len() as i128;
    let (sx, sy): (i128, i128) = (x.iter().map(|&v| v as i128).sum(), y.iter().map(|&v| v as i128).sum());
    let sxy: i128 = x.iter().zip(y).map(|(&a, &b)| a as i128 * b as i128).sum();
    let sxx: i128 = x.iter().map(|&a| a as i128 * a as i128).sum();
    let syy: i128 = y.iter().map(|&b| b as i128 * b as i128).sum();
    let num = n * sxy - sx * sy;
    let (dx, dy) = (n * sxx - sx * sx, n * syy - sy * sy);
    num as f64 / ((dx as f64).sqrt() * (dy as f64).sqrt())
}

fn plv_complex_sum(a: &[f64], b: &[f64]) -> f64 {
    let s: Complex<f64> = a.iter().zip(b).map(|(p, q)| Complex::from_polar(1.0, p - q)).sum();
    s.norm() / a.len() as f64
}

fn pli_sine_sign(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| {
            let v = (p - q).sin();
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .sum();
    s.abs() / a.len() as f64
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn estimator_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pi = std::f64::consts::PI;
    let mut worst = [0.0f64; 3];
    for case in 0..1000 {
        let n = rng.random_range(2..=1000);
        let xi: Vec<i64> = (0..n).map(|_| rng.random_range(-(1 << 20)..=(1 << 20))).collect();
        let yi: Vec<i64> = (0..n).map(|_| rng.random_range(-(1 << 20)..=(1 << 20))).collect();
        let x: Vec<f64> = xi.iter().map(|&k| k as f64 / 1024.0).collect();
        let y: Vec<f64> = yi.iter().map(|&k| k as f64 / 1024.0).collect();
        let pa: Vec<f64> = (0..n).map(|_| rng.random_range(-pi..pi)).collect();
        let pb: Vec<f64> = (0..n).map(|_| rng.random_range(-pi..pi)).collect();

        let errs = [
            rel(pcc(&x, &y).map_err(|e| e.to_string())?, pcc_exact(&xi, &yi)),
            rel(plv(&pa, &pb).map_err(|e| e.to_string())?, plv_complex_sum(&pa, &pb)),
            rel(pli(&pa, &pb).map_err(|e| e.to_string())?, pli_sine_sign(&pa, &pb)),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
        ensure(errs.iter().all(|&e| e <= 1e-10), format!("case {case} (n = {n}): relative errors {errs:?}"))?;
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "1000 cases, worst relative error pcc {:.1e} plv {:.1e} pli {:.1e}",
        worst[0], worst[1], worst[2]
    ))
}

// ---- 2: limits of the phase estimators ----

fn phase_limits() -> Outcome {
    let n = 384;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    for lag in [0.5, 1.0, -2.0, 0.3, -0.1] {
        let other: Vec<f64> = base.iter().map(|p| p - lag).collect();
        let v = plv(&base, &other).unwrap();
        let l = pli(&base, &other).unwrap();
        ensure(v == 1.0 && l == 1.0, format!("lag {lag}: plv {v}, pli {l}"))?;
    }
    let same = plv(&base, &base).unwrap();
    ensure(same == 1.0, format!("zero lag plv {same}"))?;
    let zero_pli = pli(&base, &base).unwrap();
    ensure(zero_pli == 0.0, format!("zero lag pli {zero_pli}"))?;

    let zeros = vec![0.0; n];
    let pm: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
    let v = plv(&pm, &zeros).unwrap();
    ensure((v - 0.3f64.cos()).abs() <= 1e-12, format!("+-0.3 plv {v}"))?;
    let l = pli(&pm, &zeros).unwrap();
    ensure(l == 0.0, format!("+-0.3 pli {l}"))?;
    Ok(format!(
        "constant lag plv 1 pli 1; zero lag plv 1 pli 0; +-0.3 plv {v:.15} pli 0"
    ))
}

// ---- 3: segmentation ----

fn segmentation() -> Outcome {
    let bounds = segment_bounds(7680, 384, 64).map_err(|e| e.to_string())?;
    ensure(bounds.len() == 115, format!("{} windows", bounds.len()))?;
    let rec = synthesize(&CouplingSpec::deap32(1.0, 1), 60.0, 128.0).map_err(|e| e.to_string())?;
    let segs = segment(&rec, 0, WINDOW_S, HOP_S).map_err(|e| e.to_string())?;
    ensure(segs.len() == 115, format!("{} segments", segs.len()))?;
    let last = segs.last().unwrap();
    ensure(last.start + 384 == 7680, format!("last window starts at {}", last.start))?;
    Ok("7680 samples -> 115 segments of 384, last ends at sample 7680".into())
}

// ---- 4: gradient check ----

fn small_net(with_relu: bool) -> ModelSpec {
    use LayerSpec::*;
    let mut layers = vec![Conv3x3 { out_channels: 4 }];
    if with_relu {
        layers.push(Relu);
    }
    layers.extend([MaxPool2x2, BatchNorm, Flatten, Dense { units: 8 }]);
    if with_relu {
        layers.push(Relu);
    }
    layers.extend([Dense { units: 2 }, Softmax]);
    ModelSpec { input: (8, 8, 2), layers }
}

fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let cases: [(&str, ModelSpec, usize, Option<usize>); 5] = [
        ("small net", small_net(false), 4, None),
        ("small net with relu", small_net(true), 4, None),
        ("cnn-2 8x8x2", ModelSpec::cnn2((8, 8, 2)), 3, Some(300)),
        ("cnn-5 8x8x2", ModelSpec::cnn5((8, 8, 2)), 3, Some(300)),
        ("cnn-10 32x32x2", ModelSpec::cnn10((32, 32, 2)), 2, Some(12)),
    ];
    let mut summary = Vec::new();
    for (seed, (name, spec, batch, limit)) in cases.into_iter().enumerate() {
        let seed = seed as u64 + 1;
        let (h, w, c) = spec.input;
        let model = Model::<f64>::new(spec, seed).map_err(|e| e.to_string())?;
        let x = common::random_tensor([batch, h, w, c], seed + 100);
        let labels: Vec<usize> = (0..batch).map(|i| (i * 7 + 3) % 2).collect();
        let checks = common::gradient_check(&model, &x, &labels, 1e-5, limit);
        let worst = checks.iter().fold(0.0f64, |m, r| m.max(r.worst));
        if let Some(bad) = checks.iter().find(|r| r.worst >= 1e-4) {
            return Err(format!("{name}: {} relative error {:.1e}", bad.name, bad.worst));
        }
        summary.push(format!("{name} {worst:.0e}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("worst relative error: {}", summary.join(", ")))
}

// ---- 5: permutation equivariance ----

fn permutation_equivariance() -> Outcome {
    let layout = ElectrodeLayout::deap32();
    let dist2 = build_ordering(OrderingMethod::Dist2, &layout).unwrap();
    let names = names();
    let band = BandName::Alpha.def();
    for seed in 0..50u64 {
        let random = build_ordering(OrderingMethod::Random(seed), &layout).unwrap();
        let p = random.relative_to(&dist2).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let sig = Array2::from_shape_fn((32, 384), |_| rng.random_range(-1.0..1.0f64));
        for feature in [ConnectivityFeature::Pcc, ConnectivityFeature::Plv, ConnectivityFeature::Pli] {
            let md = connectivity_matrix(sig.view(), &names, feature, band, &dist2).map_err(|e| e.to_string())?;
            let mr = connectivity_matrix(sig.view(), &names, feature, band, &random).map_err(|e| e.to_string())?;
            let (md, mr) = (md.values(), mr.values());
            for i in 0..32 {
                for j in 0..32 {
                    ensure(
                        mr[[i, j]] == md[[p[i], p[j]]],
                        format!("seed {seed} {}: cell ({i}, {j})", feature.as_str()),
                    )?;
                }
            }
        }
    }
    Ok("50 seeds x {pcc, plv, pli}: M_random == P M_dist2 P^T bit for bit".into())
}

// ---- 6: receptive-field structure ----

const MIXED_WINDOWS_DIST1: usize = 108;
const MIXED_WINDOWS_DIST2: usize = 275;

fn receptive_field_structure() -> Outcome {
    let layout = ElectrodeLayout::deap32();
    let count = |m| mixed_window_count(&hemisphere_mask(&build_ordering(m, &layout).unwrap(), &layout).unwrap());
    let (d1, d2) = (count(OrderingMethod::Dist1), count(OrderingMethod::Dist2));
    ensure(d2 > d1, format!("dist2 {d2} <= dist1 {d1}"))?;
    ensure(
        (d1, d2) == (MIXED_WINDOWS_DIST1, MIXED_WINDOWS_DIST2),
        format!("counts moved: dist1 {d1}, dist2 {d2}"),
    )?;
    Ok(format!("mixed 3x3 windows: dist1 {d1} < dist2 {d2} (of 900)"))
}

// ---- 7 and 8: planted-signal experiment and its null ----

fn features(corpus: &[eegconn::io::EegRecording], kind: FeatureKind) -> Vec<FeatureTensor> {
    let ex = FeatureExtractor::new(FeatureConfig::new(kind, OrderingMethod::Dist2), ElectrodeLayout::deap32()).unwrap();
    corpus
        .iter()
        .enumerate()
        .flat_map(|(t, r)| ex.extract(r, t as i32).unwrap())
        .collect()
}

fn cv_cnn2(records: &[FeatureTensor]) -> (f64, Vec<f64>) {
    let cfg = CvConfig::new(ModelKind::Cnn2, TrainConfig::default(), 0);
    let out = run_cv::<f32>(records, &cfg).unwrap();
    (out.report.mean_accuracy, out.report.folds.iter().map(|f| f.accuracy).collect())
}

fn fmt_folds(f: &[f64]) -> String {
    f.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join("/")
}

fn planted_signal(plv_features: &mut Option<Vec<FeatureTensor>>) -> Outcome {
    let corpus = PlantedCorpus::default();
    ensure(
        (corpus.n_trials, corpus.duration_s) == (40, 60.0),
        "default planted corpus is not 40 x 60 s",
    )?;
    let recs = corpus.generate().map_err(|e| e.to_string())?;
    let plv = features(&recs, FeatureKind::Plv);
    let (plv_acc, plv_folds) = cv_cnn2(&plv);
    *plv_features = Some(plv);
    let psd = features(&recs, FeatureKind::Psd);
    let (psd_acc, psd_folds) = cv_cnn2(&psd);
    let msg = format!(
        "CNN-2 5-fold CV: plv/dist2 {plv_acc:.3} ({}), psd {psd_acc:.3} ({})",
        fmt_folds(&plv_folds),
        fmt_folds(&psd_folds)
    );
    ensure(plv_acc >= 0.90 && psd_acc <= 0.65, msg.clone())?;
    Ok(msg)
}

const NULL_SHUFFLE_SEED: u64 = 1;

fn null_experiment(plv_features: &Option<Vec<FeatureTensor>>) -> Outcome {
    let plv = match plv_features {
        Some(f) => f.clone(),
        None => features(&PlantedCorpus::default().generate().map_err(|e| e.to_string())?, FeatureKind::Plv),
    };
    let shuffled = shuffle_trial_labels(&plv, NULL_SHUFFLE_SEED).map_err(|e| e.to_string())?;
    let (acc, folds) = cv_cnn2(&shuffled);
    let msg = format!("shuffled-label CV accuracy {acc:.3} ({})", fmt_folds(&folds));
    ensure((acc - 0.5).abs() <= 0.05, msg.clone())?;
    Ok(msg)
}

// ---- 9: determinism ----

fn determinism() -> Outcome {
    let corpus = PlantedCorpus {
        n_trials: 10,
        duration_s: 10.0,
        ..PlantedCorpus::default()
    };
    let recs = features(&corpus.generate().map_err(|e| e.to_string())?, FeatureKind::Plv);
    let train = TrainConfig {
        epochs: 2,
        batch_size: 32,
        seed: 5,
        ..TrainConfig::default()
    };
    let cfg = CvConfig::new(ModelKind::Cnn2, train, 9);
    let a = run_cv::<f64>(&recs, &cfg).map_err(|e| e.to_string())?;
    let b = run_cv::<f64>(&recs, &cfg).map_err(|e| e.to_string())?;
    ensure(a.report == b.report, "reports differ")?;
    for (k, (ma, mb)) in a.models.iter().zip(&b.models).enumerate() {
        ensure(encode_checkpoint(ma) == encode_checkpoint(mb), format!("fold {k} checkpoints differ"))?;
    }
    let accs: Vec<f64> = a.report.folds.iter().map(|f| f.accuracy).collect();
    Ok(format!(
        "two f64 runs: identical reports (fold accuracies {}) and {} byte-identical checkpoints",
        fmt_folds(&accs),
        a.models.len()
    ))
}

// ---- 10: format round trips ----

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let err = |e: eegconn::Error| e.to_string();

    let rec = synthesize(&CouplingSpec::deap32(2.0, 4), 60.0, 128.0).map_err(err)?;
    let (p1, p2) = (dir.path().join("a.eegb"), dir.path().join("b.eegb"));
    write_recording(&rec, &p1).map_err(err)?;
    write_recording(&read_recording(&p1).map_err(err)?, &p2).map_err(err)?;
    let eegb = std::fs::read(&p1).unwrap();
    ensure(eegb == std::fs::read(&p2).unwrap(), "EEGB bytes differ")?;
    ensure(eegb == encode_recording(&rec), "EEGB file differs from encoder output")?;

    let short = synthesize(&CouplingSpec::deap32(2.0, 5), 8.0, 128.0).map_err(err)?;
    let mut tensors = Vec::new();
    for kind in [FeatureKind::Psd, FeatureKind::Pli] {
        let ex = FeatureExtractor::new(FeatureConfig::new(kind, OrderingMethod::Dist1), ElectrodeLayout::deap32()).map_err(err)?;
        tensors.extend(ex.extract(&short, 3).map_err(err)?);
    }
    let dims = tensors[0].dims;
    let (f1, f2) = (dir.path().join("a.ftns"), dir.path().join("b.ftns"));
    write_features(&f1, dims, &tensors).map_err(err)?;
    let (d, back) = read_features(&f1).map_err(err)?;
    write_features(&f2, d, &back).map_err(err)?;
    let ftns = std::fs::read(&f1).unwrap();
    ensure(ftns == std::fs::read(&f2).unwrap(), "FTNS bytes differ")?;
    ensure(ftns == encode_features(dims, &tensors).map_err(err)?, "FTNS file differs from encoder output")?;

    let mut cnnm_sizes = Vec::new();
    for (i, spec) in [ModelSpec::cnn2((32, 32, 10)), ModelSpec::cnn5((32, 32, 10)), ModelSpec::cnn10((32, 32, 10))]
        .into_iter()
        .enumerate()
    {
        let (c1, c2) = (dir.path().join(format!("{i}a.cnnm")), dir.path().join(format!("{i}b.cnnm")));
        let m32 = Model::<f32>::new(spec.clone(), i as u64).map_err(err)?;
        write_checkpoint(&m32, &c1).map_err(err)?;
        write_checkpoint(&read_checkpoint::<f32>(&c1).map_err(err)?, &c2).map_err(err)?;
        let bytes = std::fs::read(&c1).unwrap();
        ensure(bytes == std::fs::read(&c2).unwrap(), format!("CNNM f32 model {i} bytes differ"))?;
        let m64 = Model::<f64>::new(spec, i as u64).map_err(err)?;
        write_checkpoint(&m64, &c1).map_err(err)?;
        write_checkpoint(&read_checkpoint::<f64>(&c1).map_err(err)?, &c2).map_err(err)?;
        ensure(std::fs::read(&c1).unwrap() == std::fs::read(&c2).unwrap(), format!("CNNM f64 model {i} bytes differ"))?;
        cnnm_sizes.push(bytes.len());
    }
    Ok(format!(
        "EEGB {} bytes, FTNS {} tensors / {} bytes, CNNM f32+f64 for cnn-2/5/10 ({:?} bytes in f32)",
        eegb.len(),
        tensors.len(),
        ftns.len(),
        cnnm_sizes
    ))
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let mut plv_features = None;
    let mut failed = 0;
    let mut run = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} [PASS] {title}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} [FAIL] {title}: {detail} ({secs:.1}s)");
            }
        }
    };
    run(1, "estimator oracles", &mut estimator_oracles);
    run(2, "phase estimator limits", &mut phase_limits);
    run(3, "segmentation arithmetic", &mut segmentation);
    run(4, "gradient check", &mut gradient_check);
    run(5, "permutation equivariance", &mut permutation_equivariance);
    run(6, "receptive-field structure", &mut receptive_field_structure);
    run(7, "planted-signal surrogate", &mut || planted_signal(&mut plv_features));
    run(8, "shuffled-label null", &mut || null_experiment(&plv_features));
    run(9, "determinism", &mut determinism);
    run(10, "format round trips", &mut format_round_trips);
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
