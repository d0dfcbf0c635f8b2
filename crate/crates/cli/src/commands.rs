use std::fs;
use std::path::{Path, PathBuf};

use eegconn::experiment::{
    encode_features, read_features, run_cv, ChannelStats, FeatureExtractor, FeatureKind, FeatureTensor,
};
use eegconn::io::{encode_recording, read_recording, ElectrodeLayout};
use eegconn::nn::{
    dump_first_layer_weights, encode_checkpoint, evaluate, read_checkpoint, train, Dataset, KernelGrid, ModelSpec,
    TrainHistory,
};
use eegconn::Real;
use serde::Serialize;

use crate::config::{PipelineConfig, Precision};
use crate::error::CliError;
use crate::output::{sha256_hex, write_bytes, write_json, write_report, OutputLock};
use crate::pgm::write_pgm;

#[derive(Serialize)]
struct TrialEntry {
    file: String,
    sha256: String,
    subject_id: i32,
    video_id: i32,
    valence_score: f64,
    label: u8,
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    synth: &'a eegconn::experiment::PlantedCorpus,
    trials: Vec<TrialEntry>,
}

/// Writes the planted corpus as EEGB files plus a manifest.
pub fn synth(cfg: &PipelineConfig) -> Result<(), CliError> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let dir = cfg.trials_dir();
    fs::create_dir_all(&dir)?;
    let mut trials = Vec::with_capacity(cfg.synth.n_trials);
    for t in 0..cfg.synth.n_trials {
        let rec = cfg.synth.trial(t)?;
        let bytes = encode_recording(&rec);
        let file = format!("trial_{t:03}.eegb");
        write_bytes(&dir.join(&file), &bytes)?;
        let meta = rec.meta();
        trials.push(TrialEntry {
            file,
            sha256: sha256_hex(&bytes),
            subject_id: meta.subject_id,
            video_id: meta.video_id,
            valence_score: meta.valence_score,
            label: cfg.synth.label(t),
        });
    }
    let manifest = cfg.output_dir.join("manifest.json");
    write_json(
        &manifest,
        &SynthManifest {
            synth: &cfg.synth,
            trials,
        },
    )?;
    println!(
        "wrote {} trials to {} and {}",
        cfg.synth.n_trials,
        dir.display(),
        manifest.display()
    );
    Ok(())
}

/// Expands directories into their `*.eegb` files, sorted by name.
fn resolve_inputs(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let roots = if cfg.inputs.is_empty() {
        vec![cfg.trials_dir()]
    } else {
        cfg.inputs.clone()
    };
    let mut out = Vec::new();
    for root in roots {
        if root.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&root)
                .map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "eegb"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(root);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no input recordings found".into()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct InputSummary {
    file: String,
    trial: i32,
    label: u8,
    windows: usize,
}

#[derive(Serialize)]
struct FeaturesResult {
    features_file: String,
    sha256: String,
    records: usize,
    dims: (usize, usize, usize),
    ordering: Vec<String>,
    inputs: Vec<InputSummary>,
}

/// Segments every input and writes one FTNS file.
pub fn features(cfg: &PipelineConfig) -> Result<(), CliError> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    if cfg.feature == FeatureKind::Psd && cfg.ordering.is_some() {
        eprintln!("warning: ordering applies to connectivity features only; ignored for psd");
    }
    let inputs = resolve_inputs(cfg)?;
    let ex = FeatureExtractor::new(cfg.feature_config(), ElectrodeLayout::deap32())?;
    let mut records: Vec<FeatureTensor> = Vec::new();
    let mut summary = Vec::with_capacity(inputs.len());
    for (t, path) in inputs.iter().enumerate() {
        let rec = read_recording(path).map_err(|e| with_path(e, path))?;
        let ts = ex.extract(&rec, t as i32).map_err(|e| with_path(e, path))?;
        summary.push(InputSummary {
            file: path.display().to_string(),
            trial: t as i32,
            label: ts[0].label,
            windows: ts.len(),
        });
        records.extend(ts);
    }
    let bytes = encode_features(ex.dims(), &records)?;
    let path = cfg.features_file();
    write_bytes(&path, &bytes)?;
    let ordering = if cfg.feature == FeatureKind::Psd {
        Vec::new()
    } else {
        ex.ordering().names().to_vec()
    };
    println!("wrote {} tensors of shape {:?} to {}", records.len(), ex.dims(), path.display());
    write_report(
        &cfg.output_dir.join("features_report.json"),
        "features",
        cfg,
        FeaturesResult {
            features_file: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            records: records.len(),
            dims: ex.dims(),
            ordering,
            inputs: summary,
        },
    )
}

fn with_path(e: eegconn::Error, path: &Path) -> CliError {
    let c = CliError::from(e);
    match c {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        CliError::Numeric(m) => CliError::Numeric(format!("{}: {m}", path.display())),
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
    }
}

fn load_features(cfg: &PipelineConfig) -> Result<Vec<FeatureTensor>, CliError> {
    let path = cfg.features_file();
    let (_, records) = read_features(&path).map_err(|e| with_path(e, &path))?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{} holds no tensors", path.display())));
    }
    Ok(records)
}

#[derive(Serialize)]
struct TrainResult {
    checkpoint: String,
    sha256: String,
    records: usize,
    train_loss: f64,
    train_accuracy: f64,
    standardization: ChannelStats,
    history: TrainHistory,
}

/// Trains one model on every tensor of the feature file.
pub fn train_cmd(cfg: &PipelineConfig) -> Result<(), CliError> {
    match cfg.precision {
        Precision::F32 => train_typed::<f32>(cfg),
        Precision::F64 => train_typed::<f64>(cfg),
    }
}

fn train_typed<T: Real>(cfg: &PipelineConfig) -> Result<(), CliError> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let records = load_features(cfg)?;
    let refs: Vec<&FeatureTensor> = records.iter().collect();
    let stats = ChannelStats::fit(&refs)?;
    let data = Dataset::new(stats.apply::<T>(&refs)?, records.iter().map(|r| r.label as usize).collect())?;
    let spec = ModelSpec::of_kind(cfg.model, records[0].dims);
    let (model, history) = train(&spec, &data, None, &cfg.train)?;
    let (train_loss, train_accuracy) = evaluate(&model, &data)?;
    let bytes = encode_checkpoint(&model);
    let path = cfg.output_dir.join("model.cnnm");
    write_bytes(&path, &bytes)?;
    println!(
        "trained {} on {} tensors: loss {train_loss:.4}, accuracy {train_accuracy:.4}; wrote {}",
        cfg.model,
        records.len(),
        path.display()
    );
    write_report(
        &cfg.output_dir.join("train_report.json"),
        "train",
        cfg,
        TrainResult {
            checkpoint: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            records: records.len(),
            train_loss,
            train_accuracy,
            standardization: stats,
            history,
        },
    )
}

#[derive(Serialize)]
struct Checkpoint {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct CvResult {
    cv: eegconn::experiment::CvReport,
    checkpoints: Vec<Checkpoint>,
}

/// Leave-one-cluster-out cross-validation over the feature file.
pub fn cv(cfg: &PipelineConfig) -> Result<(), CliError> {
    match cfg.precision {
        Precision::F32 => cv_typed::<f32>(cfg),
        Precision::F64 => cv_typed::<f64>(cfg),
    }
}

fn cv_typed<T: Real>(cfg: &PipelineConfig) -> Result<(), CliError> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let records = load_features(cfg)?;
    let out = run_cv::<T>(&records, &cfg.cv_config())?;
    let mut checkpoints = Vec::new();
    for (k, model) in out.models.iter().enumerate() {
        let bytes = encode_checkpoint(model);
        let file = format!("fold_{k}.cnnm");
        write_bytes(&cfg.output_dir.join(&file), &bytes)?;
        checkpoints.push(Checkpoint {
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    for f in &out.report.folds {
        println!("fold {}: accuracy {:.4} ({} test segments)", f.fold, f.accuracy, f.n_test);
    }
    println!(
        "mean accuracy {:.4} (majority fraction {:.4})",
        out.report.mean_accuracy, out.report.majority_fraction
    );
    write_report(
        &cfg.output_dir.join("cv_report.json"),
        "cv",
        cfg,
        CvResult {
            cv: out.report,
            checkpoints,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RenderKind {
    Matrix,
    Topo,
    Weights,
}

/// Numeric grid from a headerless CSV file.
fn read_csv_grid(text: &str) -> Result<(usize, usize, Vec<f64>), CliError> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("line {}: bad number {s:?}", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(CliError::Config(format!("line {}: ragged row", i + 1)));
        }
        values.extend(row);
        height += 1;
    }
    match width {
        Some(w) => Ok((w, height, values)),
        None => Err(CliError::Config("empty CSV".into())),
    }
}

fn band_slice(t: &FeatureTensor, band: usize) -> Result<(usize, usize, Vec<f64>), CliError> {
    let (h, w, c) = t.dims;
    if band >= c {
        return Err(CliError::Config(format!("band {band} out of range, tensor has {c}")));
    }
    Ok((w, h, t.values.iter().skip(band).step_by(c).map(|&v| v as f64).collect()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

/// Renders a matrix, topography or first-layer kernel grid as PGM.
pub fn render(input: &Path, kind: RenderKind, record: usize, band: usize, out_dir: &Path) -> Result<PathBuf, CliError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let bytes = fs::read(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let (name, (w, h, px)) = match kind {
        RenderKind::Matrix | RenderKind::Topo if bytes.starts_with(b"FTNS") => {
            let (_, recs) = read_features(input).map_err(|e| with_path(e, input))?;
            let t = recs
                .get(record)
                .ok_or_else(|| CliError::Config(format!("record {record} out of range, file has {}", recs.len())))?;
            let kind_name = if kind == RenderKind::Matrix { "matrix" } else { "topo" };
            (format!("{}_{kind_name}_r{record}_b{band}.pgm", stem(input)), band_slice(t, band)?)
        }
        RenderKind::Matrix | RenderKind::Topo => {
            let text = String::from_utf8(bytes).map_err(|_| CliError::Config("input is neither FTNS nor CSV".into()))?;
            let kind_name = if kind == RenderKind::Matrix { "matrix" } else { "topo" };
            (format!("{}_{kind_name}.pgm", stem(input)), read_csv_grid(&text)?)
        }
        RenderKind::Weights => {
            let grid = if bytes.starts_with(b"CNNM") {
                dump_first_layer_weights(&read_checkpoint::<f64>(input).map_err(|e| with_path(e, input))?)?
            } else {
                KernelGrid::read_csv(bytes.as_slice()).map_err(|e| with_path(e, input))?
            };
            (format!("{}_weights.pgm", stem(input)), grid.tile_image())
        }
    };
    let path = out_dir.join(name);
    write_pgm(&path, w, h, &px)?;
    println!("wrote {w}x{h} image {}", path.display());
    Ok(path)
}

/// Writes the first convolution's kernels as CSV and a tiled PGM.
pub fn dump_weights(input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let _lock = OutputLock::acquire(out_dir)?;
    let model = read_checkpoint::<f64>(input).map_err(|e| with_path(e, input))?;
    let grid = dump_first_layer_weights(&model)?;
    let csv = out_dir.join("first_layer_weights.csv");
    let mut text = Vec::new();
    grid.write_csv(&mut text)?;
    write_bytes(&csv, &text)?;
    let (w, h, px) = grid.tile_image();
    let img = out_dir.join("first_layer_weights.pgm");
    write_pgm(&img, w, h, &px)?;
    let u = grid.uniformity_scores();
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    println!(
        "{} x {} kernels, mean uniformity {mean:.4}; wrote {} and {}",
        grid.in_channels,
        grid.out_channels,
        csv.display(),
        img.display()
    );
    Ok(())
}
