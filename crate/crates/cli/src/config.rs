use std::fs;
use std::path::{Path, PathBuf};

use eegconn::connectivity::OrderingMethod;
use eegconn::dsp::bands::BandName;
use eegconn::experiment::{CvConfig, FeatureConfig, FeatureKind, FoldGranularity, PlantedCorpus, HOP_S, N_FOLDS, WINDOW_S};
use eegconn::nn::{ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Everything a command needs, read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// EEGB files, or directories whose `*.eegb` files are taken in name order.
    pub inputs: Vec<PathBuf>,
    /// FTNS file for `train` and `cv`; defaults to `<output_dir>/features.ftns`.
    pub features_path: Option<PathBuf>,
    pub synth: PlantedCorpus,
    pub feature: FeatureKind,
    /// Defaults to dist2 for connectivity features; ignored for PSD.
    pub ordering: Option<OrderingMethod>,
    pub bands: Vec<BandName>,
    pub window_s: f64,
    pub hop_s: f64,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub fold_seed: u64,
    pub n_folds: usize,
    pub granularity: FoldGranularity,
    pub stratify: bool,
    pub precision: Precision,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            features_path: None,
            synth: PlantedCorpus::default(),
            feature: FeatureKind::Plv,
            ordering: None,
            bands: BandName::ALL.to_vec(),
            window_s: WINDOW_S,
            hop_s: HOP_S,
            model: ModelKind::Cnn2,
            train: TrainConfig::default(),
            fold_seed: 0,
            n_folds: N_FOLDS,
            granularity: FoldGranularity::Trial,
            stratify: true,
            precision: Precision::F32,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: eegconn::Error| CliError::Config(e.to_string());
        self.synth.validate().map_err(bad)?;
        self.train.validate().map_err(bad)?;
        self.feature_config().band_defs().map_err(bad)?;
        for (name, v) in [("window_s", self.window_s), ("hop_s", self.hop_s)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_folds < 2 {
            return Err(CliError::Config("n_folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            feature: self.feature,
            ordering: self.ordering.unwrap_or(OrderingMethod::Dist2),
            bands: self.bands.clone(),
            window_s: self.window_s,
            hop_s: self.hop_s,
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            model: self.model,
            train: self.train.clone(),
            fold_seed: self.fold_seed,
            n_folds: self.n_folds,
            granularity: self.granularity,
            stratify: self.stratify,
        }
    }

    pub fn features_file(&self) -> PathBuf {
        self.features_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("features.ftns"))
    }

    pub fn trials_dir(&self) -> PathBuf {
        self.output_dir.join("trials")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let c = PipelineConfig::parse("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.bands.len(), 10);
    }

    #[test]
    fn fields_parse() {
        let c = PipelineConfig::parse(
            r#"{"feature": "pli", "ordering": "random:7", "bands": ["alpha", "gamma"],
                "model": "cnn5", "train": {"epochs": 3, "seed": 2}, "precision": "f64",
                "synth": {"n_trials": 10, "duration_s": 5.0}}"#,
        )
        .unwrap();
        assert_eq!(c.feature, FeatureKind::Pli);
        assert_eq!(c.ordering, Some(OrderingMethod::Random(7)));
        assert_eq!(c.bands, vec![BandName::Alpha, BandName::Gamma]);
        assert_eq!(c.model, ModelKind::Cnn5);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, 256);
        assert_eq!(c.synth.n_trials, 10);
        assert_eq!(c.precision, Precision::F64);
    }

    #[test]
    fn schema_errors() {
        for bad in [
            r#"{"bands": ["alpha", "omega"]}"#,
            r#"{"unknown_key": 1}"#,
            r#"{"train": {"epochs": 3, "momentum": 0.9}}"#,
            r#"{"feature": "coherence"}"#,
            r#"{"ordering": "dist3"}"#,
            r#"{"bands": []}"#,
            r#"{"bands": ["alpha", "alpha"]}"#,
            r#"{"train": {"batch_size": 0}}"#,
            r#"{"n_folds": 1}"#,
            "not json",
        ] {
            assert!(matches!(PipelineConfig::parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }
}
