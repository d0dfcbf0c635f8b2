use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureTensor;
use super::folds::{make_folds, make_stratified_folds, FoldPlan, N_FOLDS};
use super::segment::accuracy;
use crate::error::{invalid, Result};
use crate::nn::{train, Dataset, Model, ModelKind, ModelSpec, Tensor4, TrainConfig, TrainHistory};
use crate::scalar::Real;

/// What a fold cluster holds. `Segment` lets overlapping windows of one trial
/// land on both sides of a split and exists only for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldGranularity {
    #[default]
    Trial,
    Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub fold_seed: u64,
    #[serde(default = "default_folds")]
    pub n_folds: usize,
    #[serde(default)]
    pub granularity: FoldGranularity,
    /// Deal each class separately so every cluster keeps the overall balance.
    #[serde(default = "yes")]
    pub stratify: bool,
}

fn default_folds() -> usize {
    N_FOLDS
}

fn yes() -> bool {
    true
}

impl CvConfig {
    pub fn new(model: ModelKind, train: TrainConfig, fold_seed: u64) -> Self {
        Self {
            model,
            train,
            fold_seed,
            n_folds: N_FOLDS,
            granularity: FoldGranularity::Trial,
            stratify: true,
        }
    }
}

/// Per-band mean and standard deviation over every cell of the training tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn fit(records: &[&FeatureTensor]) -> Result<Self> {
        let first = records.first().ok_or_else(|| invalid("no records to standardize"))?;
        let c = first.dims.2;
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        let mut n = 0usize;
        for r in records {
            for cell in r.values.chunks_exact(c) {
                for (k, &v) in cell.iter().enumerate() {
                    sum[k] += v as f64;
                }
            }
            n += r.values.len() / c;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for r in records {
            for cell in r.values.chunks_exact(c) {
                for (k, &v) in cell.iter().enumerate() {
                    sq[k] += (v as f64 - mean[k]).powi(2);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Standardized copy of `records` as a batch.
    pub fn apply<T: Real>(&self, records: &[&FeatureTensor]) -> Result<Tensor4<T>> {
        let (h, w, c) = records.first().ok_or_else(|| invalid("empty batch"))?.dims;
        let mut data = Vec::with_capacity(records.len() * h * w * c);
        for r in records {
            if r.dims != (h, w, c) {
                return Err(invalid(format!("mixed tensor dims {:?} and {:?}", r.dims, (h, w, c))));
            }
            for cell in r.values.chunks_exact(c) {
                for (k, &v) in cell.iter().enumerate() {
                    data.push(T::lit((v as f64 - self.mean[k]) / self.std[k]));
                }
            }
        }
        Tensor4::from_vec([records.len(), h, w, c], data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_trials: Vec<i32>,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; 2]; 2],
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub confusion: [[usize; 2]; 2],
    /// Segment counts of class 0 and class 1.
    pub class_balance: [usize; 2],
    pub majority_fraction: f64,
    pub plan: FoldPlan,
}

pub struct CvOutcome<T> {
    pub report: CvReport,
    /// One trained model per fold.
    pub models: Vec<Model<T>>,
}

/// Accuracy of always answering the most frequent label.
pub fn majority_fraction(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("no labels"));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok(ones.max(labels.len() - ones) as f64 / labels.len() as f64)
}

/// Trial ids in ascending order with each trial's label; errors if the
/// segments of a trial disagree.
fn trial_labels(records: &[FeatureTensor]) -> Result<BTreeMap<i32, u8>> {
    let mut m = BTreeMap::new();
    for r in records {
        if *m.entry(r.trial).or_insert(r.label) != r.label {
            return Err(invalid(format!("trial {} has segments with different labels", r.trial)));
        }
    }
    Ok(m)
}

/// Permutes labels across trials; every segment of a trial gets the same new
/// label and the class balance over trials is unchanged.
pub fn shuffle_trial_labels(records: &[FeatureTensor], seed: u64) -> Result<Vec<FeatureTensor>> {
    let m = trial_labels(records)?;
    let mut labels: Vec<u8> = m.values().copied().collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let new: BTreeMap<i32, u8> = m.keys().copied().zip(labels).collect();
    Ok(records
        .iter()
        .map(|r| FeatureTensor {
            label: new[&r.trial],
            ..r.clone()
        })
        .collect())
}

/// Leave-one-cluster-out cross-validation.
///
/// Each fold standardizes with the training clusters' statistics, trains a
/// fresh model (seed `train.seed + fold`) and scores the held-out cluster.
pub fn run_cv<T: Real>(records: &[FeatureTensor], cfg: &CvConfig) -> Result<CvOutcome<T>> {
    cfg.train.validate()?;
    let first = records.first().ok_or_else(|| invalid("no feature tensors"))?;
    for r in records {
        r.validate()?;
        if r.dims != first.dims {
            return Err(invalid(format!("mixed tensor dims {:?} and {:?}", r.dims, first.dims)));
        }
    }
    let trials = trial_labels(records)?;
    let trial_ids: Vec<i32> = trials.keys().copied().collect();

    // unit of each record and the unit labels used for stratification
    let (unit_of, unit_labels): (Vec<usize>, Vec<u8>) = match cfg.granularity {
        FoldGranularity::Trial => (
            records
                .iter()
                .map(|r| trial_ids.binary_search(&r.trial).unwrap())
                .collect(),
            trials.values().copied().collect(),
        ),
        FoldGranularity::Segment => ((0..records.len()).collect(), records.iter().map(|r| r.label).collect()),
    };
    let plan = if cfg.stratify {
        make_stratified_folds(&unit_labels, cfg.n_folds, cfg.fold_seed)?
    } else {
        make_folds(unit_labels.len(), cfg.n_folds, cfg.fold_seed)?
    };

    let (h, w, c) = first.dims;
    let spec = ModelSpec::of_kind(cfg.model, (h, w, c));
    let mut folds = Vec::with_capacity(cfg.n_folds);
    let mut models = Vec::with_capacity(cfg.n_folds);
    let mut total = [[0usize; 2]; 2];
    for k in 0..cfg.n_folds {
        let (mut test, mut train_set) = (Vec::new(), Vec::new());
        for (r, &u) in records.iter().zip(&unit_of) {
            if plan.cluster_of(u) == k {
                test.push(r);
            } else {
                train_set.push(r);
            }
        }
        if test.is_empty() || train_set.is_empty() {
            return Err(invalid(format!("fold {k} has an empty train or test split")));
        }
        let stats = ChannelStats::fit(&train_set)?;
        let train_data = Dataset::new(
            stats.apply::<T>(&train_set)?,
            train_set.iter().map(|r| r.label as usize).collect(),
        )?;
        let test_x = stats.apply::<T>(&test)?;
        let test_y: Vec<usize> = test.iter().map(|r| r.label as usize).collect();

        let fold_cfg = TrainConfig {
            seed: cfg.train.seed.wrapping_add(k as u64),
            patience: None,
            ..cfg.train.clone()
        };
        let (model, history) = train(&spec, &train_data, None, &fold_cfg)?;
        drop(train_data);
        let pred = model.predict(&test_x)?;
        let mut confusion = [[0usize; 2]; 2];
        for (&t, &p) in test_y.iter().zip(&pred) {
            confusion[t][p] += 1;
            total[t][p] += 1;
        }
        let mut test_trials: Vec<i32> = test.iter().map(|r| r.trial).collect();
        test_trials.dedup();
        folds.push(FoldReport {
            fold: k,
            test_trials,
            n_train: train_set.len(),
            n_test: test.len(),
            accuracy: accuracy(&pred, &test_y)?,
            confusion,
            history,
        });
        models.push(model);
    }
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let report = CvReport {
        mean_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64,
        folds,
        confusion: total,
        class_balance: [labels.len() - ones, ones],
        majority_fraction: majority_fraction(&labels)?,
        plan,
    };
    Ok(CvOutcome { report, models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::features::{FeatureKind, OrderingTag};
    use rand::Rng;

    /// Tiny tensors whose first row carries the label when `signal` is set.
    fn toy(n_trials: usize, per_trial: usize, signal: bool, seed: u64) -> Vec<FeatureTensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for t in 0..n_trials {
            let label = (t % 2) as u8;
            for wdx in 0..per_trial {
                let mut values: Vec<f32> = (0..4 * 4 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
                if signal {
                    values[..8].iter_mut().for_each(|v| *v += 3.0 * label as f32);
                }
                out.push(FeatureTensor {
                    dims: (4, 4, 2),
                    label,
                    trial: t as i32,
                    window: wdx as i32,
                    feature: FeatureKind::Pcc,
                    ordering: OrderingTag::Dist1,
                    values,
                });
            }
        }
        out
    }

    fn cfg() -> CvConfig {
        CvConfig::new(
            ModelKind::Cnn2,
            TrainConfig {
                batch_size: 16,
                epochs: 8,
                learning_rate: 3e-3,
                ..TrainConfig::default()
            },
            1,
        )
    }

    #[test]
    fn folds_are_trial_atomic_and_cover_everything() {
        let recs = toy(10, 6, true, 1);
        let out = run_cv::<f64>(&recs, &cfg()).unwrap();
        let r = &out.report;
        assert_eq!(r.folds.len(), 5);
        assert_eq!(r.folds.iter().map(|f| f.n_test).sum::<usize>(), 60);
        let mut all: Vec<i32> = r.folds.iter().flat_map(|f| f.test_trials.clone()).collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for f in &r.folds {
            assert_eq!(f.n_train + f.n_test, 60);
            assert_eq!(f.confusion.iter().flatten().sum::<usize>(), f.n_test);
        }
        assert_eq!(r.class_balance, [30, 30]);
        assert_eq!(r.majority_fraction, 0.5);
        assert!(r.mean_accuracy > 0.9, "{}", r.mean_accuracy);
    }

    #[test]
    fn same_seeds_same_report() {
        let recs = toy(10, 4, true, 2);
        let a = run_cv::<f64>(&recs, &cfg()).unwrap().report;
        let b = run_cv::<f64>(&recs, &cfg()).unwrap().report;
        assert_eq!(a, b);
    }

    #[test]
    fn segment_mode_splits_trials() {
        let recs = toy(10, 6, false, 3);
        let c = CvConfig {
            granularity: FoldGranularity::Segment,
            ..cfg()
        };
        let r = run_cv::<f32>(&recs, &c).unwrap().report;
        let shared = r.folds.iter().flat_map(|f| f.test_trials.clone()).count();
        assert!(shared > 10);
    }

    #[test]
    fn too_few_trials_is_an_error() {
        let recs = toy(4, 3, true, 4);
        assert!(run_cv::<f32>(&recs, &cfg()).is_err());
    }

    #[test]
    fn majority_classifier_scores_the_majority_fraction() {
        let labels = [1u8, 1, 0, 1, 0, 1, 1, 0];
        let guess = vec![1u8; labels.len()];
        assert_eq!(accuracy(&guess, &labels).unwrap(), majority_fraction(&labels).unwrap());
        assert_eq!(majority_fraction(&labels).unwrap(), 5.0 / 8.0);
    }

    #[test]
    fn label_shuffle_keeps_trials_consistent() {
        let recs = toy(10, 3, false, 5);
        let s = shuffle_trial_labels(&recs, 9).unwrap();
        let m = trial_labels(&s).unwrap();
        assert_eq!(m.values().filter(|&&l| l == 1).count(), 5);
        assert_ne!(m, trial_labels(&recs).unwrap());
    }

    #[test]
    fn stats_standardize_training_cells() {
        let recs = toy(3, 2, false, 6);
        let refs: Vec<&FeatureTensor> = recs.iter().collect();
        let s = ChannelStats::fit(&refs).unwrap();
        let x = s.apply::<f64>(&refs).unwrap();
        for k in 0..2 {
            let v: Vec<f64> = x.data().iter().skip(k).step_by(2).copied().collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
        }
    }
}
