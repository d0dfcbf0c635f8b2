use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{Model, Mode, EVAL_BATCH};
use super::spec::{LayerSpec, ModelSpec};
use super::tensor::Tensor4;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Seeds weight initialisation and batch shuffling.
    pub seed: u64,
    /// Stop after this many epochs without a lower validation loss. Needs a
    /// validation set; the best model seen is returned.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            batch_size: 256,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            epochs: 10,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted (it freezes the parameters).
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning_rate {} must be >= 0", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid(format!("{name} {b} outside [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.patience == Some(0) {
            return Err(invalid("patience must be at least 1"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Inputs with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    inputs: Tensor4<T>,
    labels: Vec<usize>,
}

impl<T: Real> Dataset<T> {
    pub fn new(inputs: Tensor4<T>, labels: Vec<usize>) -> Result<Self> {
        if inputs.batch() != labels.len() {
            return Err(invalid(format!("{} inputs but {} labels", inputs.batch(), labels.len())));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(invalid("labels must be 0 or 1"));
        }
        Ok(Self { inputs, labels })
    }

    pub fn inputs(&self) -> &Tensor4<T> {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training-mode loss over the epoch's batches.
    pub train_loss: f64,
    /// Accuracy of the training-mode predictions made during the epoch.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
    pub stopped_early: bool,
}

fn count_correct(pred: &[usize], labels: &[usize]) -> usize {
    pred.iter().zip(labels).filter(|(a, b)| a == b).count()
}

/// Eval-mode mean loss and accuracy over a dataset.
pub fn evaluate<T: Real>(model: &Model<T>, data: &Dataset<T>) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(invalid("cannot evaluate on an empty dataset"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let (mut loss, mut correct) = (0.0, 0);
    for chunk in idx.chunks(EVAL_BATCH) {
        let x = data.inputs.gather(chunk);
        let y: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
        loss += model.loss(&x, &y, Mode::Eval)?.to_f64_lossless() * chunk.len() as f64;
        correct += count_correct(&model.predict(&x)?, &y);
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

/// Trains a freshly initialised model with Adam on shuffled mini-batches.
///
/// A trailing batch of one item is skipped when the model has batch norm.
/// Non-finite values during training are reported as [`Error::Diverged`].
pub fn train<T: Real>(
    spec: &ModelSpec,
    data: &Dataset<T>,
    val: Option<&Dataset<T>>,
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainHistory)> {
    cfg.validate()?;
    let model = Model::new(spec.clone(), cfg.seed)?;
    train_from(model, data, val, cfg)
}

/// Continues training an existing model.
pub fn train_from<T: Real>(
    mut model: Model<T>,
    data: &Dataset<T>,
    val: Option<&Dataset<T>>,
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let has_bn = model.spec().layers.contains(&LayerSpec::BatchNorm);
    if has_bn && data.len() < 2 {
        return Err(invalid("batch norm needs at least 2 training items"));
    }
    if cfg.patience.is_some() && val.is_none() {
        return Err(invalid("early stopping needs a validation set"));
    }
    let adam = cfg.adam();
    let mut state = AdamState::new(&model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        stopped_early: false,
    };
    let mut best: Option<(f64, Model<T>)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0, 0);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            if has_bn && idx.len() < 2 {
                continue;
            }
            let x = data.inputs.gather(idx);
            let y: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let (loss, grads, pred) = match model.loss_and_grad(&x, &y) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged {
                        epoch,
                        batch: b,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            adam_step(&mut model.params_mut(), &grads, &mut state, &adam)?;
            if model.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: loss.to_f64_lossless(),
                });
            }
            loss_sum += loss.to_f64_lossless() * idx.len() as f64;
            correct += count_correct(&pred, &y);
            seen += idx.len();
        }
        let (val_loss, val_accuracy) = match val {
            Some(v) => {
                let (l, a) = evaluate(&model, v)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        history.epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            val_loss,
            val_accuracy,
        });
        if let (Some(p), Some(vl)) = (cfg.patience, val_loss) {
            if best.as_ref().is_none_or(|(bl, _)| vl < *bl) {
                best = Some((vl, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= p {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset<f64> {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 2;
            let v = if l == 0 { -1.0 } else { 1.0 };
            data.extend(std::iter::repeat_n(v, 4 * 4 * 2));
            labels.push(l);
        }
        Dataset::new(Tensor4::from_vec([n, 4, 4, 2], data).unwrap(), labels).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            epochs: 5,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_is_learned() {
        let data = toy(32);
        let (model, hist) = train(&ModelSpec::cnn2((4, 4, 2)), &data, None, &cfg()).unwrap();
        assert_eq!(hist.epochs.len(), 5);
        let (_, acc) = evaluate(&model, &data).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = toy(20);
        let (a, ha) = train(&ModelSpec::cnn2((4, 4, 2)), &data, None, &cfg()).unwrap();
        let (b, hb) = train(&ModelSpec::cnn2((4, 4, 2)), &data, None, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let data = toy(20);
        let c = TrainConfig {
            learning_rate: 0.0,
            ..cfg()
        };
        let untrained = Model::<f64>::new(ModelSpec::cnn2((4, 4, 2)), c.seed).unwrap();
        let (m, _) = train(&ModelSpec::cnn2((4, 4, 2)), &data, None, &c).unwrap();
        assert_eq!(m.params(), untrained.params());
        // identical parameters and batch statistics give identical train-mode predictions
        let p0 = untrained.forward(data.inputs(), Mode::Train).unwrap();
        let p1 = m.forward(data.inputs(), Mode::Train).unwrap();
        assert_eq!(p0, p1);
    }

    #[test]
    fn early_stopping_needs_validation() {
        let data = toy(10);
        let c = TrainConfig {
            patience: Some(2),
            ..cfg()
        };
        assert!(train(&ModelSpec::cnn2((4, 4, 2)), &data, None, &c).is_err());
        let (_, h) = train(&ModelSpec::cnn2((4, 4, 2)), &data, Some(&data), &c).unwrap();
        assert!(h.epochs.iter().all(|e| e.val_accuracy.is_some()));
    }

    #[test]
    fn divergence_reports_position() {
        let data = toy(10);
        let c = TrainConfig {
            learning_rate: 1e300,
            ..cfg()
        };
        match train(&ModelSpec::cnn2((4, 4, 2)), &data, None, &c) {
            // the first update blows the weights up; the second batch overflows
            Err(Error::Diverged { epoch, batch, .. }) => assert_eq!((epoch, batch), (0, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { beta2: 1.0, ..TrainConfig::default() }.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }
}
