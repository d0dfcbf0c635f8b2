use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{self, BnCache, BN_MOMENTUM};
use super::spec::{LayerSpec, ModelSpec, Shape};
use super::tensor::Tensor4;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm uses the statistics of the current batch.
    Train,
    /// Batch norm uses the running statistics.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
enum Layer<T> {
    Conv { out_c: usize, w: Vec<T>, b: Vec<T> },
    Pool,
    BatchNorm { gamma: Vec<T>, beta: Vec<T>, mean: Vec<T>, var: Vec<T> },
    Relu,
    Flatten,
    Dense { units: usize, w: Vec<T>, b: Vec<T> },
    Softmax,
}

enum Cache<T> {
    Input(Tensor4<T>),
    Pool([usize; 4], Vec<u32>),
    Bn(BnCache<T>),
    Output(Tensor4<T>),
    Dims([usize; 4]),
    None,
}

/// Gradients in the same order as [`Model::params`].
pub type Gradients<T> = Vec<Vec<T>>;

/// A CNN built from a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    layers: Vec<Layer<T>>,
}

/// Batch size used when evaluating large inputs.
pub const EVAL_BATCH: usize = 256;

impl<T: Real> Model<T> {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases, unit
    /// batch-norm scale and zero shift. Weights are drawn in `f64` so the two
    /// precisions start from the same values up to rounding.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let trace = spec.trace()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |fan_in: usize, n: usize| -> Vec<T> {
            let bound = (6.0 / fan_in as f64).sqrt();
            (0..n).map(|_| T::lit(rng.random_range(-bound..bound))).collect()
        };
        let mut prev: Shape = spec.input;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (l, &out) in spec.layers.iter().zip(&trace) {
            layers.push(match *l {
                LayerSpec::Conv3x3 { out_channels } => Layer::Conv {
                    out_c: out_channels,
                    w: he(9 * prev.2, 9 * prev.2 * out_channels),
                    b: vec![T::zero(); out_channels],
                },
                LayerSpec::Dense { units } => Layer::Dense {
                    units,
                    w: he(prev.2, prev.2 * units),
                    b: vec![T::zero(); units],
                },
                LayerSpec::BatchNorm => Layer::BatchNorm {
                    gamma: vec![T::one(); prev.2],
                    beta: vec![T::zero(); prev.2],
                    mean: vec![T::zero(); prev.2],
                    var: vec![T::one(); prev.2],
                },
                LayerSpec::MaxPool2x2 => Layer::Pool,
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Softmax => Layer::Softmax,
            });
            prev = out;
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Trainable parameters in layer order: conv and dense weights then bias,
    /// batch-norm scale then shift.
    pub fn params(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv { w, b, .. } | Layer::Dense { w, b, .. } => v.extend([w.as_slice(), b.as_slice()]),
                Layer::BatchNorm { gamma, beta, .. } => v.extend([gamma.as_slice(), beta.as_slice()]),
                _ => {}
            }
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Conv { w, b, .. } | Layer::Dense { w, b, .. } => {
                    v.push(w.as_mut_slice());
                    v.push(b.as_mut_slice());
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    v.push(gamma.as_mut_slice());
                    v.push(beta.as_mut_slice());
                }
                _ => {}
            }
        }
        v
    }

    /// Human-readable label of every entry of [`Model::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (i, (l, s)) in self.layers.iter().zip(&self.spec.layers).enumerate() {
            let (a, b) = match l {
                Layer::Conv { .. } | Layer::Dense { .. } => ("weights", "bias"),
                Layer::BatchNorm { .. } => ("gamma", "beta"),
                _ => continue,
            };
            v.push(format!("layer {i} {} {a}", s.name()));
            v.push(format!("layer {i} {} {b}", s.name()));
        }
        v
    }

    /// Batch-norm running `(mean, variance)` per batch-norm layer.
    pub fn running_stats(&self) -> Vec<(&[T], &[T])> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::BatchNorm { mean, var, .. } => Some((mean.as_slice(), var.as_slice())),
                _ => None,
            })
            .collect()
    }

    pub fn running_stats_mut(&mut self) -> Vec<(&mut [T], &mut [T])> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::BatchNorm { mean, var, .. } => Some((mean.as_mut_slice(), var.as_mut_slice())),
                _ => None,
            })
            .collect()
    }

    /// First convolution's weights as `(3, 3, in, out)` plus its `in` and `out`.
    pub fn first_conv(&self) -> Option<(&[T], usize, usize)> {
        self.layers.iter().find_map(|l| match l {
            Layer::Conv { out_c, w, .. } => Some((w.as_slice(), w.len() / (9 * out_c), *out_c)),
            _ => None,
        })
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let [n, h, w, c] = x.dims();
        if (h, w, c) != self.spec.input {
            return Err(Error::Shape {
                layer: 0,
                reason: format!("input is {h}x{w}x{c}, model expects {:?}", self.spec.input),
            });
        }
        if n == 0 {
            return Err(Error::Shape {
                layer: 0,
                reason: "empty batch".into(),
            });
        }
        Ok(())
    }

    /// Runs every layer up to (not including) the softmax. Returns the logits,
    /// the per-layer caches when `keep` is set, and batch-norm caches.
    fn run(&self, x: &Tensor4<T>, mode: Mode, keep: bool) -> Result<(Tensor4<T>, Vec<Cache<T>>)> {
        self.check_input(x)?;
        let mut caches = Vec::new();
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let (next, cache) = match l {
                Layer::Conv { out_c, w, b } => {
                    let y = layers::conv3x3_forward(&a, w, b, *out_c);
                    (y, Cache::Input(a))
                }
                Layer::Pool => {
                    let (y, arg) = layers::maxpool2x2_forward(&a);
                    (y, Cache::Pool(a.dims(), arg))
                }
                Layer::BatchNorm { gamma, beta, mean, var } => match mode {
                    Mode::Train => {
                        if a.batch() < 2 {
                            return Err(Error::Shape {
                                layer: i,
                                reason: "batch norm in training mode needs a batch of at least 2".into(),
                            });
                        }
                        let (y, c) = layers::batchnorm_train_forward(&a, gamma, beta);
                        (y, Cache::Bn(c))
                    }
                    Mode::Eval => (layers::batchnorm_eval_forward(&a, gamma, beta, mean, var), Cache::None),
                },
                Layer::Relu => {
                    let y = layers::relu_forward(&a);
                    let c = if keep { Cache::Output(y.clone()) } else { Cache::None };
                    (y, c)
                }
                Layer::Flatten => {
                    let dims = a.dims();
                    let f = a.item_len();
                    (a.reshape([dims[0], 1, 1, f])?, Cache::Dims(dims))
                }
                Layer::Dense { units, w, b } => {
                    let y = layers::dense_forward(&a, w, b, *units);
                    (y, Cache::Input(a))
                }
                Layer::Softmax => break,
            };
            if !next.is_finite() {
                return Err(Error::NonFinite(format!(
                    "output of layer {i} ({})",
                    self.spec.layers[i].name()
                )));
            }
            a = next;
            if keep || matches!(cache, Cache::Bn(_)) {
                caches.push(cache);
            } else {
                caches.push(Cache::None);
            }
        }
        Ok((a, caches))
    }

    /// Class probabilities `(n, 1, 1, 2)`. Pure in both modes: training mode
    /// normalises with batch statistics but does not touch running averages.
    pub fn forward(&self, x: &Tensor4<T>, mode: Mode) -> Result<Tensor4<T>> {
        let (logits, _) = self.run(x, mode, false)?;
        Ok(layers::softmax(&logits))
    }

    /// Training-mode forward pass that also updates the batch-norm running
    /// averages.
    pub fn forward_train(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let (logits, caches) = self.run(x, Mode::Train, false)?;
        self.update_running(&caches);
        Ok(layers::softmax(&logits))
    }

    /// Probabilities for any number of items, evaluated in chunks.
    pub fn predict_proba(&self, x: &Tensor4<T>) -> Result<Vec<[T; 2]>> {
        let mut out = Vec::with_capacity(x.batch());
        let idx: Vec<usize> = (0..x.batch()).collect();
        for chunk in idx.chunks(EVAL_BATCH) {
            let p = self.forward(&x.gather(chunk), Mode::Eval)?;
            out.extend(p.data().chunks_exact(2).map(|r| [r[0], r[1]]));
        }
        Ok(out)
    }

    /// Eval-mode class predictions; ties go to class 0.
    pub fn predict(&self, x: &Tensor4<T>) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| usize::from(p[1] > p[0]))
            .collect())
    }

    fn check_labels(&self, x: &Tensor4<T>, labels: &[usize]) -> Result<()> {
        if labels.len() != x.batch() {
            return Err(invalid(format!("{} labels for a batch of {}", labels.len(), x.batch())));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(invalid(format!("label {l} is not 0 or 1")));
        }
        Ok(())
    }

    /// Mean cross-entropy without touching any state.
    pub fn loss(&self, x: &Tensor4<T>, labels: &[usize], mode: Mode) -> Result<T> {
        self.check_labels(x, labels)?;
        let (logits, _) = self.run(x, mode, false)?;
        Ok(layers::cross_entropy(&logits, labels))
    }

    fn update_running(&mut self, caches: &[Cache<T>]) {
        let m = T::lit(BN_MOMENTUM);
        let one_m = T::one() - m;
        for (l, c) in self.layers.iter_mut().zip(caches) {
            if let (Layer::BatchNorm { mean, var, .. }, Cache::Bn(bc)) = (l, c) {
                for (r, &b) in mean.iter_mut().zip(&bc.batch_mean) {
                    *r = m * *r + one_m * b;
                }
                for (r, &b) in var.iter_mut().zip(&bc.batch_var_unbiased) {
                    *r = m * *r + one_m * b;
                }
            }
        }
    }

    /// Training-mode loss and parameter gradients; updates batch-norm running
    /// averages. Also returns the batch's predictions.
    pub fn loss_and_grad(&mut self, x: &Tensor4<T>, labels: &[usize]) -> Result<(T, Gradients<T>, Vec<usize>)> {
        self.check_labels(x, labels)?;
        let (logits, caches) = self.run(x, Mode::Train, true)?;
        let loss = layers::cross_entropy(&logits, labels);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss is {loss}")));
        }
        let preds = logits
            .data()
            .chunks_exact(2)
            .map(|r| usize::from(r[1] > r[0]))
            .collect();
        let first_param = self
            .layers
            .iter()
            .position(|l| matches!(l, Layer::Conv { .. } | Layer::Dense { .. } | Layer::BatchNorm { .. }))
            .unwrap_or(0);
        let mut g = layers::cross_entropy_grad(&logits, labels);
        let mut grads_rev: Vec<Vec<T>> = Vec::new();
        for i in (first_param..caches.len()).rev() {
            let need_dx = i > first_param;
            match (&self.layers[i], &caches[i]) {
                (Layer::Conv { w, .. }, Cache::Input(x_in)) => {
                    let cg = layers::conv3x3_backward(x_in, w, &g, need_dx);
                    grads_rev.push(cg.bias);
                    grads_rev.push(cg.weights);
                    if let Some(dx) = cg.input {
                        g = dx;
                    }
                }
                (Layer::Dense { w, .. }, Cache::Input(x_in)) => {
                    let (dx, dw, db) = layers::dense_backward(x_in, w, &g);
                    grads_rev.push(db);
                    grads_rev.push(dw);
                    g = dx;
                }
                (Layer::BatchNorm { gamma, .. }, Cache::Bn(bc)) => {
                    let (dx, dgamma, dbeta) = layers::batchnorm_backward(bc, gamma, &g);
                    grads_rev.push(dbeta);
                    grads_rev.push(dgamma);
                    g = dx;
                }
                (Layer::Pool, Cache::Pool(dims, arg)) => g = layers::maxpool2x2_backward(*dims, arg, &g),
                (Layer::Relu, Cache::Output(y)) => g = layers::relu_backward(y, &g),
                (Layer::Flatten, Cache::Dims(dims)) => g = g.reshape(*dims)?,
                _ => unreachable!("cache kind matches layer kind"),
            }
            if grads_rev.last().is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFinite(format!("gradient of layer {i}")));
            }
        }
        grads_rev.reverse();
        self.update_running(&caches);
        Ok((loss, grads_rev, preds))
    }

    /// Rebuilds a model from a spec and stored values.
    pub fn from_parts(spec: ModelSpec, params: Vec<Vec<T>>, running: Vec<(Vec<T>, Vec<T>)>) -> Result<Self> {
        let mut m = Self::new(spec, 0)?;
        let expected: Vec<usize> = m.params().iter().map(|p| p.len()).collect();
        let got: Vec<usize> = params.iter().map(|p| p.len()).collect();
        if expected != got {
            return Err(invalid(format!("parameter sizes {got:?}, model needs {expected:?}")));
        }
        let n_bn = m.running_stats().len();
        if running.len() != n_bn {
            return Err(invalid(format!("{} running-stat pairs for {n_bn} batch-norm layers", running.len())));
        }
        for (dst, src) in m.params_mut().into_iter().zip(params) {
            dst.copy_from_slice(&src);
        }
        for ((dm, dv), (sm, sv)) in m.running_stats_mut().into_iter().zip(running) {
            if dm.len() != sm.len() || dv.len() != sv.len() {
                return Err(invalid("running-stat size mismatch"));
            }
            dm.copy_from_slice(&sm);
            dv.copy_from_slice(&sv);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(n: usize, shape: Shape, seed: u64) -> Tensor4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = n * shape.0 * shape.1 * shape.2;
        Tensor4::from_vec([n, shape.0, shape.1, shape.2], (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn zero_dense_layers_give_half_half() {
        let spec = ModelSpec::cnn2((8, 8, 2));
        let mut m = Model::<f64>::new(spec, 1).unwrap();
        let n = m.params().len();
        // last dense layer weights and bias
        m.params_mut()[n - 2].fill(0.0);
        m.params_mut()[n - 1].fill(0.0);
        let p = m.forward(&input(4, (8, 8, 2), 2), Mode::Eval).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn rows_sum_to_one_and_eval_is_pure() {
        let m = Model::<f64>::new(ModelSpec::cnn5((8, 8, 3)), 3).unwrap();
        let x = input(5, (8, 8, 3), 4);
        let a = m.forward(&x, Mode::Eval).unwrap();
        for r in a.data().chunks(2) {
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
            assert!(r[0] > 0.0 && r[0] < 1.0);
        }
        assert_eq!(a, m.forward(&x, Mode::Eval).unwrap());
        let t = m.forward(&x, Mode::Train).unwrap();
        assert_eq!(t, m.forward(&x, Mode::Train).unwrap());
    }

    #[test]
    fn training_forward_updates_only_running_stats() {
        let mut m = Model::<f64>::new(ModelSpec::cnn2((4, 4, 1)), 5).unwrap();
        let before = m.clone();
        m.forward_train(&input(6, (4, 4, 1), 6)).unwrap();
        assert_eq!(
            m.params().iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
            before.params().iter().map(|p| p.to_vec()).collect::<Vec<_>>()
        );
        assert_ne!(m.running_stats()[0].0, before.running_stats()[0].0);
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let m = Model::<f64>::new(ModelSpec::cnn2((8, 8, 2)), 0).unwrap();
        match m.forward(&input(2, (8, 8, 3), 0), Mode::Eval) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("{other:?}"),
        }
        match m.forward(&input(1, (8, 8, 2), 0), Mode::Train) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_input_is_caught() {
        let m = Model::<f64>::new(ModelSpec::cnn2((4, 4, 1)), 0).unwrap();
        let mut x = input(2, (4, 4, 1), 1);
        x.data_mut()[3] = f64::NAN;
        assert!(matches!(m.forward(&x, Mode::Eval), Err(Error::NonFinite(_))));
    }

    #[test]
    fn uniform_predictor_loss_is_ln2() {
        let mut m = Model::<f64>::new(ModelSpec::cnn2((4, 4, 1)), 0).unwrap();
        let n = m.params().len();
        m.params_mut()[n - 2].fill(0.0);
        m.params_mut()[n - 1].fill(0.0);
        let l = m.loss(&input(3, (4, 4, 1), 2), &[0, 1, 1], Mode::Eval).unwrap();
        assert_eq!(l, std::f64::consts::LN_2);
    }

    #[test]
    fn from_parts_round_trips() {
        let m = Model::<f64>::new(ModelSpec::cnn2((4, 4, 1)), 9).unwrap();
        let params = m.params().iter().map(|p| p.to_vec()).collect();
        let running = m.running_stats().iter().map(|(a, b)| (a.to_vec(), b.to_vec())).collect();
        assert_eq!(Model::from_parts(m.spec().clone(), params, running).unwrap(), m);
    }
}
