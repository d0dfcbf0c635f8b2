#![allow(dead_code)]

use eegconn::nn::{Mode, Model, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(dims: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    Tensor4::from_vec(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Worst relative error of one parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub worst: f64,
}

/// Magnitude below which a gradient is compared in absolute terms. Central
/// differences of an O(1) loss with step 1e-5 carry roundoff noise around
/// 1e-10, and several gradients here are structurally zero (a conv bias
/// followed by batch norm with no active ReLU kink), where a relative error
/// has no meaning.
pub const GRAD_FLOOR: f64 = 1e-5;

/// `|a - b| / max(|a|, |b|, GRAD_FLOOR)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

/// Compares analytic gradients with central differences of the training-mode
/// loss. `limit` caps how many entries of each tensor are checked (evenly
/// spaced); `None` checks all.
pub fn gradient_check(model: &Model<f64>, x: &Tensor4<f64>, labels: &[usize], step: f64, limit: Option<usize>) -> Vec<ParamCheck> {
    let mut work = model.clone();
    let (_, grads, _) = work.loss_and_grad(x, labels).unwrap();
    let names = model.param_names();
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (p, g) in grads.iter().enumerate() {
        let n = g.len();
        let idx: Vec<usize> = match limit {
            Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
            _ => (0..n).collect(),
        };
        let mut worst: f64 = 0.0;
        for &j in &idx {
            let orig = probe.params()[p][j];
            probe.params_mut()[p][j] = orig + step;
            let up = probe.loss(x, labels, Mode::Train).unwrap();
            probe.params_mut()[p][j] = orig - step;
            let down = probe.loss(x, labels, Mode::Train).unwrap();
            probe.params_mut()[p][j] = orig;
            let numeric = (up - down) / (2.0 * step);
            if std::env::var("GRADCHECK_DEBUG").is_ok() && rel_err(g[j], numeric) > 1e-5 {
                eprintln!("{} [{j}]: analytic {:e} numeric {:e}", names[p], g[j], numeric);
            }
            worst = worst.max(rel_err(g[j], numeric));
        }
        out.push(ParamCheck {
            name: names[p].clone(),
            checked: idx.len(),
            worst,
        });
    }
    out
}
