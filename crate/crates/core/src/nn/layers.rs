//! Forward and backward kernels for the individual layer types.
//!
//! Convolutions and dense layers go through im2col + GEMM. Every reduction
//! runs in a fixed order over fixed-size chunks, so results are bitwise
//! reproducible for a given input.

use super::tensor::Tensor4;
use crate::scalar::Real;

pub const BN_EPS: f64 = 1e-5;
/// Weight of the previous running statistic in the running-average update.
pub const BN_MOMENTUM: f64 = 0.9;

/// Target number of im2col rows per GEMM call.
const CHUNK_ROWS: usize = 4096;

fn images_per_chunk(h: usize, w: usize) -> usize {
    (CHUNK_ROWS / (h * w)).max(1)
}

/// Unrolls `n_img` images (NHWC, contiguous) into rows of 3x3xC patches with
/// zero padding. Row `(i, y, x)` holds columns ordered `(ky, kx, c)`.
fn im2col<T: Real>(x: &[T], n_img: usize, h: usize, w: usize, c: usize, cols: &mut [T]) {
    let k = 9 * c;
    for i in 0..n_img {
        let img = &x[i * h * w * c..(i + 1) * h * w * c];
        for y in 0..h {
            for xx in 0..w {
                let row = &mut cols[((i * h + y) * w + xx) * k..][..k];
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        let dst = &mut row[(ky * 3 + kx) * c..][..c];
                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            dst.fill(T::zero());
                        } else {
                            let src = (sy as usize * w + sx as usize) * c;
                            dst.copy_from_slice(&img[src..src + c]);
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch gradients back onto the images.
fn col2im<T: Real>(cols: &[T], n_img: usize, h: usize, w: usize, c: usize, dx: &mut [T]) {
    let k = 9 * c;
    for i in 0..n_img {
        let img = &mut dx[i * h * w * c..(i + 1) * h * w * c];
        for y in 0..h {
            for xx in 0..w {
                let row = &cols[((i * h + y) * w + xx) * k..][..k];
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let src = &row[(ky * 3 + kx) * c..][..c];
                        let dst = &mut img[(sy as usize * w + sx as usize) * c..][..c];
                        dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
                    }
                }
            }
        }
    }
}

/// Same-padded 3x3 cross-correlation. `weights` is `(3, 3, in, out)` row-major.
pub fn conv3x3_forward<T: Real>(x: &Tensor4<T>, weights: &[T], bias: &[T], out_c: usize) -> Tensor4<T> {
    let [n, h, w, c] = x.dims();
    let k = 9 * c;
    debug_assert_eq!(weights.len(), k * out_c);
    let mut out = Tensor4::zeros([n, h, w, out_c]);
    let per = images_per_chunk(h, w);
    let mut cols = vec![T::zero(); per * h * w * k];
    let mut start = 0;
    while start < n {
        let m = per.min(n - start);
        let rows = m * h * w;
        im2col(&x.data()[start * h * w * c..], m, h, w, c, &mut cols);
        let dst = &mut out.data_mut()[start * h * w * out_c..][..rows * out_c];
        T::gemm(false, false, rows, out_c, k, T::one(), &cols, weights, T::zero(), dst);
        for r in dst.chunks_exact_mut(out_c) {
            r.iter_mut().zip(bias).for_each(|(v, &b)| *v = *v + b);
        }
        start += m;
    }
    out
}

pub struct ConvGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Tensor4<T>>,
}

/// Gradients of a 3x3 convolution. The input gradient is skipped when
/// `need_input_grad` is false (first layer).
pub fn conv3x3_backward<T: Real>(
    x: &Tensor4<T>,
    weights: &[T],
    dy: &Tensor4<T>,
    need_input_grad: bool,
) -> ConvGrads<T> {
    let [n, h, w, c] = x.dims();
    let out_c = dy.dims()[3];
    let k = 9 * c;
    let mut dw = vec![T::zero(); k * out_c];
    let mut db = vec![T::zero(); out_c];
    for r in dy.data().chunks_exact(out_c) {
        db.iter_mut().zip(r).for_each(|(b, &g)| *b = *b + g);
    }
    let mut dx = need_input_grad.then(|| Tensor4::zeros([n, h, w, c]));
    let per = images_per_chunk(h, w);
    let mut cols = vec![T::zero(); per * h * w * k];
    let mut start = 0;
    while start < n {
        let m = per.min(n - start);
        let rows = m * h * w;
        let g = &dy.data()[start * h * w * out_c..][..rows * out_c];
        im2col(&x.data()[start * h * w * c..], m, h, w, c, &mut cols);
        T::gemm(true, false, k, out_c, rows, T::one(), &cols, g, T::one(), &mut dw);
        if let Some(dx) = dx.as_mut() {
            T::gemm(false, true, rows, k, out_c, T::one(), g, weights, T::zero(), &mut cols);
            col2im(&cols, m, h, w, c, &mut dx.data_mut()[start * h * w * c..]);
        }
        start += m;
    }
    ConvGrads {
        weights: dw,
        bias: db,
        input: dx,
    }
}

/// 2x2 max pooling, stride 2. Returns the output and, per output value, the
/// flat input index of the maximum (first maximum in row-major window order).
pub fn maxpool2x2_forward<T: Real>(x: &Tensor4<T>) -> (Tensor4<T>, Vec<u32>) {
    let [n, h, w, c] = x.dims();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([n, oh, ow, c]);
    let mut arg = vec![0u32; n * oh * ow * c];
    let xd = x.data();
    let od = out.data_mut();
    for i in 0..n {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..c {
                    let o = ((i * oh + y) * ow + xx) * c + ch;
                    let mut best_idx = ((i * h + 2 * y) * w + 2 * xx) * c + ch;
                    let mut best = xd[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((i * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                    od[o] = best;
                    arg[o] = best_idx as u32;
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool2x2_backward<T: Real>(input_dims: [usize; 4], argmax: &[u32], dy: &Tensor4<T>) -> Tensor4<T> {
    let mut dx = Tensor4::zeros(input_dims);
    let d = dx.data_mut();
    for (&a, &g) in argmax.iter().zip(dy.data()) {
        d[a as usize] = d[a as usize] + g;
    }
    dx
}

pub struct BnCache<T> {
    pub x_hat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<T>,
    /// Unbiased batch variance, used for the running estimate.
    pub batch_var_unbiased: Vec<T>,
}

/// Batch normalisation with batch statistics over `(batch, height, width)`.
pub fn batchnorm_train_forward<T: Real>(x: &Tensor4<T>, gamma: &[T], beta: &[T]) -> (Tensor4<T>, BnCache<T>) {
    let c = x.dims()[3];
    let m = x.data().len() / c;
    let mf = T::from_usize(m).unwrap();
    let mut mean = vec![T::zero(); c];
    for r in x.data().chunks_exact(c) {
        mean.iter_mut().zip(r).for_each(|(s, &v)| *s = *s + v);
    }
    mean.iter_mut().for_each(|s| *s = *s / mf);
    let mut var = vec![T::zero(); c];
    for r in x.data().chunks_exact(c) {
        for ((s, &v), &mu) in var.iter_mut().zip(r).zip(&mean) {
            *s = *s + (v - mu) * (v - mu);
        }
    }
    let unbiased: Vec<T> = var
        .iter()
        .map(|&s| if m > 1 { s / T::from_usize(m - 1).unwrap() } else { T::zero() })
        .collect();
    let eps = T::lit(BN_EPS);
    let inv_std: Vec<T> = var.iter().map(|&s| T::one() / (s / mf + eps).sqrt()).collect();
    let mut y = Tensor4::zeros(x.dims());
    let mut x_hat = vec![T::zero(); x.data().len()];
    for ((xr, hr), yr) in x
        .data()
        .chunks_exact(c)
        .zip(x_hat.chunks_exact_mut(c))
        .zip(y.data_mut().chunks_exact_mut(c))
    {
        for j in 0..c {
            let xh = (xr[j] - mean[j]) * inv_std[j];
            hr[j] = xh;
            yr[j] = gamma[j] * xh + beta[j];
        }
    }
    (
        y,
        BnCache {
            x_hat,
            inv_std,
            batch_mean: mean,
            batch_var_unbiased: unbiased,
        },
    )
}

pub fn batchnorm_eval_forward<T: Real>(
    x: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
) -> Tensor4<T> {
    let c = x.dims()[3];
    let eps = T::lit(BN_EPS);
    let scale: Vec<T> = gamma
        .iter()
        .zip(running_var)
        .map(|(&g, &v)| g / (v + eps).sqrt())
        .collect();
    let mut y = Tensor4::zeros(x.dims());
    for (xr, yr) in x.data().chunks_exact(c).zip(y.data_mut().chunks_exact_mut(c)) {
        for j in 0..c {
            yr[j] = (xr[j] - running_mean[j]) * scale[j] + beta[j];
        }
    }
    y
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward<T: Real>(cache: &BnCache<T>, gamma: &[T], dy: &Tensor4<T>) -> (Tensor4<T>, Vec<T>, Vec<T>) {
    let c = gamma.len();
    let m = dy.data().len() / c;
    let mf = T::from_usize(m).unwrap();
    let mut sum_dy = vec![T::zero(); c];
    let mut sum_dy_xh = vec![T::zero(); c];
    for (gr, hr) in dy.data().chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
        for j in 0..c {
            sum_dy[j] = sum_dy[j] + gr[j];
            sum_dy_xh[j] = sum_dy_xh[j] + gr[j] * hr[j];
        }
    }
    let k: Vec<T> = (0..c).map(|j| gamma[j] * cache.inv_std[j] / mf).collect();
    let mut dx = Tensor4::zeros(dy.dims());
    for ((dr, gr), hr) in dx
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dy.data().chunks_exact(c))
        .zip(cache.x_hat.chunks_exact(c))
    {
        for j in 0..c {
            dr[j] = k[j] * (mf * gr[j] - sum_dy[j] - hr[j] * sum_dy_xh[j]);
        }
    }
    (dx, sum_dy_xh, sum_dy)
}

/// `y = x W + b` on `(n, 1, 1, in)` activations; `weights` is `in x out`.
pub fn dense_forward<T: Real>(x: &Tensor4<T>, weights: &[T], bias: &[T], units: usize) -> Tensor4<T> {
    let n = x.batch();
    let f = x.item_len();
    let mut y = Tensor4::zeros([n, 1, 1, units]);
    T::gemm(false, false, n, units, f, T::one(), x.data(), weights, T::zero(), y.data_mut());
    for r in y.data_mut().chunks_exact_mut(units) {
        r.iter_mut().zip(bias).for_each(|(v, &b)| *v = *v + b);
    }
    y
}

/// Returns `(dx, dW, db)`.
pub fn dense_backward<T: Real>(x: &Tensor4<T>, weights: &[T], dy: &Tensor4<T>) -> (Tensor4<T>, Vec<T>, Vec<T>) {
    let n = x.batch();
    let f = x.item_len();
    let units = dy.item_len();
    let mut dw = vec![T::zero(); f * units];
    T::gemm(true, false, f, units, n, T::one(), x.data(), dy.data(), T::zero(), &mut dw);
    let mut db = vec![T::zero(); units];
    for r in dy.data().chunks_exact(units) {
        db.iter_mut().zip(r).for_each(|(b, &g)| *b = *b + g);
    }
    let mut dx = Tensor4::zeros(x.dims());
    T::gemm(false, true, n, f, units, T::one(), dy.data(), weights, T::zero(), dx.data_mut());
    (dx, dw, db)
}

pub fn relu_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
    y
}

/// Gradient through ReLU given the layer's output.
pub fn relu_backward<T: Real>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    let mut dx = dy.clone();
    dx.data_mut()
        .iter_mut()
        .zip(y.data())
        .for_each(|(g, &v)| {
            if v <= T::zero() {
                *g = T::zero()
            }
        });
    dx
}

/// Row-wise softmax of `(n, 1, 1, k)` logits.
pub fn softmax<T: Real>(logits: &Tensor4<T>) -> Tensor4<T> {
    let k = logits.item_len();
    let mut p = logits.clone();
    for r in p.data_mut().chunks_exact_mut(k) {
        let m = r.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for v in r.iter_mut() {
            *v = (*v - m).exp();
            s = s + *v;
        }
        r.iter_mut().for_each(|v| *v = *v / s);
    }
    p
}

/// Mean cross-entropy of softmax(logits) against integer labels, computed
/// with log-sum-exp.
pub fn cross_entropy<T: Real>(logits: &Tensor4<T>, labels: &[usize]) -> T {
    let k = logits.item_len();
    let mut total = T::zero();
    for (r, &y) in logits.data().chunks_exact(k).zip(labels) {
        let m = r.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + r.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        total = total + (lse - r[y]);
    }
    total / T::from_usize(labels.len()).unwrap()
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_grad<T: Real>(logits: &Tensor4<T>, labels: &[usize]) -> Tensor4<T> {
    let k = logits.item_len();
    let n = T::from_usize(labels.len()).unwrap();
    let mut g = softmax(logits);
    for (r, &y) in g.data_mut().chunks_exact_mut(k).zip(labels) {
        r[y] = r[y] - T::one();
        r.iter_mut().for_each(|v| *v = *v / n);
    }
    g
}
