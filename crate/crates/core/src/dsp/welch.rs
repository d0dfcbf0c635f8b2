//! Welch power spectral density and band power.

use num_complex::Complex;
use rustfft::FftPlanner;

use super::bands::BandDef;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Welch segment length for a sampling rate: one second of samples (1 Hz bins).
pub fn welch_window(rate_hz: f64) -> usize {
    rate_hz.round().max(2.0) as usize
}

/// Symmetric Hann window.
fn hann<T: Real>(len: usize) -> Vec<T> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos()))
        .collect()
}

/// One-sided PSD by Welch's method: 1 s Hann segments, 50% overlap, each
/// segment mean-removed, periodograms averaged. Bin `k` is centered at
/// `k * rate_hz / window`. Density scaling, so `sum(psd) * df` approximates the
/// signal variance.
pub fn welch_psd<T: Real>(x: &[T], rate_hz: f64) -> Result<Vec<T>> {
    if !(rate_hz > 0.0) {
        return Err(invalid(format!("sample rate must be positive, got {rate_hz}")));
    }
    let win = welch_window(rate_hz);
    if x.len() < win {
        return Err(Error::Signal(format!(
            "Welch PSD needs at least {win} samples, got {}",
            x.len()
        )));
    }
    let hop = win / 2;
    let window = hann::<T>(win);
    let win_energy: T = window.iter().map(|&w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(win);
    let n_bins = win / 2 + 1;
    let mut acc = vec![T::zero(); n_bins];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); win];
    let mut segments = 0usize;
    let mut start = 0;
    while start + win <= x.len() {
        let seg = &x[start..start + win];
        let mean = seg.iter().copied().sum::<T>() / T::from_usize(win).unwrap();
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - mean) * w, T::zero());
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a = *a + b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = T::one() / (T::lit(rate_hz) * win_energy * T::from_usize(segments).unwrap());
    let nyquist = if win % 2 == 0 { Some(n_bins - 1) } else { None };
    for (k, a) in acc.iter_mut().enumerate() {
        let one_sided = if k == 0 || Some(k) == nyquist { T::one() } else { T::lit(2.0) };
        *a = *a * scale * one_sided;
    }
    Ok(acc)
}

/// Mean PSD over the bins whose center frequency lies in `[f_lo, f_hi]`,
/// never counting the DC bin. `psd` is one-sided with `psd.len() = window/2 + 1`.
pub fn band_power<T: Real>(psd: &[T], band: &BandDef, rate_hz: f64) -> Result<T> {
    if psd.len() < 2 {
        return Err(invalid("PSD has fewer than two bins"));
    }
    let window = 2 * (psd.len() - 1);
    let df = rate_hz / window as f64;
    let eps = 1e-9 * df;
    let mut sum = T::zero();
    let mut count = 0usize;
    for (k, &p) in psd.iter().enumerate().skip(1) {
        let f = k as f64 * df;
        if f >= band.f_lo - eps && f <= band.f_hi + eps {
            sum = sum + p;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Signal(format!(
            "band {} [{}, {}] Hz contains no PSD bins at {df} Hz resolution",
            band.name, band.f_lo, band.f_hi
        )));
    }
    Ok(sum / T::from_usize(count).unwrap())
}
