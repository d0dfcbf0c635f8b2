//! Windowed-sinc FIR band filters applied forward and backward (zero phase).
//!
//! Forward-backward filtering with a symmetric kernel `h` equals one linear
//! convolution with `h * h`, so the two passes are done as a single FFT
//! multiply by `H(f)^2` on an odd-reflection padded copy of the signal.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::bands::BandDef;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Kernel length at the reference rate of 128 Hz.
pub const TAPS_AT_128_HZ: usize = 255;

/// Kernel length for a sampling rate, keeping the transition width fixed in Hz.
pub fn filter_length(rate_hz: f64) -> usize {
    let n = (TAPS_AT_128_HZ as f64 * rate_hz / 128.0).round().max(3.0) as usize;
    n | 1
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Hamming-windowed sinc band-pass filter (low-pass when `f_lo == 0`).
#[derive(Debug, Clone)]
pub struct BandpassFilter {
    band: BandDef,
    rate_hz: f64,
    taps: Vec<f64>,
}

impl BandpassFilter {
    pub fn design(band: BandDef, rate_hz: f64) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {rate_hz}")));
        }
        if band.f_hi >= rate_hz / 2.0 {
            return Err(invalid(format!(
                "band {} upper edge {} Hz is not below Nyquist ({} Hz)",
                band.name,
                band.f_hi,
                rate_hz / 2.0
            )));
        }
        let len = filter_length(rate_hz);
        let mid = (len - 1) as f64 / 2.0;
        let hi = band.f_hi / rate_hz;
        let lo = band.f_lo / rate_hz;
        let taps = (0..len)
            .map(|n| {
                let k = n as f64 - mid;
                let ideal = 2.0 * hi * sinc(2.0 * hi * k) - 2.0 * lo * sinc(2.0 * lo * k);
                let w = 0.54
                    - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos();
                ideal * w
            })
            .collect();
        Ok(Self { band, rate_hz, taps })
    }

    pub fn band(&self) -> BandDef {
        self.band
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Approximate Hamming transition width, `3.3 * fs / L`.
    pub fn transition_width_hz(&self) -> f64 {
        3.3 * self.rate_hz / self.len() as f64
    }

    /// Shortest input accepted by [`apply`](Self::apply).
    pub fn min_signal_len(&self) -> usize {
        3 * self.len()
    }

    /// Gain of the combined forward-backward filter at `f_hz`.
    pub fn zero_phase_gain(&self, f_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f_hz / self.rate_hz;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, &h)| {
                (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin())
            });
        re * re + im * im
    }

    /// Zero-phase filtering of one channel.
    pub fn apply<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let engine = ZeroPhaseEngine::<T>::new(x.len(), self.len())?;
        let response = engine.response(&self.taps);
        let spec = engine.padded_spectrum(x);
        Ok(engine.filter(&spec, &response))
    }
}

/// Shared FFT machinery for filtering signals of one fixed length.
struct ZeroPhaseEngine<T: Real> {
    n: usize,
    taps: usize,
    padlen: usize,
    size: usize,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
}

impl<T: Real> ZeroPhaseEngine<T> {
    fn new(n: usize, taps: usize) -> Result<Self> {
        if n < 3 * taps {
            return Err(Error::Signal(format!(
                "signal of {n} samples is shorter than 3x the filter length ({taps} taps)"
            )));
        }
        let padlen = (3 * taps).min(n - 1);
        let size = (n + 2 * padlen + 2 * taps - 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            taps,
            padlen,
            size,
            fft: planner.plan_fft_forward(size),
            ifft: planner.plan_fft_inverse(size),
        })
    }

    /// Spectrum of `H(f)^2`, scaled by `1/size` so the inverse FFT is normalized.
    fn response(&self, taps: &[f64]) -> Vec<Complex<T>> {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.size];
        for (b, &h) in buf.iter_mut().zip(taps) {
            b.re = T::lit(h);
        }
        self.fft.process(&mut buf);
        let scale = T::one() / T::from_usize(self.size).unwrap();
        for b in buf.iter_mut() {
            *b = *b * *b * scale;
        }
        buf
    }

    fn padded_spectrum(&self, x: &[T]) -> Vec<Complex<T>> {
        debug_assert_eq!(x.len(), self.n);
        let two = T::lit(2.0);
        let zero = Complex::new(T::zero(), T::zero());
        let mut buf = vec![zero; self.size];
        let (first, last) = (x[0], x[self.n - 1]);
        // odd reflection about each end: x[-k] = 2 x[0] - x[k]
        for k in 0..self.padlen {
            buf[k].re = two * first - x[self.padlen - k];
        }
        for (i, &v) in x.iter().enumerate() {
            buf[self.padlen + i].re = v;
        }
        for k in 0..self.padlen {
            buf[self.padlen + self.n + k].re = two * last - x[self.n - 2 - k];
        }
        self.fft.process(&mut buf);
        buf
    }

    fn filter(&self, spectrum: &[Complex<T>], response: &[Complex<T>]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = spectrum
            .iter()
            .zip(response)
            .map(|(&s, &r)| s * r)
            .collect();
        self.ifft.process(&mut buf);
        let offset = self.padlen + self.taps - 1;
        buf[offset..offset + self.n].iter().map(|c| c.re).collect()
    }
}

/// Band-pass filters every row (channel) of `segment`.
pub fn bandpass<T: Real>(segment: ArrayView2<'_, T>, rate_hz: f64, band: BandDef) -> Result<Array2<T>> {
    let bank = BandBank::decompose(segment, rate_hz, &[band], "segment")?;
    Ok(bank.signals.into_iter().next().unwrap())
}

/// A multichannel signal decomposed into band-limited copies.
#[derive(Debug, Clone)]
pub struct BandBank<T> {
    source: String,
    bands: Vec<BandDef>,
    signals: Vec<Array2<T>>,
}

impl<T: Real> BandBank<T> {
    /// Filters `signal` (`[channels x samples]`) into each band. Each channel is
    /// transformed once and reused for every band.
    pub fn decompose(
        signal: ArrayView2<'_, T>,
        rate_hz: f64,
        bands: &[BandDef],
        source: impl Into<String>,
    ) -> Result<Self> {
        if bands.is_empty() {
            return Err(invalid("no bands requested"));
        }
        let filters = bands
            .iter()
            .map(|&b| BandpassFilter::design(b, rate_hz))
            .collect::<Result<Vec<_>>>()?;
        let (n_ch, n) = signal.dim();
        let engine = ZeroPhaseEngine::<T>::new(n, filters[0].len())?;
        let responses: Vec<_> = filters.iter().map(|f| engine.response(f.taps())).collect();
        let mut signals = vec![Array2::zeros((n_ch, n)); bands.len()];
        let mut row = vec![T::zero(); n];
        for (c, channel) in signal.axis_iter(Axis(0)).enumerate() {
            row.iter_mut().zip(channel.iter()).for_each(|(r, &v)| *r = v);
            let spec = engine.padded_spectrum(&row);
            for (out, resp) in signals.iter_mut().zip(&responses) {
                let y = engine.filter(&spec, resp);
                out.row_mut(c).iter_mut().zip(y).for_each(|(o, v)| *o = v);
            }
        }
        Ok(Self {
            source: source.into(),
            bands: bands.to_vec(),
            signals,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn bands(&self) -> &[BandDef] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn signal(&self, index: usize) -> ArrayView2<'_, T> {
        self.signals[index].view()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BandDef, ArrayView2<'_, T>)> {
        self.bands.iter().zip(self.signals.iter().map(|s| s.view()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::bands::{BandName, CANONICAL_BANDS};
    use ndarray::Array1;
    use std::f64::consts::PI;

    const FS: f64 = 128.0;

    fn sine(f: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / FS + phase).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn middle(x: &[f64]) -> &[f64] {
        let e = x.len() / 10;
        &x[e..x.len() - e]
    }

    #[test]
    fn reference_length_is_255() {
        assert_eq!(filter_length(128.0), 255);
        assert_eq!(filter_length(256.0) % 2, 1);
    }

    #[test]
    fn alpha_passes_ten_hz() {
        let f = BandpassFilter::design(BandName::Alpha.def(), FS).unwrap();
        let x = sine(10.0, 2048, 0.3);
        let y = f.apply(&x).unwrap();
        let ratio = rms(middle(&y)) / rms(middle(&x));
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn gamma_rejects_ten_hz() {
        let f = BandpassFilter::design(BandName::Gamma.def(), FS).unwrap();
        let x = sine(10.0, 2048, 0.0);
        let y = f.apply(&x).unwrap();
        assert!(rms(&y) / rms(&x) < 0.03);
    }

    #[test]
    fn every_band_has_unit_midband_gain_and_30db_stopband() {
        for band in CANONICAL_BANDS {
            let f = BandpassFilter::design(band, FS).unwrap();
            let g = f.zero_phase_gain(band.center());
            assert!((g - 1.0).abs() <= 0.05, "{}: mid-band gain {g}", band.name);
            let tw = f.transition_width_hz();
            let above = f.zero_phase_gain(band.f_hi + tw);
            assert!(above <= 10f64.powf(-30.0 / 20.0), "{}: {above}", band.name);
            if band.f_lo - tw > 0.0 {
                let below = f.zero_phase_gain(band.f_lo - tw);
                assert!(below <= 10f64.powf(-30.0 / 20.0), "{}: {below}", band.name);
            }
        }
    }

    #[test]
    fn measured_gain_matches_response_for_narrow_band() {
        let band = BandName::LowAlpha.def();
        let f = BandpassFilter::design(band, FS).unwrap();
        let x = sine(band.center(), 4096, 1.1);
        let y = f.apply(&x).unwrap();
        let ratio = rms(middle(&y)) / rms(middle(&x));
        assert!((ratio - f.zero_phase_gain(band.center())).abs() < 0.01);
        assert!((ratio - 1.0).abs() <= 0.05, "ratio {ratio}");
    }

    #[test]
    fn short_signal_rejected() {
        let f = BandpassFilter::design(BandName::Theta.def(), FS).unwrap();
        assert!(matches!(f.apply(&vec![0.0; 3 * 255 - 1]), Err(Error::Signal(_))));
        assert!(f.apply(&vec![0.0; 3 * 255]).is_ok());
    }

    #[test]
    fn nyquist_violation_rejected() {
        let g = BandName::Gamma.def();
        assert!(BandpassFilter::design(g, 100.0).is_err());
    }

    #[test]
    fn zero_phase_on_sinusoid() {
        // the filtered sine must stay aligned with the input (no group delay)
        let f = BandpassFilter::design(BandName::Alpha.def(), FS).unwrap();
        let x = sine(10.0, 2048, 0.0);
        let y = f.apply(&x).unwrap();
        let g = f.zero_phase_gain(10.0);
        for i in 300..1700 {
            assert!((y[i] - g * x[i]).abs() < 1e-3, "sample {i}");
        }
    }

    #[test]
    fn bank_matches_single_band_filtering() {
        let n = 1024;
        let sig = Array2::from_shape_fn((2, n), |(c, i)| {
            (i as f64 * 0.31 + c as f64).sin() + 0.5 * (i as f64 * 1.7).cos()
        });
        let bands = [BandName::Theta.def(), BandName::Beta.def()];
        let bank = BandBank::decompose(sig.view(), FS, &bands, "x").unwrap();
        for (k, b) in bands.iter().enumerate() {
            let f = BandpassFilter::design(*b, FS).unwrap();
            for c in 0..2 {
                let row: Vec<f64> = sig.row(c).to_vec();
                let y = Array1::from(f.apply(&row).unwrap());
                let diff = (&y - &bank.signal(k).row(c)).mapv(f64::abs);
                assert!(diff.iter().all(|&d| d < 1e-12));
            }
        }
        assert_eq!(bank.len(), 2);
    }
}
